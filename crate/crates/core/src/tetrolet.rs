//! Adaptive tetromino-block Haar transform.
//!
//! Each 4x4 block is analyzed against all 117 tetromino coverings with an
//! orthonormal 4-point Haar transform per piece; the covering with the
//! smallest total absolute detail (the sparsest description) is kept. Piece
//! coefficients are rearranged into 2x2 tiles so the decomposition can be
//! iterated on the low-pass plane like an ordinary wavelet transform. The
//! transform is critically sampled and exactly invertible given the stored
//! covering choices.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::plane::ImagePlane;
use crate::tiling::{piece_cell_order, Covering, CoveringDictionary};

/// Where piece slot `s` lands inside a 2x2 coefficient tile: slots fill the
/// left column top-to-bottom, then the right column.
pub const SLOT_LAYOUT: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];

/// Orthonormal 4-point Haar analysis of one piece's samples (in slot order):
/// returns the low-pass coefficient and the three detail coefficients.
///
/// ```text
/// lowpass = (v0 + v1 + v2 + v3) / 2      detail2 = (v0 - v1 + v2 - v3) / 2
/// detail1 = (v0 + v1 - v2 - v3) / 2      detail3 = (v0 - v1 - v2 + v3) / 2
/// ```
#[inline]
pub fn haar_on_slots(v: [f64; 4]) -> (f64, [f64; 3]) {
    let lowpass = 0.5 * (v[0] + v[1] + v[2] + v[3]);
    let d1 = 0.5 * (v[0] + v[1] - v[2] - v[3]);
    let d2 = 0.5 * (v[0] - v[1] + v[2] - v[3]);
    let d3 = 0.5 * (v[0] - v[1] - v[2] + v[3]);
    (lowpass, [d1, d2, d3])
}

/// Inverse of [`haar_on_slots`]. The transform matrix is symmetric and
/// orthonormal, so synthesis is the same butterfly applied to the coefficients.
#[inline]
pub fn haar_inverse(lowpass: f64, d: [f64; 3]) -> [f64; 4] {
    [
        0.5 * (lowpass + d[0] + d[1] + d[2]),
        0.5 * (lowpass + d[0] - d[1] - d[2]),
        0.5 * (lowpass - d[0] + d[1] - d[2]),
        0.5 * (lowpass - d[0] - d[1] + d[2]),
    ]
}

/// Transform coefficients of one 4x4 block under its selected covering.
/// `lowpass[s]` and `details[l][s]` belong to piece `s`; `l` indexes the
/// three detail orientations.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCoefficients {
    pub covering_index: u8,
    pub lowpass: [f64; 4],
    pub details: [[f64; 4]; 3],
}

impl BlockCoefficients {
    /// Total absolute detail mass, the sparsity cost the covering search minimizes.
    pub fn l1_cost(&self) -> f64 {
        self.details.iter().flatten().map(|d| d.abs()).sum()
    }
}

fn analyze_covering(block: &[[f64; 4]; 4], covering: &Covering) -> (BlockCoefficients, f64) {
    let mut coeffs = BlockCoefficients {
        covering_index: covering.index(),
        lowpass: [0.0; 4],
        details: [[0.0; 4]; 3],
    };
    let mut cost = 0.0;
    for (s, piece) in covering.pieces().iter().enumerate() {
        let cells = piece_cell_order(piece);
        let v = [
            block[cells[0].0 as usize][cells[0].1 as usize],
            block[cells[1].0 as usize][cells[1].1 as usize],
            block[cells[2].0 as usize][cells[2].1 as usize],
            block[cells[3].0 as usize][cells[3].1 as usize],
        ];
        let (lowpass, d) = haar_on_slots(v);
        coeffs.lowpass[s] = lowpass;
        coeffs.details[0][s] = d[0];
        coeffs.details[1][s] = d[1];
        coeffs.details[2][s] = d[2];
        cost += d[0].abs() + d[1].abs() + d[2].abs();
    }
    (coeffs, cost)
}

/// Analyzes one 4x4 block against every covering in the dictionary and keeps
/// the one with minimal total absolute detail; ties go to the smallest
/// covering index.
pub fn transform_block(block: &[[f64; 4]; 4], dict: &CoveringDictionary) -> BlockCoefficients {
    let mut best: Option<(BlockCoefficients, f64)> = None;
    for covering in dict.coverings() {
        let (coeffs, cost) = analyze_covering(block, covering);
        match &best {
            Some((_, best_cost)) if cost >= *best_cost => {}
            _ => best = Some((coeffs, cost)),
        }
    }
    best.expect("dictionary is non-empty").0
}

/// Reconstructs a 4x4 block from its coefficients under the covering they
/// were produced with.
pub fn invert_block(coeffs: &BlockCoefficients, dict: &CoveringDictionary) -> Result<[[f64; 4]; 4]> {
    let covering = dict.get(coeffs.covering_index).ok_or_else(|| {
        Error::MalformedDecomposition(format!(
            "covering index {} out of range",
            coeffs.covering_index
        ))
    })?;
    let mut block = [[0.0f64; 4]; 4];
    for (s, piece) in covering.pieces().iter().enumerate() {
        let v = haar_inverse(
            coeffs.lowpass[s],
            [
                coeffs.details[0][s],
                coeffs.details[1][s],
                coeffs.details[2][s],
            ],
        );
        for (slot, &(r, c)) in piece_cell_order(piece).iter().enumerate() {
            block[r as usize][c as usize] = v[slot];
        }
    }
    Ok(block)
}

/// Per-block covering choices of one decomposition level, on the block grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoveringMap {
    blocks_wide: usize,
    blocks_high: usize,
    indices: Vec<u8>,
}

impl CoveringMap {
    fn new(blocks_wide: usize, blocks_high: usize) -> CoveringMap {
        CoveringMap {
            blocks_wide,
            blocks_high,
            indices: vec![0; blocks_wide * blocks_high],
        }
    }

    pub fn blocks_wide(&self) -> usize {
        self.blocks_wide
    }

    pub fn blocks_high(&self) -> usize {
        self.blocks_high
    }

    pub fn get(&self, block_row: usize, block_col: usize) -> u8 {
        self.indices[block_row * self.blocks_wide + block_col]
    }

    fn set(&mut self, block_row: usize, block_col: usize, index: u8) {
        self.indices[block_row * self.blocks_wide + block_col] = index;
    }
}

/// Detail subbands and covering choices of one level. Orientation `l` of
/// `details` collects every block's `details[l]` coefficients as 2x2 tiles.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionLevel {
    pub details: [ImagePlane; 3],
    pub coverings: CoveringMap,
}

/// A complete multi-level decomposition: `levels[0]` is the finest scale,
/// `lowpass` the coarsest approximation. Critically sampled: coefficient
/// count equals input pixel count.
#[derive(Debug, Clone, PartialEq)]
pub struct TetroletDecomposition {
    pub levels: Vec<DecompositionLevel>,
    pub lowpass: ImagePlane,
}

impl TetroletDecomposition {
    /// Input dimensions `(width, height)` this decomposition reconstructs to.
    pub fn input_dims(&self) -> (usize, usize) {
        let first = &self.levels[0].details[0];
        (first.width() * 2, first.height() * 2)
    }
}

fn transform_divisor(levels: usize) -> usize {
    4 << (levels - 1)
}

/// Decomposes a plane with `levels` adaptive block-transform passes. Both
/// dimensions must be (nonzero) multiples of `4 * 2^(levels-1)` so every
/// level tiles exactly into 4x4 blocks.
pub fn forward(plane: &ImagePlane, levels: usize) -> Result<TetroletDecomposition> {
    if levels == 0 {
        return Err(Error::NoLevels);
    }
    let divisor = transform_divisor(levels);
    if plane.width() < divisor || plane.height() < divisor {
        return Err(Error::ImageTooSmall {
            width: plane.width(),
            height: plane.height(),
            min: divisor,
            levels,
        });
    }
    if plane.width() % divisor != 0 || plane.height() % divisor != 0 {
        return Err(Error::NotTransformSized {
            width: plane.width(),
            height: plane.height(),
            divisor,
        });
    }

    let dict = CoveringDictionary::standard();
    let mut current = plane.clone();
    let mut out_levels = Vec::with_capacity(levels);
    for _ in 0..levels {
        let blocks_wide = current.width() / 4;
        let blocks_high = current.height() / 4;
        let half_w = current.width() / 2;
        let half_h = current.height() / 2;
        let mut lowpass = ImagePlane::zeros(half_w, half_h);
        let mut details = [
            ImagePlane::zeros(half_w, half_h),
            ImagePlane::zeros(half_w, half_h),
            ImagePlane::zeros(half_w, half_h),
        ];
        let mut coverings = CoveringMap::new(blocks_wide, blocks_high);
        for block_row in 0..blocks_high {
            for block_col in 0..blocks_wide {
                let mut block = [[0.0f64; 4]; 4];
                for (r, row) in block.iter_mut().enumerate() {
                    for (c, v) in row.iter_mut().enumerate() {
                        *v = current.get(block_row * 4 + r, block_col * 4 + c);
                    }
                }
                let coeffs = transform_block(&block, dict);
                coverings.set(block_row, block_col, coeffs.covering_index);
                for (s, &(dr, dc)) in SLOT_LAYOUT.iter().enumerate() {
                    let (tr, tc) = (block_row * 2 + dr, block_col * 2 + dc);
                    lowpass.set(tr, tc, coeffs.lowpass[s]);
                    for l in 0..3 {
                        details[l].set(tr, tc, coeffs.details[l][s]);
                    }
                }
            }
        }
        out_levels.push(DecompositionLevel { details, coverings });
        current = lowpass;
    }
    Ok(TetroletDecomposition {
        levels: out_levels,
        lowpass: current,
    })
}

fn check_level_shape(level: &DecompositionLevel, index: usize) -> Result<(usize, usize)> {
    let w = level.details[0].width();
    let h = level.details[0].height();
    for d in &level.details {
        if d.width() != w || d.height() != h {
            return Err(Error::MalformedDecomposition(format!(
                "level {} detail planes have differing sizes",
                index + 1
            )));
        }
    }
    if w % 2 != 0 || h % 2 != 0 || w == 0 || h == 0 {
        return Err(Error::MalformedDecomposition(format!(
            "level {} subbands are {}x{} but must be nonzero and even",
            index + 1,
            w,
            h
        )));
    }
    if level.coverings.blocks_wide() != w / 2 || level.coverings.blocks_high() != h / 2 {
        return Err(Error::MalformedDecomposition(format!(
            "level {} covering map is {}x{} but {}x{} blocks are needed",
            index + 1,
            level.coverings.blocks_wide(),
            level.coverings.blocks_high(),
            w / 2,
            h / 2
        )));
    }
    Ok((w, h))
}

/// Exactly reconstructs the input plane from a decomposition, using the
/// stored covering choices. Rejects structurally inconsistent input.
pub fn inverse(decomposition: &TetroletDecomposition) -> Result<ImagePlane> {
    if decomposition.levels.is_empty() {
        return Err(Error::NoLevels);
    }
    let dict = CoveringDictionary::standard();
    let mut expected = (
        decomposition.lowpass.width(),
        decomposition.lowpass.height(),
    );
    for (i, level) in decomposition.levels.iter().enumerate().rev() {
        let dims = check_level_shape(level, i)?;
        if dims != expected {
            return Err(Error::MalformedDecomposition(format!(
                "level {} subbands are {}x{} but the coarser level implies {}x{}",
                i + 1,
                dims.0,
                dims.1,
                expected.0,
                expected.1
            )));
        }
        expected = (dims.0 * 2, dims.1 * 2);
    }

    let mut current = decomposition.lowpass.clone();
    for level in decomposition.levels.iter().rev() {
        let blocks_wide = level.coverings.blocks_wide();
        let blocks_high = level.coverings.blocks_high();
        let mut plane = ImagePlane::zeros(current.width() * 2, current.height() * 2);
        for block_row in 0..blocks_high {
            for block_col in 0..blocks_wide {
                let mut coeffs = BlockCoefficients {
                    covering_index: level.coverings.get(block_row, block_col),
                    lowpass: [0.0; 4],
                    details: [[0.0; 4]; 3],
                };
                for (s, &(dr, dc)) in SLOT_LAYOUT.iter().enumerate() {
                    let (tr, tc) = (block_row * 2 + dr, block_col * 2 + dc);
                    coeffs.lowpass[s] = current.get(tr, tc);
                    for l in 0..3 {
                        coeffs.details[l][s] = level.details[l].get(tr, tc);
                    }
                }
                let block = invert_block(&coeffs, dict)?;
                for (r, row) in block.iter().enumerate() {
                    for (c, &v) in row.iter().enumerate() {
                        plane.set(block_row * 4 + r, block_col * 4 + c, v);
                    }
                }
            }
        }
        current = plane;
    }
    Ok(current)
}

fn write_plane(path: &Path, plane: &ImagePlane) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    for row in 0..plane.height() {
        let line = plane
            .row(row)
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(file, "{line}").map_err(io_err)?;
    }
    file.flush().map_err(io_err)
}

/// Writes every subband, covering map, and the final low-pass plane as plain
/// text matrices into `dir`, one file each; returns the paths written.
/// Intended for debugging and golden tests.
pub fn dump_decomposition(
    decomposition: &TetroletDecomposition,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (i, level) in decomposition.levels.iter().enumerate() {
        for (l, detail) in level.details.iter().enumerate() {
            let path = dir.join(format!("level{}_detail{}.txt", i + 1, l + 1));
            write_plane(&path, detail)?;
            written.push(path);
        }
        let path = dir.join(format!("level{}_coverings.txt", i + 1));
        let io_err = |source| Error::Io {
            path: path.clone(),
            source,
        };
        let mut file = std::io::BufWriter::new(std::fs::File::create(&path).map_err(io_err)?);
        for block_row in 0..level.coverings.blocks_high() {
            let line = (0..level.coverings.blocks_wide())
                .map(|block_col| level.coverings.get(block_row, block_col).to_string())
                .collect::<Vec<_>>()
                .join(" ");
            writeln!(file, "{line}").map_err(io_err)?;
        }
        file.flush().map_err(io_err)?;
        written.push(path);
    }
    let path = dir.join("lowpass.txt");
    write_plane(&path, &decomposition.lowpass)?;
    written.push(path);
    Ok(written)
}
