//! Tetromino tilings of the 4x4 block.
//!
//! The five free tetrominoes tile a 4x4 board in exactly 117 ways, and under
//! the eight symmetries of the square those coverings fall into 22 orbits.
//! The covering dictionary built here is the combinatorial backbone of the
//! adaptive block transform: every 4x4 block is analyzed against all 117
//! coverings and the sparsest one wins.

use std::collections::{HashMap, HashSet};
use std::sync::LazyLock;

/// Free tetromino shape classes. `S` is the S/Z pair and `L` the L/J pair:
/// reflections are identified, so five classes cover all 19 one-sided forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TetrominoKind {
    I,
    O,
    T,
    S,
    L,
}

/// A tetromino placed on the 4x4 board. Cells are `(row, col)` in `0..4`,
/// stored in reading order (row-major); that order defines the slot order
/// used by the block transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tetromino {
    cells: [(u8, u8); 4],
}

impl Tetromino {
    fn from_mask(mask: u16) -> Tetromino {
        debug_assert_eq!(mask.count_ones(), 4);
        let mut cells = [(0u8, 0u8); 4];
        let mut n = 0;
        for bit in 0..16u8 {
            if mask & (1 << bit) != 0 {
                cells[n] = (bit / 4, bit % 4);
                n += 1;
            }
        }
        debug_assert_eq!(n, 4);
        Tetromino { cells }
    }

    pub fn cells(&self) -> &[(u8, u8); 4] {
        &self.cells
    }

    /// Board occupancy as a 16-bit mask, bit `row * 4 + col`.
    pub fn mask(&self) -> u16 {
        self.cells
            .iter()
            .fold(0u16, |m, &(r, c)| m | 1 << (r * 4 + c))
    }
}

/// The four cells of a piece in reading order (top-to-bottom, left-to-right).
/// Slot `s` of every per-piece coefficient vector refers to this order, and
/// the inverse transform writes samples back through it.
pub fn piece_cell_order(t: &Tetromino) -> [(u8, u8); 4] {
    *t.cells()
}

/// A free tetromino: one representative, normalized to the origin, plus its
/// distinct orientations under rotation and reflection.
#[derive(Debug, Clone)]
pub struct FreeTetromino {
    kind: TetrominoKind,
    representative: Vec<(u8, u8)>,
    orientations: Vec<Vec<(u8, u8)>>,
}

impl FreeTetromino {
    pub fn kind(&self) -> TetrominoKind {
        self.kind
    }

    /// Canonical orientation, translated to the origin, cells in reading order.
    pub fn representative(&self) -> &[(u8, u8)] {
        &self.representative
    }

    /// Distinct oriented forms (the orbit under the symmetries of the square),
    /// each translated to the origin. Sizes: I 2, O 1, T 4, S 4, L 8.
    pub fn orientations(&self) -> &[Vec<(u8, u8)>] {
        &self.orientations
    }
}

fn normalize(cells: &[(i16, i16)]) -> Vec<(i16, i16)> {
    let min_r = cells.iter().map(|c| c.0).min().unwrap();
    let min_c = cells.iter().map(|c| c.1).min().unwrap();
    let mut out: Vec<(i16, i16)> = cells.iter().map(|&(r, c)| (r - min_r, c - min_c)).collect();
    out.sort_unstable();
    out
}

/// The eight symmetries of the square acting on free coordinates.
fn symmetry_images(cells: &[(i16, i16)]) -> Vec<Vec<(i16, i16)>> {
    let maps: [fn(i16, i16) -> (i16, i16); 8] = [
        |r, c| (r, c),
        |r, c| (c, -r),
        |r, c| (-r, -c),
        |r, c| (-c, r),
        |r, c| (r, -c),
        |r, c| (-r, c),
        |r, c| (c, r),
        |r, c| (-c, -r),
    ];
    maps.iter()
        .map(|f| normalize(&cells.iter().map(|&(r, c)| f(r, c)).collect::<Vec<_>>()))
        .collect()
}

fn canonical_form(cells: &[(i16, i16)]) -> Vec<(i16, i16)> {
    symmetry_images(cells).into_iter().min().unwrap()
}

fn to_u8_cells(cells: &[(i16, i16)]) -> Vec<(u8, u8)> {
    cells.iter().map(|&(r, c)| (r as u8, c as u8)).collect()
}

fn classify(canonical: &[(i16, i16)]) -> TetrominoKind {
    let rows = canonical.iter().map(|c| c.0).max().unwrap() + 1;
    let cols = canonical.iter().map(|c| c.1).max().unwrap() + 1;
    if rows.max(cols) == 4 {
        return TetrominoKind::I;
    }
    if rows == 2 && cols == 2 {
        return TetrominoKind::O;
    }
    let set: HashSet<(i16, i16)> = canonical.iter().copied().collect();
    let max_degree = canonical
        .iter()
        .map(|&(r, c)| {
            [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
                .iter()
                .filter(|n| set.contains(n))
                .count()
        })
        .max()
        .unwrap();
    if max_degree == 3 {
        return TetrominoKind::T;
    }
    // Remaining 2x3 shapes: the S/Z pair is invariant under point reflection,
    // the L/J pair is not.
    let rotated = normalize(&canonical.iter().map(|&(r, c)| (-r, -c)).collect::<Vec<_>>());
    if rotated == canonical {
        TetrominoKind::S
    } else {
        TetrominoKind::L
    }
}

/// Enumerates the free tetrominoes by growth from a single cell, identifying
/// shapes up to rotation, reflection, and translation. Returns exactly five
/// classes: I, O, T, S (covering S/Z), L (covering L/J).
pub fn enumerate_free_tetrominoes() -> Vec<FreeTetromino> {
    let mut shapes: Vec<Vec<(i16, i16)>> = vec![vec![(0, 0)]];
    for _ in 1..4 {
        let mut grown: HashSet<Vec<(i16, i16)>> = HashSet::new();
        for shape in &shapes {
            let occupied: HashSet<(i16, i16)> = shape.iter().copied().collect();
            for &(r, c) in shape {
                for n in [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)] {
                    if !occupied.contains(&n) {
                        let mut next = shape.clone();
                        next.push(n);
                        grown.insert(canonical_form(&next));
                    }
                }
            }
        }
        shapes = grown.into_iter().collect();
        shapes.sort_unstable();
    }

    let mut out: Vec<FreeTetromino> = shapes
        .iter()
        .map(|canonical| {
            let mut orientations: Vec<Vec<(i16, i16)>> = symmetry_images(canonical);
            orientations.sort_unstable();
            orientations.dedup();
            FreeTetromino {
                kind: classify(canonical),
                representative: to_u8_cells(canonical),
                orientations: orientations.iter().map(|o| to_u8_cells(o)).collect(),
            }
        })
        .collect();
    out.sort_by_key(|s| match s.kind {
        TetrominoKind::I => 0,
        TetrominoKind::O => 1,
        TetrominoKind::T => 2,
        TetrominoKind::S => 3,
        TetrominoKind::L => 4,
    });
    out
}

/// Every way to place any tetromino on the 4x4 board, as occupancy masks.
/// Derived by translating each oriented form of each free shape.
fn board_placements() -> Vec<u16> {
    let mut out = Vec::new();
    for shape in enumerate_free_tetrominoes() {
        for orient in shape.orientations() {
            let rows = orient.iter().map(|c| c.0).max().unwrap() + 1;
            let cols = orient.iter().map(|c| c.1).max().unwrap() + 1;
            for dr in 0..=(4 - rows) {
                for dc in 0..=(4 - cols) {
                    let mask = orient
                        .iter()
                        .fold(0u16, |m, &(r, c)| m | 1 << ((r + dr) * 4 + (c + dc)));
                    out.push(mask);
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// One exact cover of the 4x4 board by four tetrominoes.
///
/// Pieces are numbered by the reading-order position of their first cell, the
/// label grid records that numbering per cell, and `index` is the covering's
/// position in the canonical dictionary order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Covering {
    index: u8,
    labels: [[u8; 4]; 4],
    pieces: [Tetromino; 4],
}

impl Covering {
    fn from_masks(masks: &[u16; 4]) -> Covering {
        let mut cell_piece = [usize::MAX; 16];
        for (p, &mask) in masks.iter().enumerate() {
            for bit in 0..16 {
                if mask & (1 << bit) != 0 {
                    cell_piece[bit] = p;
                }
            }
        }
        let mut relabel = [usize::MAX; 4];
        let mut next = 0u8;
        let mut labels = [[0u8; 4]; 4];
        for bit in 0..16 {
            let p = cell_piece[bit];
            if relabel[p] == usize::MAX {
                relabel[p] = next as usize;
                next += 1;
            }
            labels[bit / 4][bit % 4] = relabel[p] as u8;
        }
        let mut ordered = [0u16; 4];
        for (p, &mask) in masks.iter().enumerate() {
            ordered[relabel[p]] = mask;
        }
        Covering {
            index: 0,
            labels,
            pieces: ordered.map(Tetromino::from_mask),
        }
    }

    /// Position in the canonical dictionary order, `0..117`.
    pub fn index(&self) -> u8 {
        self.index
    }

    /// Per-cell piece labels; `labels[row][col]` names the piece covering
    /// that cell, and piece `s` of `pieces()` carries label `s`.
    pub fn labels(&self) -> &[[u8; 4]; 4] {
        &self.labels
    }

    /// The four pieces in label order (numbered by first cell in reading order).
    pub fn pieces(&self) -> &[Tetromino; 4] {
        &self.pieces
    }

    /// The label grid flattened to 16 digits in reading order.
    pub fn label_string(&self) -> String {
        self.labels
            .iter()
            .flatten()
            .map(|&l| char::from(b'0' + l))
            .collect()
    }

    /// Four text rows of piece digits, for debug dumps.
    pub fn ascii(&self) -> String {
        self.labels
            .iter()
            .map(|row| row.iter().map(|&l| char::from(b'0' + l)).collect::<String>())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Depth-first exact cover: always extend at the first uncovered cell in
/// reading order, trying every placement that contains it.
fn enumerate_covering_masks(placements: &[u16]) -> Vec<[u16; 4]> {
    let mut by_first_cell: Vec<Vec<u16>> = vec![Vec::new(); 16];
    for &p in placements {
        by_first_cell[p.trailing_zeros() as usize].push(p);
    }
    let mut out = Vec::new();
    let mut stack = [0u16; 4];
    fn recurse(
        covered: u16,
        depth: usize,
        by_first_cell: &[Vec<u16>],
        stack: &mut [u16; 4],
        out: &mut Vec<[u16; 4]>,
    ) {
        if covered == 0xFFFF {
            out.push(*stack);
            return;
        }
        let first = (!covered).trailing_zeros() as usize;
        for &p in &by_first_cell[first] {
            if p & covered == 0 {
                stack[depth] = p;
                recurse(covered | p, depth + 1, by_first_cell, stack, out);
            }
        }
    }
    recurse(0, 0, &by_first_cell, &mut stack, &mut out);
    out
}

const SQUARES_LABELS: [[u8; 4]; 4] = [[0, 0, 1, 1], [0, 0, 1, 1], [2, 2, 3, 3], [2, 2, 3, 3]];

/// Enumerates all 117 coverings in canonical dictionary order: the 2x2-squares
/// covering first (so degenerate ties reduce to the classical block Haar
/// transform), then the rest sorted by label string.
pub fn enumerate_coverings() -> Vec<Covering> {
    let mut coverings: Vec<Covering> = enumerate_covering_masks(&board_placements())
        .iter()
        .map(Covering::from_masks)
        .collect();
    coverings.sort_by(|a, b| a.labels.cmp(&b.labels));
    let squares = coverings
        .iter()
        .position(|c| c.labels == SQUARES_LABELS)
        .expect("squares covering present");
    let squares = coverings.remove(squares);
    coverings.insert(0, squares);
    for (i, c) in coverings.iter_mut().enumerate() {
        c.index = i as u8;
    }
    coverings
}

/// The shared, immutable covering dictionary.
#[derive(Debug)]
pub struct CoveringDictionary {
    coverings: Vec<Covering>,
}

static STANDARD: LazyLock<CoveringDictionary> = LazyLock::new(|| CoveringDictionary {
    coverings: enumerate_coverings(),
});

impl CoveringDictionary {
    /// The canonical dictionary, built once per process and shared read-only.
    pub fn standard() -> &'static CoveringDictionary {
        &STANDARD
    }

    pub fn coverings(&self) -> &[Covering] {
        &self.coverings
    }

    pub fn len(&self) -> usize {
        self.coverings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coverings.is_empty()
    }

    pub fn get(&self, index: u8) -> Option<&Covering> {
        self.coverings.get(index as usize)
    }
}

/// An equivalence class of coverings under the symmetries of the square.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Orbit {
    representative: u8,
    members: Vec<u8>,
}

impl Orbit {
    /// Smallest covering index in the class.
    pub fn representative(&self) -> u8 {
        self.representative
    }

    /// All covering indices in the class, ascending.
    pub fn members(&self) -> &[u8] {
        &self.members
    }
}

/// Board-coordinate images of the eight symmetries of the 4x4 square.
fn board_symmetries() -> [fn(u8, u8) -> (u8, u8); 8] {
    [
        |r, c| (r, c),
        |r, c| (c, 3 - r),
        |r, c| (3 - r, 3 - c),
        |r, c| (3 - c, r),
        |r, c| (r, 3 - c),
        |r, c| (3 - r, c),
        |r, c| (c, r),
        |r, c| (3 - c, 3 - r),
    ]
}

/// Groups the dictionary into its 22 fundamental forms: orbits under rotation
/// and reflection, sorted by representative index.
pub fn fundamental_forms(dict: &CoveringDictionary) -> Vec<Orbit> {
    let index_of: HashMap<[[u8; 4]; 4], u8> = dict
        .coverings()
        .iter()
        .map(|c| (*c.labels(), c.index()))
        .collect();
    let syms = board_symmetries();
    let mut seen = vec![false; dict.len()];
    let mut orbits = Vec::new();
    for covering in dict.coverings() {
        if seen[covering.index() as usize] {
            continue;
        }
        let mut members: Vec<u8> = syms
            .iter()
            .map(|sym| {
                let masks: Vec<u16> = covering
                    .pieces()
                    .iter()
                    .map(|piece| {
                        piece.cells().iter().fold(0u16, |m, &(r, c)| {
                            let (tr, tc) = sym(r, c);
                            m | 1 << (tr * 4 + tc)
                        })
                    })
                    .collect();
                let image = Covering::from_masks(&[masks[0], masks[1], masks[2], masks[3]]);
                index_of[image.labels()]
            })
            .collect();
        members.sort_unstable();
        members.dedup();
        for &m in &members {
            seen[m as usize] = true;
        }
        orbits.push(Orbit {
            representative: members[0],
            members,
        });
    }
    orbits
}
