//! Image loading, cropping, the reduced-reference feature file, and dataset
//! manifests.
//!
//! The feature file is JSON with every float printed at 17 significant
//! digits, so a write/read round trip reproduces the exact same bits.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gsm::{CovarianceMatrix, RrFeatureSet, SubbandFeatures, WeibullParams, NEIGHBORHOOD_DIM};
use crate::plane::ImagePlane;

/// Current feature file format version.
pub const RR_FORMAT_VERSION: u32 = 1;

/// BT.601 luma from 8-bit RGB, in [0, 255].
pub fn luma_from_rgb8(r: u8, g: u8, b: u8) -> f64 {
    0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64
}

/// Decodes an image file into a luma plane in [0, 255]. Grayscale samples
/// pass through; color converts via BT.601 weights. 16-bit samples are
/// rescaled by 1/257 onto the 8-bit range.
pub fn load_grayscale(path: &Path) -> Result<ImagePlane> {
    let img = image::ImageReader::open(path)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?
        .decode()
        .map_err(|source| Error::ImageDecode {
            path: path.to_path_buf(),
            source,
        })?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let mut samples = Vec::with_capacity(width * height);
    match img {
        image::DynamicImage::ImageLuma8(p) => {
            samples.extend(p.pixels().map(|px| px.0[0] as f64));
        }
        image::DynamicImage::ImageLumaA8(p) => {
            samples.extend(p.pixels().map(|px| px.0[0] as f64));
        }
        image::DynamicImage::ImageLuma16(p) => {
            samples.extend(p.pixels().map(|px| px.0[0] as f64 / 257.0));
        }
        image::DynamicImage::ImageRgb8(p) => {
            samples.extend(p.pixels().map(|px| luma_from_rgb8(px.0[0], px.0[1], px.0[2])));
        }
        image::DynamicImage::ImageRgba8(p) => {
            samples.extend(p.pixels().map(|px| luma_from_rgb8(px.0[0], px.0[1], px.0[2])));
        }
        other => {
            let rgb = other.to_rgb32f();
            samples.extend(rgb.pixels().map(|px| {
                255.0 * (0.299 * px.0[0] as f64 + 0.587 * px.0[1] as f64 + 0.114 * px.0[2] as f64)
            }));
        }
    }
    ImagePlane::from_samples(width, height, samples)
}

/// Writes a plane as an 8-bit portable graymap, rounding and clamping samples
/// to [0, 255].
pub fn write_pgm(plane: &ImagePlane, path: &Path) -> Result<()> {
    let mut buf = image::GrayImage::new(plane.width() as u32, plane.height() as u32);
    for (r, row) in (0..plane.height()).zip(0u32..) {
        for c in 0..plane.width() {
            buf.put_pixel(
                c as u32,
                row,
                image::Luma([plane.get(r, c).round().clamp(0.0, 255.0) as u8]),
            );
        }
    }
    buf.save_with_format(path, image::ImageFormat::Pnm)
        .map_err(|source| Error::ImageDecode {
            path: path.to_path_buf(),
            source,
        })
}

/// A centered crop whose dimensions divide evenly into the transform's block
/// grid, along with where it was taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct CroppedPlane {
    pub plane: ImagePlane,
    pub offset_row: usize,
    pub offset_col: usize,
}

/// Center-crops to the largest dimensions divisible by `4 * 2^(levels-1)`.
/// Excess splits evenly, the extra pixel (if any) going to the trailing side.
/// Already-conforming planes pass through unchanged, so the crop is
/// idempotent.
pub fn crop_to_transform_size(plane: &ImagePlane, levels: usize) -> Result<CroppedPlane> {
    if levels == 0 {
        return Err(Error::NoLevels);
    }
    let divisor = 4usize << (levels - 1);
    if plane.width() < divisor || plane.height() < divisor {
        return Err(Error::ImageTooSmall {
            width: plane.width(),
            height: plane.height(),
            min: divisor,
            levels,
        });
    }
    let new_w = plane.width() - plane.width() % divisor;
    let new_h = plane.height() - plane.height() % divisor;
    let offset_col = (plane.width() - new_w) / 2;
    let offset_row = (plane.height() - new_h) / 2;
    let plane = if (new_w, new_h) == (plane.width(), plane.height()) {
        plane.clone()
    } else {
        plane.window(offset_row, offset_col, new_h, new_w)
    };
    Ok(CroppedPlane {
        plane,
        offset_row,
        offset_col,
    })
}

#[derive(Serialize, Deserialize)]
struct RrFileSubband {
    scale: u8,
    orientation: u8,
    weibull_shape: f64,
    weibull_scale: f64,
    covariance_upper: Vec<f64>,
    dropped_zero_fraction: f64,
}

#[derive(Serialize, Deserialize)]
struct RrFile {
    format_version: u32,
    source_id: String,
    width: usize,
    height: usize,
    levels: usize,
    subbands: Vec<RrFileSubband>,
}

/// JSON formatter printing every f64 at 17 significant digits
/// (`{:.16e}`), enough to reproduce the exact bit pattern on parse.
struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes a feature set to the feature file's JSON text.
pub fn rr_to_json(set: &RrFeatureSet) -> Result<String> {
    for f in &set.features {
        let finite = f.weibull.shape.is_finite()
            && f.weibull.scale.is_finite()
            && f.dropped_zero_fraction.is_finite()
            && f.covariance.upper_triangle().iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::FeatureFile(format!(
                "subband scale {} orientation {} contains non-finite values",
                f.scale, f.orientation
            )));
        }
    }
    let file = RrFile {
        format_version: RR_FORMAT_VERSION,
        source_id: set.source_id.clone(),
        width: set.width,
        height: set.height,
        levels: set.levels,
        subbands: set
            .features
            .iter()
            .map(|f| RrFileSubband {
                scale: f.scale,
                orientation: f.orientation,
                weibull_shape: f.weibull.shape,
                weibull_scale: f.weibull.scale,
                covariance_upper: f.covariance.upper_triangle(),
                dropped_zero_fraction: f.dropped_zero_fraction,
            })
            .collect(),
    };
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecision);
    file.serialize(&mut ser)
        .map_err(|e| Error::FeatureFile(format!("serialization failed: {e}")))?;
    Ok(String::from_utf8(out).expect("serializer emits UTF-8"))
}

/// Parses and validates feature file JSON: version, the complete canonical
/// subband set for the declared level count, covariance shape and positive
/// definiteness, parameter ranges, and dimension/divisibility coherence.
pub fn rr_from_json(text: &str) -> Result<RrFeatureSet> {
    let file: RrFile =
        serde_json::from_str(text).map_err(|e| Error::FeatureFile(format!("invalid JSON: {e}")))?;
    if file.format_version != RR_FORMAT_VERSION {
        return Err(Error::FeatureFileVersion {
            expected: RR_FORMAT_VERSION,
            got: file.format_version,
        });
    }
    if file.levels == 0 || file.levels > 16 {
        return Err(Error::FeatureFile(format!(
            "level count {} is out of range",
            file.levels
        )));
    }
    let divisor = 4usize << (file.levels - 1);
    if file.width == 0 || file.height == 0 || file.width % divisor != 0 || file.height % divisor != 0
    {
        return Err(Error::FeatureFile(format!(
            "dimensions {}x{} are not multiples of {divisor} as a {}-level decomposition requires",
            file.width, file.height, file.levels
        )));
    }
    let mut expected = Vec::new();
    for scale in 1..=file.levels as u8 {
        for orientation in 1..=3u8 {
            expected.push((scale, orientation));
        }
    }
    let got: Vec<(u8, u8)> = file.subbands.iter().map(|s| (s.scale, s.orientation)).collect();
    if got != expected {
        for want in &expected {
            if !got.contains(want) {
                return Err(Error::FeatureFile(format!(
                    "missing subband scale {} orientation {}",
                    want.0, want.1
                )));
            }
        }
        return Err(Error::FeatureFile(format!(
            "subbands out of canonical order or duplicated: got {got:?}"
        )));
    }
    let mut features = Vec::with_capacity(file.subbands.len());
    for s in &file.subbands {
        let expected_len = NEIGHBORHOOD_DIM * (NEIGHBORHOOD_DIM + 1) / 2;
        if s.covariance_upper.len() != expected_len {
            return Err(Error::FeatureFile(format!(
                "subband scale {} orientation {}: covariance has {} entries, expected {expected_len}",
                s.scale,
                s.orientation,
                s.covariance_upper.len()
            )));
        }
        let covariance = CovarianceMatrix::from_upper_triangle(NEIGHBORHOOD_DIM, &s.covariance_upper)
            .map_err(|e| {
                Error::FeatureFile(format!(
                    "subband scale {} orientation {}: {e}",
                    s.scale, s.orientation
                ))
            })?;
        if !covariance.is_positive_definite() {
            return Err(Error::FeatureFile(format!(
                "subband scale {} orientation {}: covariance is not positive definite",
                s.scale, s.orientation
            )));
        }
        if !(s.weibull_shape.is_finite() && s.weibull_shape > 0.0)
            || !(s.weibull_scale.is_finite() && s.weibull_scale > 0.0)
        {
            return Err(Error::FeatureFile(format!(
                "subband scale {} orientation {}: weibull parameters must be finite and positive",
                s.scale, s.orientation
            )));
        }
        if !(0.0..=1.0).contains(&s.dropped_zero_fraction) {
            return Err(Error::FeatureFile(format!(
                "subband scale {} orientation {}: dropped fraction {} is outside [0, 1]",
                s.scale, s.orientation, s.dropped_zero_fraction
            )));
        }
        features.push(SubbandFeatures {
            scale: s.scale,
            orientation: s.orientation,
            covariance,
            weibull: WeibullParams {
                shape: s.weibull_shape,
                scale: s.weibull_scale,
            },
            dropped_zero_fraction: s.dropped_zero_fraction,
        });
    }
    Ok(RrFeatureSet {
        source_id: file.source_id,
        width: file.width,
        height: file.height,
        levels: file.levels,
        features,
    })
}

/// Writes the feature file for a feature set.
pub fn write_rr(set: &RrFeatureSet, path: &Path) -> Result<()> {
    let text = rr_to_json(set)?;
    let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(text.as_bytes())
        .and_then(|_| file.write_all(b"\n"))
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Reads and validates a feature file.
pub fn read_rr(path: &Path) -> Result<RrFeatureSet> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    rr_from_json(&text)
}

/// One dataset manifest row. Paths are already resolved against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub ref_path: PathBuf,
    pub dist_path: PathBuf,
    pub mos: f64,
    pub distortion_label: String,
}

/// Parses a dataset manifest: CSV with a header naming at least
/// `ref_path,dist_path,mos,distortion_label`, `#` comment lines, and
/// whitespace trimming. Relative paths resolve against the manifest's
/// directory; errors carry 1-based line numbers.
pub fn parse_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let base = path.parent().unwrap_or_else(|| Path::new("")).to_path_buf();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                if let csv::ErrorKind::Io(source) = e.into_kind() {
                    Error::Io {
                        path: path.to_path_buf(),
                        source,
                    }
                } else {
                    unreachable!()
                }
            }
            _ => Error::ManifestFormat(e.to_string()),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::ManifestFormat(e.to_string()))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::ManifestFormat(format!("missing required column '{name}'")))
    };
    let ref_col = col("ref_path")?;
    let dist_col = col("dist_path")?;
    let mos_col = col("mos")?;
    let label_col = col("distortion_label")?;

    let resolve = |raw: &str| -> PathBuf {
        let p = Path::new(raw);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };

    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| match e.position() {
            Some(pos) => Error::Manifest {
                line: pos.line(),
                message: e.to_string(),
            },
            None => Error::ManifestFormat(e.to_string()),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize, name: &str| -> Result<String> {
            record
                .get(idx)
                .map(str::to_string)
                .ok_or_else(|| Error::Manifest {
                    line,
                    message: format!("missing field '{name}'"),
                })
        };
        let ref_raw = field(ref_col, "ref_path")?;
        let dist_raw = field(dist_col, "dist_path")?;
        let mos_raw = field(mos_col, "mos")?;
        let label = field(label_col, "distortion_label")?;
        if ref_raw.is_empty() || dist_raw.is_empty() {
            return Err(Error::Manifest {
                line,
                message: "empty image path".into(),
            });
        }
        if label.is_empty() {
            return Err(Error::Manifest {
                line,
                message: "empty distortion_label".into(),
            });
        }
        let mos: f64 = mos_raw.parse().map_err(|_| Error::Manifest {
            line,
            message: format!("mos value '{mos_raw}' is not a number"),
        })?;
        if !mos.is_finite() {
            return Err(Error::Manifest {
                line,
                message: format!("mos value '{mos_raw}' is not finite"),
            });
        }
        entries.push(ManifestEntry {
            ref_path: resolve(&ref_raw),
            dist_path: resolve(&dist_raw),
            mos,
            distortion_label: label,
        });
    }
    Ok(entries)
}
