//! Gaussian scale mixture modeling of subband coefficient neighborhoods.
//!
//! Each 3x3 neighborhood of a detail subband is treated as a zero-mean
//! Gaussian vector modulated by a scalar multiplier. The neighborhood
//! covariance and a Weibull fit to the per-neighborhood multiplier estimates
//! form the reduced-reference description of the subband.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::plane::ImagePlane;
use crate::tetrolet::TetroletDecomposition;

/// Default covariance regularization strength.
pub const DEFAULT_EPSILON_REG: f64 = 1e-6;

/// Absolute floor for the regularization ridge, applied when the raw
/// covariance trace vanishes.
pub const EPSILON_REG_FLOOR: f64 = 1e-12;

/// Window size of the neighborhood model (3x3).
pub const NEIGHBORHOOD_DIM: usize = 9;

/// Minimum sample count accepted by the Weibull fit.
pub const MIN_WEIBULL_SAMPLES: usize = 30;

/// One 3x3 subband neighborhood: the nine coefficients in reading order and
/// the coordinate of the center coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborhoodVector {
    pub values: [f64; NEIGHBORHOOD_DIM],
    pub center: (usize, usize),
}

/// A symmetric covariance matrix. Construction symmetrizes exactly, so
/// `get(i, j) == get(j, i)` holds bitwise.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    m: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Builds from row-major entries, which must be finite and symmetric
    /// within `1e-12` (relative); the result is symmetrized exactly.
    pub fn from_entries(dim: usize, row_major: &[f64]) -> Result<CovarianceMatrix> {
        if row_major.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: row_major.len(),
            });
        }
        if row_major.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "covariance entries must be finite".into(),
            ));
        }
        let m = DMatrix::from_row_slice(dim, dim, row_major);
        for i in 0..dim {
            for j in i + 1..dim {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::InvalidParameter(format!(
                        "covariance is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        let mut sym = m.clone();
        for i in 0..dim {
            for j in i + 1..dim {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                sym[(i, j)] = avg;
                sym[(j, i)] = avg;
            }
        }
        Ok(CovarianceMatrix { m: sym })
    }

    /// Rebuilds from the row-major upper triangle (`dim * (dim + 1) / 2`
    /// entries); symmetric by construction.
    pub fn from_upper_triangle(dim: usize, upper: &[f64]) -> Result<CovarianceMatrix> {
        let expected = dim * (dim + 1) / 2;
        if upper.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: upper.len(),
            });
        }
        if upper.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "covariance entries must be finite".into(),
            ));
        }
        let mut m = DMatrix::zeros(dim, dim);
        let mut it = upper.iter();
        for i in 0..dim {
            for j in i..dim {
                let v = *it.next().unwrap();
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(CovarianceMatrix { m })
    }

    pub(crate) fn from_dmatrix(m: DMatrix<f64>) -> CovarianceMatrix {
        debug_assert_eq!(m.nrows(), m.ncols());
        CovarianceMatrix { m }
    }

    pub(crate) fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// Row-major upper triangle, the serialized form.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let dim = self.dim();
        let mut out = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in i..dim {
                out.push(self.m[(i, j)]);
            }
        }
        out
    }

    pub fn is_positive_definite(&self) -> bool {
        self.m.clone().cholesky().is_some()
    }

    pub(crate) fn cholesky_l(&self, context: &'static str) -> Result<DMatrix<f64>> {
        self.m
            .clone()
            .cholesky()
            .map(|c| c.l())
            .ok_or(Error::NotPositiveDefinite { context })
    }
}

/// Weibull shape/scale parameters; both strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullParams {
    pub shape: f64,
    pub scale: f64,
}

/// Reduced-reference description of one detail subband.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandFeatures {
    /// Decomposition level, 1-based (1 = finest).
    pub scale: u8,
    /// Detail orientation within the level, 1-based.
    pub orientation: u8,
    pub covariance: CovarianceMatrix,
    pub weibull: WeibullParams,
    /// Fraction of neighborhoods whose multiplier was exactly zero and was
    /// therefore excluded from the Weibull fit.
    pub dropped_zero_fraction: f64,
}

/// The complete reduced-reference feature set of one image: one
/// [`SubbandFeatures`] per detail subband, in canonical order (scale
/// ascending, orientation ascending within scale).
#[derive(Debug, Clone, PartialEq)]
pub struct RrFeatureSet {
    pub source_id: String,
    /// Analyzed plane dimensions (after cropping).
    pub width: usize,
    pub height: usize,
    pub levels: usize,
    pub features: Vec<SubbandFeatures>,
}

/// Collects every complete 3x3 neighborhood of a subband (centers away from
/// the border), each flattened in reading order.
pub fn extract_neighborhoods(plane: &ImagePlane) -> Result<Vec<NeighborhoodVector>> {
    if plane.width() < 3 || plane.height() < 3 {
        return Err(Error::SubbandTooSmall {
            width: plane.width(),
            height: plane.height(),
        });
    }
    let mut out = Vec::with_capacity((plane.width() - 2) * (plane.height() - 2));
    for row in 1..plane.height() - 1 {
        for col in 1..plane.width() - 1 {
            let mut values = [0.0; NEIGHBORHOOD_DIM];
            let mut n = 0;
            for dr in 0..3 {
                for dc in 0..3 {
                    values[n] = plane.get(row - 1 + dr, col - 1 + dc);
                    n += 1;
                }
            }
            out.push(NeighborhoodVector {
                values,
                center: (row, col),
            });
        }
    }
    Ok(out)
}

/// Sample covariance (mean removed, `n - 1` divisor) of the neighborhood
/// vectors, with a diagonal ridge `max(eps * tr / dim, 1e-12)` that keeps the
/// result positive definite even for rank-deficient samples.
pub fn estimate_covariance(
    vectors: &[NeighborhoodVector],
    epsilon_reg: f64,
) -> Result<CovarianceMatrix> {
    if vectors.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: vectors.len(),
            context: "covariance estimation",
        });
    }
    if !epsilon_reg.is_finite() || epsilon_reg < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "regularization strength must be finite and nonnegative, got {epsilon_reg}"
        )));
    }
    let n = vectors.len();
    let dim = NEIGHBORHOOD_DIM;
    let mut mean = [0.0f64; NEIGHBORHOOD_DIM];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(&v.values) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov: DMatrix<f64> = DMatrix::zeros(dim, dim);
    for v in vectors {
        let mut dev = [0.0f64; NEIGHBORHOOD_DIM];
        for ((d, x), m) in dev.iter_mut().zip(&v.values).zip(&mean) {
            *d = x - m;
        }
        for i in 0..dim {
            for j in i..dim {
                cov[(i, j)] += dev[i] * dev[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..dim {
        for j in i..dim {
            cov[(i, j)] /= denom;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    let ridge = (epsilon_reg * cov.trace() / dim as f64).max(EPSILON_REG_FLOOR);
    for i in 0..dim {
        cov[(i, i)] += ridge;
    }
    Ok(CovarianceMatrix::from_dmatrix(cov))
}

fn forward_substitute(l: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let dim = y.len();
    let mut z = vec![0.0f64; dim];
    for i in 0..dim {
        let mut s = y[i];
        for j in 0..i {
            s -= l[(i, j)] * z[j];
        }
        z[i] = s / l[(i, i)];
    }
    z
}

fn multiplier_from_l(l: &DMatrix<f64>, y: &[f64]) -> f64 {
    let z = forward_substitute(l, y);
    (z.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).sqrt()
}

/// Maximum-likelihood multiplier of one neighborhood under covariance `m`:
/// `sqrt(y' M^-1 y / N)`, computed through the Cholesky factor. Zero exactly
/// when `y` is the zero vector.
pub fn estimate_multiplier(y: &[f64], m: &CovarianceMatrix) -> Result<f64> {
    if y.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: y.len(),
        });
    }
    let l = m.cholesky_l("multiplier covariance")?;
    Ok(multiplier_from_l(&l, y))
}

/// Maximum-likelihood Weibull fit by Newton iteration on the profile score
///
/// ```text
/// g(k) = 1/k + mean(ln x) - sum(x^k ln x) / sum(x^k) = 0,
/// lambda = (mean(x^k))^(1/k),
/// ```
///
/// initialized from the log-sample moment `k0 = pi / (sqrt(6) * std(ln x))`.
/// Samples are scale-normalized by their mean first; the shape estimate is
/// scale-invariant, so only the scale estimate is mapped back.
///
/// Requires at least 30 strictly positive samples that are not all equal
/// (zeros must be dropped by the caller); converges when the shape step falls
/// below `1e-8`, failing after 200 iterations otherwise.
pub fn fit_weibull(samples: &[f64]) -> Result<WeibullParams> {
    let n = samples.len();
    if n < MIN_WEIBULL_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_WEIBULL_SAMPLES,
            got: n,
            context: "weibull fit",
        });
    }
    if samples.iter().any(|&x| !x.is_finite() || x <= 0.0) {
        return Err(Error::InvalidParameter(
            "weibull samples must be finite and strictly positive".into(),
        ));
    }
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Err(Error::Degenerate(
            "weibull samples are all equal; the fit has no solution".into(),
        ));
    }

    let mean = samples.iter().sum::<f64>() / n as f64;
    let logs: Vec<f64> = samples.iter().map(|&x| (x / mean).ln()).collect();
    let mean_log = logs.iter().sum::<f64>() / n as f64;
    let var_log = logs.iter().map(|l| (l - mean_log).powi(2)).sum::<f64>() / n as f64;
    let mut k = std::f64::consts::PI / (6.0f64.sqrt() * var_log.sqrt());

    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..200 {
        iterations += 1;
        let (mut s0, mut s1, mut s2) = (0.0f64, 0.0f64, 0.0f64);
        for &l in &logs {
            let e = (k * l).exp();
            s0 += e;
            s1 += e * l;
            s2 += e * l * l;
        }
        let g = 1.0 / k + mean_log - s1 / s0;
        let g_prime = -1.0 / (k * k) - (s2 * s0 - s1 * s1) / (s0 * s0);
        let next = k - g / g_prime;
        if !next.is_finite() {
            return Err(Error::NonConvergence {
                what: "weibull shape",
                iterations,
            });
        }
        let next = if next <= 0.0 { k / 2.0 } else { next };
        let step = (next - k).abs();
        k = next;
        if step < 1e-8 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            what: "weibull shape",
            iterations,
        });
    }

    let s0 = logs.iter().map(|&l| (k * l).exp()).sum::<f64>();
    let scale = (s0 / n as f64).powf(1.0 / k) * mean;
    if !k.is_finite() || !scale.is_finite() || k <= 0.0 || scale <= 0.0 {
        return Err(Error::Degenerate(format!(
            "weibull fit produced invalid parameters (shape {k}, scale {scale})"
        )));
    }
    Ok(WeibullParams { shape: k, scale })
}

struct SubbandModel {
    covariance: CovarianceMatrix,
    weibull: WeibullParams,
    dropped_zero_fraction: f64,
}

fn model_subband(plane: &ImagePlane, epsilon_reg: f64) -> Result<SubbandModel> {
    let neighborhoods = extract_neighborhoods(plane)?;
    let covariance = estimate_covariance(&neighborhoods, epsilon_reg)?;
    let l = covariance.cholesky_l("subband covariance")?;
    let multipliers: Vec<f64> = neighborhoods
        .iter()
        .map(|v| multiplier_from_l(&l, &v.values))
        .collect();
    let total = multipliers.len();
    let kept: Vec<f64> = multipliers.into_iter().filter(|&x| x > 0.0).collect();
    let dropped_zero_fraction = (total - kept.len()) as f64 / total as f64;
    let weibull = fit_weibull(&kept)?;
    Ok(SubbandModel {
        covariance,
        weibull,
        dropped_zero_fraction,
    })
}

/// Models every detail subband of a decomposition and assembles the
/// reduced-reference feature set, subbands in canonical order. Errors are
/// tagged with the subband they arose in. `source_id` is left empty for the
/// caller to fill.
pub fn extract_features(
    decomposition: &TetroletDecomposition,
    epsilon_reg: f64,
) -> Result<RrFeatureSet> {
    let (width, height) = decomposition.input_dims();
    let mut features = Vec::with_capacity(3 * decomposition.levels.len());
    for (level_index, level) in decomposition.levels.iter().enumerate() {
        let scale = (level_index + 1) as u8;
        for (orientation_index, plane) in level.details.iter().enumerate() {
            let orientation = (orientation_index + 1) as u8;
            let model = model_subband(plane, epsilon_reg).map_err(|e| Error::Subband {
                scale,
                orientation,
                source: Box::new(e),
            })?;
            features.push(SubbandFeatures {
                scale,
                orientation,
                covariance: model.covariance,
                weibull: model.weibull,
                dropped_zero_fraction: model.dropped_zero_fraction,
            });
        }
    }
    Ok(RrFeatureSet {
        source_id: String::new(),
        width,
        height,
        levels: decomposition.levels.len(),
        features,
    })
}
