//! Closed-form divergences between subband models and the pooled quality score.
//!
//! A subband's distance is the Kullback-Leibler divergence of the joint
//! (multiplier, Gaussian vector) model, which separates into a Weibull term
//! for the multiplier and a zero-mean Gaussian term for the covariance. The
//! per-subband distances are pooled logarithmically into one quality number.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::gsm::{CovarianceMatrix, RrFeatureSet, SubbandFeatures, WeibullParams};

const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

/// Default pooling constant.
pub const DEFAULT_D0: f64 = 0.1;

/// Divergence of one subband's model pair, tagged with its identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubbandDistance {
    pub scale: u8,
    pub orientation: u8,
    pub value: f64,
}

/// Pooled quality score; `0` means indistinguishable models, larger is worse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityScore {
    pub value: f64,
}

fn validate_weibull(p: &WeibullParams, which: &str) -> Result<()> {
    if !(p.shape.is_finite() && p.scale.is_finite() && p.shape > 0.0 && p.scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "{which} weibull parameters must be finite and positive (shape {}, scale {})",
            p.shape, p.scale
        )));
    }
    Ok(())
}

/// Kullback-Leibler divergence between two Weibull laws:
///
/// ```text
/// KL = ln(k1 / l1^k1) - ln(k2 / l2^k2) + (k1 - k2) (ln l1 - g / k1)
///      + (l1 / l2)^k2 Gamma(k2 / k1 + 1) - 1
/// ```
///
/// with `g` the Euler-Mascheroni constant. Identical parameters return
/// exactly zero; the mixed power/Gamma term is evaluated in log space so
/// extreme parameter ratios stay finite.
pub fn kld_weibull(p1: &WeibullParams, p2: &WeibullParams) -> Result<f64> {
    validate_weibull(p1, "first")?;
    validate_weibull(p2, "second")?;
    if p1 == p2 {
        return Ok(0.0);
    }
    let (k1, l1) = (p1.shape, p1.scale);
    let (k2, l2) = (p2.shape, p2.scale);
    let log_term = k1.ln() - k1 * l1.ln() - (k2.ln() - k2 * l2.ln());
    let mean_log_term = (k1 - k2) * (l1.ln() - EULER_MASCHERONI / k1);
    let moment_term = (k2 * (l1.ln() - l2.ln()) + ln_gamma(k2 / k1 + 1.0)).exp();
    Ok(log_term + mean_log_term + moment_term - 1.0)
}

fn ln_det_from_l(l: &nalgebra::DMatrix<f64>) -> f64 {
    2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Kullback-Leibler divergence between two zero-mean Gaussians:
/// `0.5 * (tr(M2^-1 M1) + ln|M2| - ln|M1| - N)`, computed through Cholesky
/// factorizations (no explicit inverses or determinant products). Identical
/// matrices return exactly zero; non-positive-definite input is rejected.
pub fn kld_gaussian_zero_mean(m1: &CovarianceMatrix, m2: &CovarianceMatrix) -> Result<f64> {
    if m1.dim() != m2.dim() {
        return Err(Error::DimensionMismatch {
            expected: m1.dim(),
            got: m2.dim(),
        });
    }
    if m1 == m2 {
        return Ok(0.0);
    }
    let l1 = m1.cholesky_l("first covariance")?;
    let chol2 = m2
        .matrix()
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite {
            context: "second covariance",
        })?;
    let trace = chol2.solve(m1.matrix()).trace();
    let ln_det1 = ln_det_from_l(&l1);
    let ln_det2 = ln_det_from_l(&chol2.l());
    Ok(0.5 * (trace + ln_det2 - ln_det1 - m1.dim() as f64))
}

/// Joint divergence of one subband: Weibull term plus Gaussian term. The two
/// feature sets must describe the same subband; a non-finite sum is rejected.
pub fn kld_joint(reference: &SubbandFeatures, distorted: &SubbandFeatures) -> Result<SubbandDistance> {
    if reference.scale != distorted.scale || reference.orientation != distorted.orientation {
        return Err(Error::SubbandIdentityMismatch {
            expected_scale: reference.scale,
            expected_orientation: reference.orientation,
            got_scale: distorted.scale,
            got_orientation: distorted.orientation,
        });
    }
    let value = kld_weibull(&reference.weibull, &distorted.weibull)?
        + kld_gaussian_zero_mean(&reference.covariance, &distorted.covariance)?;
    if !value.is_finite() {
        return Err(Error::NonFiniteDistance {
            scale: reference.scale,
            orientation: reference.orientation,
        });
    }
    Ok(SubbandDistance {
        scale: reference.scale,
        orientation: reference.orientation,
        value,
    })
}

/// Per-subband divergences of two aligned feature sets.
pub fn subband_distances(
    reference: &RrFeatureSet,
    distorted: &RrFeatureSet,
) -> Result<Vec<SubbandDistance>> {
    if reference.features.len() != distorted.features.len() {
        return Err(Error::InvalidParameter(format!(
            "feature sets disagree: reference has {} subbands, distorted has {}",
            reference.features.len(),
            distorted.features.len()
        )));
    }
    reference
        .features
        .iter()
        .zip(&distorted.features)
        .map(|(r, d)| kld_joint(r, d))
        .collect()
}

/// Logarithmic pooling of the per-subband distances:
/// `Q = log2(1 + sum(D) / d0)`. Zero exactly when every distance is zero.
pub fn pool(distances: &[SubbandDistance], d0: f64) -> Result<QualityScore> {
    if distances.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot pool an empty distance list".into(),
        ));
    }
    if !d0.is_finite() || d0 <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "pooling constant must be finite and positive, got {d0}"
        )));
    }
    for d in distances {
        if !d.value.is_finite() {
            return Err(Error::NonFiniteDistance {
                scale: d.scale,
                orientation: d.orientation,
            });
        }
    }
    let sum: f64 = distances.iter().map(|d| d.value).sum();
    Ok(QualityScore {
        value: (1.0 + sum / d0).log2(),
    })
}
