//! Reduced-reference image quality assessment in the tetrolet domain.
//!
//! The pipeline: decompose an image with an adaptive tetromino-block Haar
//! transform, model each detail subband's coefficient neighborhoods as a
//! Gaussian scale mixture (Gaussian vector modulated by a Weibull-distributed
//! multiplier), keep only the fitted Weibull parameters and the neighborhood
//! covariance as reduced-reference features, and score a distorted image by
//! the summed Kullback-Leibler divergences between its subband models and the
//! reference's, pooled into a single quality number.

pub mod dataset_io;
pub mod divergence;
pub mod error;
pub mod eval;
pub mod gsm;
pub mod plane;
pub mod synth;
pub mod tetrolet;
pub mod tiling;

pub use error::{Error, Result};
pub use plane::ImagePlane;

/// Crops, decomposes, and models an image in one step: the standard path from
/// a loaded plane to its reduced-reference feature set.
pub fn extract_features_from_plane(
    plane: &ImagePlane,
    source_id: &str,
    levels: usize,
    epsilon_reg: f64,
) -> Result<gsm::RrFeatureSet> {
    let cropped = dataset_io::crop_to_transform_size(plane, levels)?;
    let decomposition = tetrolet::forward(&cropped.plane, levels)?;
    let mut features = gsm::extract_features(&decomposition, epsilon_reg)?;
    features.source_id = source_id.to_string();
    Ok(features)
}

/// Scores a distorted feature set against a reference feature set: per-subband
/// divergences plus the pooled quality number.
pub fn quality_score(
    reference: &gsm::RrFeatureSet,
    distorted: &gsm::RrFeatureSet,
    d0: f64,
) -> Result<(divergence::QualityScore, Vec<divergence::SubbandDistance>)> {
    let distances = divergence::subband_distances(reference, distorted)?;
    let q = divergence::pool(&distances, d0)?;
    Ok((q, distances))
}
