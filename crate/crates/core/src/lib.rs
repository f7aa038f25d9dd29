//! Spectral-spatial fusion anomaly detection (SSFAD) for hyperspectral
//! images.
//!
//! The detector has two branches. The spectral branch projects each local
//! window onto its median-mean line, enhances the projected background ring,
//! and scores the testing pixel with a local Mahalanobis distance weighted by
//! spectral saliency. The spatial branch scores how poorly the patch around
//! a pixel is matched by the patches that ring it. The two maps are min-max
//! normalized and blended with weights proportional to their spectral norms.
//!
//! Global and local RX baselines, a deterministic scene generator and
//! ROC/AUC evaluation are included for comparison runs.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod io;
pub mod linalg;
pub mod raster;
pub mod spatial;
pub mod spectral;
pub mod synth;
pub mod window;

pub use error::{Error, Result};
pub use raster::{
    minmax_normalize, pad_symmetric, DetectionMap, GroundTruthMask, HyperCube, PixelCoord,
};
pub use window::DualWindowSpec;

use fusion::FusionWeights;
use spatial::SpatialParams;
use spectral::SpectralParams;

/// How the two branch maps are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionStrategy {
    #[default]
    Adaptive,
    Average,
}

/// Full detector output: both branch maps, the fused map and the weights.
#[derive(Debug, Clone)]
pub struct SsfadOutput {
    pub spectral: DetectionMap,
    pub spatial: DetectionMap,
    pub fused: DetectionMap,
    pub weights: FusionWeights,
}

/// Runs both branches and fuses them.
pub fn ssfad(
    cube: &HyperCube,
    spectral_params: &SpectralParams,
    spatial_params: &SpatialParams,
    strategy: FusionStrategy,
) -> Result<SsfadOutput> {
    let spectral = spectral::spectral_map(cube, spectral_params)?;
    let spatial = spatial::spatial_map(cube, spatial_params)?;
    let (fused, weights) = match strategy {
        FusionStrategy::Adaptive => fusion::fuse_adaptive(&spectral, &spatial)?,
        FusionStrategy::Average => (
            fusion::fuse_average(&spectral, &spatial)?,
            FusionWeights::AVERAGE,
        ),
    };
    Ok(SsfadOutput {
        spectral,
        spatial,
        fused,
        weights,
    })
}
