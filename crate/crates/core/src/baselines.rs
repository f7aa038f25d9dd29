//! Global and local RX detectors.

use rayon::prelude::*;

use crate::error::Result;
use crate::linalg::{
    centered_covariance, factor_with_retry, mean_vector, relative_ridge, Cholesky,
};
use crate::raster::{DetectionMap, HyperCube, PixelCoord};
use crate::window::{extract_dual_window, DualWindowSpec, PaddedCube};

/// Global RX: Mahalanobis distance of every pixel from the image mean under
/// the image covariance, diagonally loaded by `ridge * trace / bands`.
pub fn grx_map(cube: &HyperCube, ridge: f64) -> Result<DetectionMap> {
    let bands = cube.bands();
    let pixels = cube.to_pixel_major();
    let spectra = || pixels.chunks_exact(bands);
    let mean = mean_vector(spectra(), bands);
    let mut sigma = centered_covariance(spectra(), bands);
    let ridge_eff = relative_ridge(&sigma, ridge);
    sigma.add_diagonal(ridge_eff);
    let chol = Cholesky::factor(&sigma)?;

    let scores = pixels
        .par_chunks_exact(bands)
        .map(|x| {
            let d: Vec<f64> = x.iter().zip(&mean).map(|(a, m)| a - m).collect();
            chol.quadratic_form(&d)
        })
        .collect();
    DetectionMap::new(cube.height(), cube.width(), scores)
}

fn lrx_pixel(
    cube: &PaddedCube,
    coord: PixelCoord,
    spec: &DualWindowSpec,
    ridge: f64,
) -> Result<f64> {
    let view = extract_dual_window(cube, coord, spec)?;
    let bands = cube.bands();
    let ring = view.ring_pixels.iter().map(|p| p.spectrum);
    let mean = mean_vector(ring.clone(), bands);
    let mut sigma = centered_covariance(ring, bands);
    let ridge_eff = relative_ridge(&sigma, ridge);
    sigma.add_diagonal(ridge_eff);
    let d: Vec<f64> = view.center.iter().zip(&mean).map(|(y, m)| y - m).collect();
    Ok(factor_with_retry(&sigma, ridge_eff)?.quadratic_form(&d))
}

/// Local RX: background mean and covariance from the dual-window ring.
pub fn lrx_map(cube: &HyperCube, spec: &DualWindowSpec, ridge: f64) -> Result<DetectionMap> {
    let (h, w) = (cube.height(), cube.width());
    let padded = PaddedCube::new(cube, spec.outer_radius());
    let scores = (0..h * w)
        .into_par_iter()
        .map(|p| lrx_pixel(&padded, PixelCoord::new(p / w, p % w), spec, ridge))
        .collect::<Result<Vec<f64>>>()?;
    DetectionMap::new(h, w, scores)
}
