//! Spatial branch: each pixel is scored by how poorly its surrounding patch
//! is matched by the best of the 8*omega equally sized patches ringing it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{DetectionMap, HyperCube, PixelCoord};
use crate::window::{GridPoint, PaddedCube};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpatialParams {
    omega: usize,
}

impl SpatialParams {
    /// `omega` is the odd side length of the patch.
    pub fn new(omega: usize) -> Result<Self> {
        if omega == 0 || omega.is_multiple_of(2) {
            return Err(Error::InvalidWindow(format!(
                "spatial patch size must be odd and >= 1, got {omega}"
            )));
        }
        Ok(Self { omega })
    }

    pub fn omega(&self) -> usize {
        self.omega
    }
}

/// The `8 * omega` offsets at Chebyshev distance `omega`, clockwise from the
/// top-left corner `(-omega, -omega)`.
pub fn ring_window_offsets(omega: usize) -> Vec<(isize, isize)> {
    let w = omega as isize;
    let mut out = Vec::with_capacity(8 * omega);
    for c in -w..w {
        out.push((-w, c));
    }
    for r in -w..w {
        out.push((r, w));
    }
    for c in (-w + 1..=w).rev() {
        out.push((w, c));
    }
    for r in (-w + 1..=w).rev() {
        out.push((r, -w));
    }
    out
}

/// An `omega x omega x bands` block, stored cell-major (row, col, band).
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    side: usize,
    bands: usize,
    data: Vec<f64>,
}

impl Patch {
    pub fn new(side: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != side * side * bands {
            return Err(Error::ShapeMismatch(format!(
                "{side}x{side}x{bands} patch needs {} values, got {}",
                side * side * bands,
                data.len()
            )));
        }
        Ok(Self { side, bands, data })
    }

    /// Patch of side `side` centered on `center` (unpadded frame).
    pub fn extract(cube: &PaddedCube, center: GridPoint, side: usize) -> Self {
        let half = (side / 2) as isize;
        let mut data = Vec::with_capacity(side * side * cube.bands());
        for dr in -half..=half {
            for dc in -half..=half {
                data.extend_from_slice(cube.spectrum(center.row + dr, center.col + dc));
            }
        }
        Self {
            side,
            bands: cube.bands(),
            data,
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// Squared Frobenius norm of the difference, summed over all bands.
pub fn patch_dissimilarity(a: &Patch, b: &Patch) -> Result<f64> {
    if a.side != b.side || a.bands != b.bands {
        return Err(Error::ShapeMismatch(format!(
            "patches are {0}x{0}x{1} and {2}x{2}x{3}",
            a.side, a.bands, b.side, b.bands
        )));
    }
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum())
}

fn pixel_score(
    cube: &PaddedCube,
    coord: PixelCoord,
    omega: usize,
    offsets: &[(isize, isize)],
) -> Result<f64> {
    let center = GridPoint::from(coord);
    let own = Patch::extract(cube, center, omega);
    let mut best = f64::INFINITY;
    for &(dr, dc) in offsets {
        let other = Patch::extract(cube, center.offset(dr, dc), omega);
        best = best.min(patch_dissimilarity(&own, &other)?);
    }
    Ok(best)
}

/// Spatial detection map: minimum patch dissimilarity over the ring.
pub fn spatial_map(cube: &HyperCube, params: &SpatialParams) -> Result<DetectionMap> {
    let omega = params.omega();
    let (h, w) = (cube.height(), cube.width());
    let padded = PaddedCube::new(cube, 2 * omega);
    let offsets = ring_window_offsets(omega);
    let scores = (0..h * w)
        .into_par_iter()
        .map(|p| pixel_score(&padded, PixelCoord::new(p / w, p % w), omega, &offsets))
        .collect::<Result<Vec<f64>>>()?;
    DetectionMap::new(h, w, scores)
}
