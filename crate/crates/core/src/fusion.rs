//! Fusion of the spectral and spatial maps. Both maps are min-max normalized
//! first; the adaptive weights are proportional to each normalized map's
//! largest singular value.

use crate::error::{Error, Result};
use crate::raster::{minmax_normalize, DetectionMap};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// Blend weights; `a` multiplies the spectral map, `b` the spatial one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights {
    pub a: f64,
    pub b: f64,
}

impl FusionWeights {
    pub const AVERAGE: FusionWeights = FusionWeights { a: 0.5, b: 0.5 };

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || (a + b - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "fusion weights must be in [0, 1] and sum to 1, got ({a}, {b})"
            )));
        }
        Ok(Self { a, b })
    }
}

/// Largest singular value estimate from power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralNorm {
    pub value: f64,
    pub iterations: usize,
    /// False when `max_iter` was reached before the tolerance was met.
    pub converged: bool,
}

/// `y = R v` for the map viewed as a `height x width` matrix.
fn mul(map: &DetectionMap, v: &[f64]) -> Vec<f64> {
    let w = map.width();
    map.scores()
        .chunks_exact(w)
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// `z = R^T y`.
fn mul_t(map: &DetectionMap, y: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; map.width()];
    for (row, &yi) in map.scores().chunks_exact(map.width()).zip(y) {
        for (zj, &a) in z.iter_mut().zip(row) {
            *zj += a * yi;
        }
    }
    z
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Power iteration on `R^T R`, applied as `R` then `R^T`. Stops when the
/// Rayleigh estimate of the top eigenvalue changes by less than `tol`
/// relative, or after `max_iter` steps.
pub fn spectral_norm(map: &DetectionMap, tol: f64, max_iter: usize) -> Result<SpectralNorm> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if map.scores().iter().all(|&s| s == 0.0) {
        return Ok(SpectralNorm {
            value: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let w = map.width();
    let mut v = vec![1.0 / (w as f64).sqrt(); w];
    let mut lambda = 0.0;
    for it in 1..=max_iter.max(1) {
        let y = mul(map, &v);
        // |R v|^2 is the Rayleigh quotient of R^T R at unit v
        let estimate: f64 = y.iter().map(|x| x * x).sum();
        let z = mul_t(map, &y);
        let zn = l2(&z);
        if zn == 0.0 {
            // v is in the null space; the start vector was orthogonal to
            // every right singular vector with non-zero value.
            return Ok(SpectralNorm {
                value: estimate.sqrt(),
                iterations: it,
                converged: false,
            });
        }
        v = z.into_iter().map(|x| x / zn).collect();
        if it > 1 && (estimate - lambda).abs() <= tol * estimate {
            return Ok(SpectralNorm {
                value: estimate.sqrt(),
                iterations: it,
                converged: true,
            });
        }
        lambda = estimate;
    }
    let y = mul(map, &v);
    Ok(SpectralNorm {
        value: l2(&y),
        iterations: max_iter,
        converged: false,
    })
}

/// Adaptive weights `a = s1 / (s1 + s2)`, `b = s2 / (s1 + s2)` from the
/// spectral norms of the two maps as given (callers pass normalized maps).
pub fn adaptive_weights(r1: &DetectionMap, r2: &DetectionMap) -> Result<FusionWeights> {
    if !r1.same_shape(r2) {
        return Err(Error::ShapeMismatch("fusion maps differ in shape".into()));
    }
    let s1 = spectral_norm(r1, DEFAULT_TOL, DEFAULT_MAX_ITER)?.value;
    let s2 = spectral_norm(r2, DEFAULT_TOL, DEFAULT_MAX_ITER)?.value;
    let total = s1 + s2;
    if total.is_nan() || total <= 0.0 {
        return Err(Error::NoSignal);
    }
    let a = s1 / total;
    Ok(FusionWeights { a, b: 1.0 - a })
}

/// `a * norm(r1) + b * norm(r2)` element-wise, with `norm` the min-max
/// normalization.
pub fn fuse(r1: &DetectionMap, r2: &DetectionMap, weights: FusionWeights) -> Result<DetectionMap> {
    if !r1.same_shape(r2) {
        return Err(Error::ShapeMismatch("fusion maps differ in shape".into()));
    }
    let n1 = minmax_normalize(r1);
    let n2 = minmax_normalize(r2);
    let scores = n1
        .scores()
        .iter()
        .zip(n2.scores())
        .map(|(x, y)| weights.a * x + weights.b * y)
        .collect();
    DetectionMap::new(r1.height(), r1.width(), scores)
}

/// Average pooling: [`fuse`] with equal weights.
pub fn fuse_average(r1: &DetectionMap, r2: &DetectionMap) -> Result<DetectionMap> {
    fuse(r1, r2, FusionWeights::AVERAGE)
}

/// Normalizes both maps, derives adaptive weights from the normalized maps
/// and blends them.
pub fn fuse_adaptive(
    r1: &DetectionMap,
    r2: &DetectionMap,
) -> Result<(DetectionMap, FusionWeights)> {
    if !r1.same_shape(r2) {
        return Err(Error::ShapeMismatch("fusion maps differ in shape".into()));
    }
    let weights = adaptive_weights(&minmax_normalize(r1), &minmax_normalize(r2))?;
    Ok((fuse(r1, r2, weights)?, weights))
}
