//! Spectral branch: local median-mean line (LMML) projection of the window,
//! feature enhancement of the projected background ring, a local-covariance
//! Mahalanobis score, and saliency weighting from the inner neighbors.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{
    centered_covariance, dot, factor_with_retry, norm, relative_ridge, second_moment, Cholesky,
    Matrix,
};
use crate::raster::{DetectionMap, HyperCube, PixelCoord};
use crate::window::{extract_dual_window, idw_weights, DualWindowSpec, GridPoint, PaddedCube};

/// Which vector is scored against the local covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TestVectorMode {
    /// Testing spectrum minus the window mean.
    #[default]
    Centered,
    /// Testing spectrum minus its own LMML projection.
    Residual,
    /// The LMML projection of the testing spectrum.
    Projection,
}

/// Which spectra feed the saliency angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SaliencyInput {
    #[default]
    Original,
    Projected,
}

/// How the enhanced ring samples are turned into a covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceMode {
    #[default]
    Centered,
    SecondMoment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParams {
    pub window: DualWindowSpec,
    /// Position attenuation constant in the saliency distance.
    pub c: f64,
    /// Diagonal loading relative to `trace / bands`.
    pub ridge: f64,
    pub clamp_eta: bool,
    pub test_vector_mode: TestVectorMode,
    pub saliency_input: SaliencyInput,
    pub covariance_mode: CovarianceMode,
}

impl SpectralParams {
    pub fn new(window: DualWindowSpec) -> Self {
        Self {
            window,
            c: 1.0,
            ridge: 1e-6,
            clamp_eta: true,
            test_vector_mode: TestVectorMode::default(),
            saliency_input: SaliencyInput::default(),
            covariance_mode: CovarianceMode::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "saliency constant must be positive, got {}",
                self.c
            )));
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ridge must be non-negative, got {}",
                self.ridge
            )));
        }
        Ok(())
    }
}

impl Default for SpectralParams {
    fn default() -> Self {
        Self::new(DualWindowSpec::new(5, 3).expect("5/3 is a valid window"))
    }
}

/// Median and mean spectra of a window and the squared length of the line
/// between them.
#[derive(Debug, Clone, PartialEq)]
pub struct LmmlFrame {
    pub median: Vec<f64>,
    pub mean: Vec<f64>,
    pub denom: f64,
}

impl LmmlFrame {
    /// Per-band median and mean over `pixels`. An even count uses the
    /// average of the two middle values.
    pub fn from_pixels(pixels: &[&[f64]]) -> Result<Self> {
        let first = pixels
            .first()
            .ok_or_else(|| Error::InvalidParameter("LMML frame needs at least one pixel".into()))?;
        let bands = first.len();
        if pixels.iter().any(|p| p.len() != bands) {
            return Err(Error::ShapeMismatch(
                "window spectra differ in length".into(),
            ));
        }
        let n = pixels.len();
        let mut column = vec![0.0; n];
        let mut median = Vec::with_capacity(bands);
        let mut mean = Vec::with_capacity(bands);
        for b in 0..bands {
            for (slot, p) in column.iter_mut().zip(pixels) {
                *slot = p[b];
            }
            let anchor = column[0];
            let shift: f64 = column.iter().map(|v| v - anchor).sum();
            mean.push(anchor + shift / n as f64);
            column.sort_unstable_by(f64::total_cmp);
            let med = if n % 2 == 1 {
                column[n / 2]
            } else {
                0.5 * (column[n / 2 - 1] + column[n / 2])
            };
            median.push(med);
        }
        Ok(Self::new(median, mean))
    }

    pub fn new(median: Vec<f64>, mean: Vec<f64>) -> Self {
        let denom = median
            .iter()
            .zip(&mean)
            .map(|(big_m, m)| (m - big_m) * (m - big_m))
            .sum();
        Self {
            median,
            mean,
            denom,
        }
    }

    pub fn bands(&self) -> usize {
        self.mean.len()
    }

    /// The median and mean coincide (up to `1e-12 * max(1, |mean|^2)`), so
    /// there is no line to project onto.
    pub fn is_degenerate(&self) -> bool {
        let scale = dot(&self.mean, &self.mean).max(1.0);
        self.denom < 1e-12 * scale
    }

    /// Position parameter and projection of a single spectrum.
    pub fn project(&self, x: &[f64], clamp: bool) -> (Vec<f64>, f64) {
        if self.is_degenerate() {
            return (self.mean.clone(), 1.0);
        }
        let num: f64 = x
            .iter()
            .zip(&self.median)
            .zip(&self.mean)
            .map(|((xi, big_m), m)| (xi - big_m) * (m - big_m))
            .sum();
        let mut eta = num / self.denom;
        if clamp {
            eta = eta.clamp(0.0, 1.0);
        }
        let proj = self
            .median
            .iter()
            .zip(&self.mean)
            .map(|(big_m, m)| (1.0 - eta) * big_m + eta * m)
            .collect();
        (proj, eta)
    }
}

/// Projects every pixel onto the median-mean line of `frame`.
pub fn lmml_project(
    pixels: &[&[f64]],
    frame: &LmmlFrame,
    clamp: bool,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let bands = frame.bands();
    if let Some(p) = pixels.iter().find(|p| p.len() != bands) {
        return Err(Error::ShapeMismatch(format!(
            "pixel has {} bands, frame has {bands}",
            p.len()
        )));
    }
    Ok(pixels.iter().map(|p| frame.project(p, clamp)).unzip())
}

/// Feature enhancement of the projected ring: each sample becomes
/// `(1 - exp(-|d| / 2)) * d` with `d = y_hat - w_s * x_hat_s`.
pub fn enhance_background(
    ring_projections: &[Vec<f64>],
    test_projection: &[f64],
    idw: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if ring_projections.len() != idw.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} ring samples but {} weights",
            ring_projections.len(),
            idw.len()
        )));
    }
    ring_projections
        .iter()
        .zip(idw)
        .map(|(xs, &w)| {
            if xs.len() != test_projection.len() {
                return Err(Error::ShapeMismatch(
                    "ring sample and testing pixel differ in band count".into(),
                ));
            }
            let diff: Vec<f64> = test_projection
                .iter()
                .zip(xs)
                .map(|(y, x)| y - x * w)
                .collect();
            let gain = 1.0 - (-0.5 * norm(&diff)).exp();
            Ok(diff.into_iter().map(|d| gain * d).collect())
        })
        .collect()
}

fn covariance_with_ridge(enhanced: &[Vec<f64>], params: &SpectralParams) -> Result<(Matrix, f64)> {
    let first = enhanced
        .first()
        .ok_or_else(|| Error::InvalidParameter("covariance needs at least one sample".into()))?;
    let bands = first.len();
    if enhanced.iter().any(|v| v.len() != bands) {
        return Err(Error::ShapeMismatch(
            "enhanced samples differ in length".into(),
        ));
    }
    let samples = enhanced.iter().map(Vec::as_slice);
    let mut sigma = match params.covariance_mode {
        CovarianceMode::Centered => centered_covariance(samples, bands),
        CovarianceMode::SecondMoment => second_moment(samples, bands),
    };
    let ridge_eff = relative_ridge(&sigma, params.ridge);
    sigma.add_diagonal(ridge_eff);
    Ok((sigma, ridge_eff))
}

/// Covariance of the enhanced ring samples, diagonally loaded by
/// `ridge * trace / bands`.
pub fn local_covariance(enhanced: &[Vec<f64>], params: &SpectralParams) -> Result<Matrix> {
    covariance_with_ridge(enhanced, params).map(|(m, _)| m)
}

/// `v^T sigma^-1 v` via a Cholesky solve.
pub fn mahalanobis_score(test_vector: &[f64], sigma: &Matrix) -> Result<f64> {
    if test_vector.len() != sigma.dim() {
        return Err(Error::ShapeMismatch(format!(
            "vector has {} bands, covariance is {}x{}",
            test_vector.len(),
            sigma.dim(),
            sigma.dim()
        )));
    }
    Ok(Cholesky::factor(sigma)?.quadratic_form(test_vector))
}

/// Spectral angle in radians; zero when either spectrum has zero norm.
pub fn spectral_angle(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0).acos()
}

/// Mean saliency distance `angle / (1 + c * position_distance)` between the
/// testing pixel and its inner neighbors; 1 when there are no neighbors.
pub fn saliency_weight<'a>(
    test: &[f64],
    test_pos: GridPoint,
    inner: impl IntoIterator<Item = (&'a [f64], GridPoint)>,
    c: f64,
) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (spectrum, pos) in inner {
        total += spectral_angle(spectrum, test) / (1.0 + c * pos.distance(&test_pos));
        count += 1;
    }
    if count == 0 {
        1.0
    } else {
        total / count as f64
    }
}

struct SpectralKernel<'a> {
    cube: PaddedCube,
    params: &'a SpectralParams,
    ring_idw: Vec<f64>,
}

impl SpectralKernel<'_> {
    fn score(&self, coord: PixelCoord) -> Result<f64> {
        let params = self.params;
        let view = extract_dual_window(&self.cube, coord, &params.window)?;

        let outer: Vec<&[f64]> = view.all_outer.iter().map(|p| p.spectrum).collect();
        let frame = LmmlFrame::from_pixels(&outer)?;

        let ring: Vec<&[f64]> = view.ring_pixels.iter().map(|p| p.spectrum).collect();
        let (ring_proj, _) = lmml_project(&ring, &frame, params.clamp_eta)?;
        let (center_proj, _) = frame.project(view.center, params.clamp_eta);

        let enhanced = enhance_background(&ring_proj, &center_proj, &self.ring_idw)?;
        let (sigma, ridge_eff) = covariance_with_ridge(&enhanced, params)?;

        let test: Vec<f64> = match params.test_vector_mode {
            TestVectorMode::Centered => view
                .center
                .iter()
                .zip(&frame.mean)
                .map(|(y, m)| y - m)
                .collect(),
            TestVectorMode::Residual => view
                .center
                .iter()
                .zip(&center_proj)
                .map(|(y, p)| y - p)
                .collect(),
            TestVectorMode::Projection => center_proj.clone(),
        };
        let r = factor_with_retry(&sigma, ridge_eff)?.quadratic_form(&test);

        let w_sal = match params.saliency_input {
            SaliencyInput::Original => saliency_weight(
                view.center,
                view.center_pos,
                view.inner_neighbors.iter().map(|p| (p.spectrum, p.pos)),
                params.c,
            ),
            SaliencyInput::Projected => {
                let projected: Vec<(Vec<f64>, GridPoint)> = view
                    .inner_neighbors
                    .iter()
                    .map(|p| (frame.project(p.spectrum, params.clamp_eta).0, p.pos))
                    .collect();
                saliency_weight(
                    &center_proj,
                    view.center_pos,
                    projected.iter().map(|(s, p)| (s.as_slice(), *p)),
                    params.c,
                )
            }
        };
        Ok(r * w_sal)
    }
}

/// Ring offsets of a dual window in row-major order, matching
/// [`extract_dual_window`].
pub(crate) fn ring_positions(spec: &DualWindowSpec) -> Vec<GridPoint> {
    let ro = spec.outer_radius() as isize;
    let ri = spec.inner_radius() as isize;
    let mut out = Vec::with_capacity(spec.ring_len());
    for dr in -ro..=ro {
        for dc in -ro..=ro {
            if dr.abs() > ri || dc.abs() > ri {
                out.push(GridPoint::new(dr, dc));
            }
        }
    }
    out
}

/// Spectral detection map: per pixel, Mahalanobis score of the chosen test
/// vector under the enhanced ring covariance, times the saliency weight.
pub fn spectral_map(cube: &HyperCube, params: &SpectralParams) -> Result<DetectionMap> {
    params.validate()?;
    let (h, w) = (cube.height(), cube.width());
    // IDW depends only on window offsets, so it is shared by every pixel.
    let ring_idw = idw_weights(GridPoint::new(0, 0), &ring_positions(&params.window))?;
    let kernel = SpectralKernel {
        cube: PaddedCube::new(cube, params.window.outer_radius()),
        params,
        ring_idw,
    };
    let scores = (0..h * w)
        .into_par_iter()
        .map(|p| kernel.score(PixelCoord::new(p / w, p % w)))
        .collect::<Result<Vec<f64>>>()?;
    DetectionMap::new(h, w, scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_endpoints() {
        let frame = LmmlFrame::new(vec![1.0, 2.0, 0.5], vec![2.0, 1.0, 1.5]);
        let (p, eta) = frame.project(&[2.0, 1.0, 1.5], true);
        assert_eq!(eta, 1.0);
        assert_eq!(p, frame.mean);
        let (p, eta) = frame.project(&[1.0, 2.0, 0.5], true);
        assert_eq!(eta, 0.0);
        assert_eq!(p, frame.median);
    }

    #[test]
    fn eta_clamps_beyond_mean() {
        let frame = LmmlFrame::new(vec![0.0], vec![1.0]);
        assert_eq!(frame.project(&[3.0], true).1, 1.0);
        assert_eq!(frame.project(&[3.0], false).1, 3.0);
        assert_eq!(frame.project(&[-2.0], true).1, 0.0);
    }

    #[test]
    fn degenerate_line_collapses_to_mean() {
        let frame = LmmlFrame::new(vec![1.0, 1.0], vec![1.0, 1.0]);
        assert!(frame.is_degenerate());
        let (p, eta) = frame.project(&[5.0, -3.0], false);
        assert_eq!(eta, 1.0);
        assert_eq!(p, vec![1.0, 1.0]);
    }

    #[test]
    fn frame_median_and_mean() {
        let px: Vec<Vec<f64>> = vec![vec![1.0, 10.0], vec![2.0, 0.0], vec![9.0, 5.0]];
        let refs: Vec<&[f64]> = px.iter().map(Vec::as_slice).collect();
        let f = LmmlFrame::from_pixels(&refs).unwrap();
        assert_eq!(f.median, vec![2.0, 5.0]);
        assert_eq!(f.mean, vec![4.0, 5.0]);
        assert_eq!(f.denom, 4.0);
    }

    #[test]
    fn project_dimension_mismatch() {
        let frame = LmmlFrame::new(vec![0.0, 0.0], vec![1.0, 1.0]);
        let bad: [&[f64]; 1] = [&[1.0]];
        assert!(lmml_project(&bad, &frame, true).is_err());
    }

    #[test]
    fn enhancement_zero_when_matching() {
        let out = enhance_background(&[vec![2.0, 4.0]], &[1.0, 2.0], &[0.5]).unwrap();
        assert_eq!(out[0], vec![0.0, 0.0]);
    }

    #[test]
    fn enhancement_large_difference_passes_through() {
        let out = enhance_background(&[vec![0.0, 0.0]], &[60.0, 80.0], &[1.0]).unwrap();
        let gain = out[0][0] / 60.0;
        assert!(gain >= 1.0 - (-50.0f64).exp());
        assert!(gain <= 1.0);
    }

    #[test]
    fn enhancement_scalar_case() {
        let out = enhance_background(&[vec![0.0]], &[2.0], &[1.0]).unwrap();
        let expected = (1.0 - (-1.0f64).exp()) * 2.0;
        assert!((out[0][0] - expected).abs() < 1e-15);
        assert!((out[0][0] - 1.264241).abs() < 1e-6);
    }

    #[test]
    fn enhancement_length_mismatch() {
        assert!(enhance_background(&[vec![0.0]], &[2.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn covariance_identical_samples_is_ridge() {
        let params = SpectralParams::default();
        let samples = vec![vec![0.3, -0.2, 1.1]; 16];
        let sigma = local_covariance(&samples, &params).unwrap();
        let mut expected = Matrix::identity(3);
        expected.scale(params.ridge);
        assert_eq!(sigma, expected);
    }

    #[test]
    fn covariance_plus_minus_one() {
        let params = SpectralParams {
            ridge: 0.0,
            ..SpectralParams::default()
        };
        let sigma = local_covariance(&[vec![-1.0], vec![1.0]], &params).unwrap();
        assert_eq!(sigma.as_slice(), &[1.0]);
    }

    #[test]
    fn covariance_needs_samples() {
        assert!(local_covariance(&[], &SpectralParams::default()).is_err());
    }

    #[test]
    fn mahalanobis_basic() {
        let id = Matrix::identity(2);
        assert_eq!(mahalanobis_score(&[0.0, 0.0], &id).unwrap(), 0.0);
        assert_eq!(mahalanobis_score(&[3.0, 4.0], &id).unwrap(), 25.0);
        let bad = Matrix::from_rows(2, vec![1.0, 3.0, 3.0, 1.0]).unwrap();
        assert!(matches!(
            mahalanobis_score(&[1.0, 0.0], &bad),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn saliency_parallel_neighbors_is_zero() {
        let y = [1.0, 2.0, 3.0];
        let n1 = [2.0, 4.0, 6.0];
        let n2 = [0.5, 1.0, 1.5];
        let c = GridPoint::new(0, 0);
        let w = saliency_weight(
            &y,
            c,
            [
                (&n1[..], GridPoint::new(0, 1)),
                (&n2[..], GridPoint::new(1, 1)),
            ],
            1.0,
        );
        assert!(w.abs() < 1e-7);
    }

    #[test]
    fn saliency_orthogonal_neighbor() {
        let w = saliency_weight(
            &[1.0, 0.0],
            GridPoint::new(0, 0),
            [(&[0.0, 1.0][..], GridPoint::new(1, 0))],
            1.0,
        );
        assert!((w - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn saliency_without_neighbors_is_one() {
        let w = saliency_weight(&[1.0], GridPoint::new(0, 0), std::iter::empty(), 1.0);
        assert_eq!(w, 1.0);
    }

    #[test]
    fn saliency_zero_norm_neighbor_contributes_zero() {
        let w = saliency_weight(
            &[1.0, 0.0],
            GridPoint::new(0, 0),
            [(&[0.0, 0.0][..], GridPoint::new(0, 1))],
            1.0,
        );
        assert_eq!(w, 0.0);
    }

    #[test]
    fn constant_cube_scores_zero_in_centered_mode() {
        let cube = HyperCube::from_fn(7, 6, 3, |_, _, b| 0.5 + b as f64).unwrap();
        let map = spectral_map(&cube, &SpectralParams::default()).unwrap();
        assert!(map.scores().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn inexact_constant_cube_scores_zero() {
        let cube = HyperCube::from_fn(6, 6, 4, |_, _, b| 0.1 + 0.3 * b as f64).unwrap();
        let map = spectral_map(&cube, &SpectralParams::default()).unwrap();
        assert!(map.scores().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn constant_cube_scores_equal_in_every_mode() {
        let cube = HyperCube::from_fn(6, 6, 2, |_, _, b| 1.0 + b as f64).unwrap();
        for mode in [TestVectorMode::Residual, TestVectorMode::Projection] {
            let params = SpectralParams {
                test_vector_mode: mode,
                ..SpectralParams::default()
            };
            let map = spectral_map(&cube, &params).unwrap();
            let first = map.scores()[0];
            assert!(map.scores().iter().all(|&s| s == first));
        }
    }

    #[test]
    fn rejects_bad_params() {
        let cube = HyperCube::from_fn(6, 6, 2, |r, c, b| (r + c + b) as f64).unwrap();
        let params = SpectralParams {
            c: 0.0,
            ..SpectralParams::default()
        };
        assert!(spectral_map(&cube, &params).is_err());
        let params = SpectralParams {
            ridge: -1.0,
            ..SpectralParams::default()
        };
        assert!(spectral_map(&cube, &params).is_err());
    }

    #[test]
    fn ring_positions_match_window_order() {
        let spec = DualWindowSpec::new(5, 3).unwrap();
        let cube = PaddedCube::new(
            &HyperCube::from_fn(5, 5, 1, |r, c, _| (r * 5 + c) as f64).unwrap(),
            2,
        );
        let view = extract_dual_window(&cube, PixelCoord::new(2, 2), &spec).unwrap();
        let offsets: Vec<GridPoint> = view
            .ring_pixels
            .iter()
            .map(|p| GridPoint::new(p.pos.row - 2, p.pos.col - 2))
            .collect();
        assert_eq!(offsets, ring_positions(&spec));
    }
}
