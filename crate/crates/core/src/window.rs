//! Dual-window geometry around a testing pixel: the inner (guard) neighbors,
//! the background ring between the inner and outer windows, and
//! inverse-distance weights over window members.

use crate::error::{Error, Result};
use crate::raster::{pad_symmetric, HyperCube, PixelCoord};

/// Concentric outer/inner square windows, both odd-sized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DualWindowSpec {
    omega_out: usize,
    omega_in: usize,
}

impl DualWindowSpec {
    pub fn new(omega_out: usize, omega_in: usize) -> Result<Self> {
        if omega_out < 3 || omega_out.is_multiple_of(2) {
            return Err(Error::InvalidWindow(format!(
                "outer window must be odd and >= 3, got {omega_out}"
            )));
        }
        if omega_in < 1 || omega_in.is_multiple_of(2) {
            return Err(Error::InvalidWindow(format!(
                "inner window must be odd and >= 1, got {omega_in}"
            )));
        }
        if omega_in >= omega_out {
            return Err(Error::InvalidWindow(format!(
                "outer window {omega_out} must exceed inner window {omega_in}"
            )));
        }
        Ok(Self {
            omega_out,
            omega_in,
        })
    }

    pub fn omega_out(&self) -> usize {
        self.omega_out
    }

    pub fn omega_in(&self) -> usize {
        self.omega_in
    }

    pub fn outer_radius(&self) -> usize {
        (self.omega_out - 1) / 2
    }

    pub fn inner_radius(&self) -> usize {
        (self.omega_in - 1) / 2
    }

    /// N: pixels in the outer window, center included.
    pub fn outer_len(&self) -> usize {
        self.omega_out * self.omega_out
    }

    /// S: pixels between the inner and outer windows.
    pub fn ring_len(&self) -> usize {
        self.omega_out * self.omega_out - self.omega_in * self.omega_in
    }

    /// M: inner-window pixels other than the center.
    pub fn inner_len(&self) -> usize {
        self.omega_in * self.omega_in - 1
    }
}

/// A grid position in the unpadded frame. Window members near the border
/// can sit at negative or past-the-edge positions; their spectra come from
/// the mirrored source pixel but their distances use this position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridPoint {
    pub row: isize,
    pub col: isize,
}

impl GridPoint {
    pub const fn new(row: isize, col: isize) -> Self {
        Self { row, col }
    }

    pub fn distance(&self, other: &GridPoint) -> f64 {
        let dr = (self.row - other.row) as f64;
        let dc = (self.col - other.col) as f64;
        (dr * dr + dc * dc).sqrt()
    }

    pub fn offset(&self, drow: isize, dcol: isize) -> GridPoint {
        GridPoint::new(self.row + drow, self.col + dcol)
    }
}

impl From<PixelCoord> for GridPoint {
    fn from(p: PixelCoord) -> Self {
        GridPoint::new(p.row as isize, p.col as isize)
    }
}

/// A cube padded by symmetric reflection and stored pixel-interleaved, so
/// window members can be borrowed as contiguous spectra.
#[derive(Debug, Clone)]
pub struct PaddedCube {
    data: Vec<f64>,
    height: usize,
    width: usize,
    bands: usize,
    radius: usize,
}

impl PaddedCube {
    pub fn new(cube: &HyperCube, radius: usize) -> Self {
        let padded = pad_symmetric(cube, radius);
        Self {
            data: padded.to_pixel_major(),
            height: cube.height(),
            width: cube.width(),
            bands: cube.bands(),
            radius,
        }
    }

    /// Height of the original (unpadded) cube.
    pub fn height(&self) -> usize {
        self.height
    }

    /// Width of the original (unpadded) cube.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Spectrum at an unpadded-frame position at most `radius` outside the
    /// original extent.
    #[inline]
    pub fn spectrum(&self, row: isize, col: isize) -> &[f64] {
        let r = (row + self.radius as isize) as usize;
        let c = (col + self.radius as isize) as usize;
        let pw = self.width + 2 * self.radius;
        let start = (r * pw + c) * self.bands;
        &self.data[start..start + self.bands]
    }

    #[inline]
    pub fn spectrum_at(&self, p: GridPoint) -> &[f64] {
        self.spectrum(p.row, p.col)
    }
}

/// A window member: its position and a borrowed spectrum.
#[derive(Debug, Clone, Copy)]
pub struct WindowPixel<'a> {
    pub pos: GridPoint,
    pub spectrum: &'a [f64],
}

/// Everything a dual-window detector needs about one testing pixel.
#[derive(Debug, Clone)]
pub struct WindowView<'a> {
    pub center_pos: GridPoint,
    pub center: &'a [f64],
    /// Inner-window pixels without the center (M of them), row-major.
    pub inner_neighbors: Vec<WindowPixel<'a>>,
    /// Outer-window pixels outside the inner window (S of them), row-major.
    pub ring_pixels: Vec<WindowPixel<'a>>,
    /// Every outer-window pixel including the center (N of them), row-major.
    pub all_outer: Vec<WindowPixel<'a>>,
}

/// Collects the dual window around `coord` from a padded cube.
pub fn extract_dual_window<'a>(
    cube: &'a PaddedCube,
    coord: PixelCoord,
    spec: &DualWindowSpec,
) -> Result<WindowView<'a>> {
    let ro = spec.outer_radius() as isize;
    let ri = spec.inner_radius() as isize;
    if cube.radius() < spec.outer_radius() {
        return Err(Error::InvalidWindow(format!(
            "cube padded by {} but window needs {}",
            cube.radius(),
            spec.outer_radius()
        )));
    }
    if coord.row >= cube.height() || coord.col >= cube.width() {
        return Err(Error::OutOfRange {
            row: coord.row,
            col: coord.col,
            height: cube.height(),
            width: cube.width(),
        });
    }

    let center_pos = GridPoint::from(coord);
    let mut inner_neighbors = Vec::with_capacity(spec.inner_len());
    let mut ring_pixels = Vec::with_capacity(spec.ring_len());
    let mut all_outer = Vec::with_capacity(spec.outer_len());
    for dr in -ro..=ro {
        for dc in -ro..=ro {
            let pos = center_pos.offset(dr, dc);
            let px = WindowPixel {
                pos,
                spectrum: cube.spectrum_at(pos),
            };
            all_outer.push(px);
            if dr.abs() > ri || dc.abs() > ri {
                ring_pixels.push(px);
            } else if dr != 0 || dc != 0 {
                inner_neighbors.push(px);
            }
        }
    }

    Ok(WindowView {
        center_pos,
        center: cube.spectrum_at(center_pos),
        inner_neighbors,
        ring_pixels,
        all_outer,
    })
}

/// Normalized inverse squared distance weights `h^-2 / sum(h^-2)`.
pub fn idw_weights(center: GridPoint, neighbors: &[GridPoint]) -> Result<Vec<f64>> {
    let mut inv = Vec::with_capacity(neighbors.len());
    for n in neighbors {
        let dr = (n.row - center.row) as f64;
        let dc = (n.col - center.col) as f64;
        let h2 = dr * dr + dc * dc;
        if h2 == 0.0 {
            return Err(Error::InvalidParameter(
                "inverse distance weight neighbor coincides with the center".into(),
            ));
        }
        inv.push(1.0 / h2);
    }
    let total: f64 = inv.iter().sum();
    Ok(inv.into_iter().map(|w| w / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn ramp_cube(h: usize, w: usize, b: usize) -> HyperCube {
        HyperCube::from_fn(h, w, b, |r, c, k| (r * 100 + c * 10 + k) as f64).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(DualWindowSpec::new(5, 3).is_ok());
        assert!(DualWindowSpec::new(3, 1).is_ok());
        assert!(DualWindowSpec::new(4, 1).is_err());
        assert!(DualWindowSpec::new(5, 2).is_err());
        assert!(DualWindowSpec::new(5, 5).is_err());
        assert!(DualWindowSpec::new(3, 5).is_err());
        assert!(DualWindowSpec::new(1, 1).is_err());
    }

    #[test]
    fn cardinalities_5_3() {
        let spec = DualWindowSpec::new(5, 3).unwrap();
        let cube = PaddedCube::new(&ramp_cube(6, 6, 2), 2);
        let view = extract_dual_window(&cube, PixelCoord::new(3, 3), &spec).unwrap();
        assert_eq!(view.all_outer.len(), 25);
        assert_eq!(view.ring_pixels.len(), 16);
        assert_eq!(view.inner_neighbors.len(), 8);
    }

    #[test]
    fn cardinalities_3_1() {
        let spec = DualWindowSpec::new(3, 1).unwrap();
        let cube = PaddedCube::new(&ramp_cube(4, 4, 1), 1);
        let view = extract_dual_window(&cube, PixelCoord::new(0, 0), &spec).unwrap();
        assert_eq!(view.ring_pixels.len(), 8);
        assert!(view.inner_neighbors.is_empty());
    }

    #[test]
    fn sets_match_brute_force() {
        for &(o, i) in &[(3, 1), (5, 3), (7, 3), (9, 5)] {
            let spec = DualWindowSpec::new(o, i).unwrap();
            let cube = PaddedCube::new(&ramp_cube(5, 5, 1), spec.outer_radius());
            let center = PixelCoord::new(2, 1);
            let view = extract_dual_window(&cube, center, &spec).unwrap();

            let (ro, ri) = ((o / 2) as isize, (i / 2) as isize);
            let mut ring = HashSet::new();
            let mut inner = HashSet::new();
            let mut all = HashSet::new();
            for a in -ro..=ro {
                for b in -ro..=ro {
                    let p = (2 + a, 1 + b);
                    all.insert(p);
                    if a.abs() <= ri && b.abs() <= ri {
                        if (a, b) != (0, 0) {
                            inner.insert(p);
                        }
                    } else {
                        ring.insert(p);
                    }
                }
            }
            let as_set = |v: &[WindowPixel]| -> HashSet<(isize, isize)> {
                v.iter().map(|p| (p.pos.row, p.pos.col)).collect()
            };
            assert_eq!(as_set(&view.ring_pixels), ring);
            assert_eq!(as_set(&view.inner_neighbors), inner);
            assert_eq!(as_set(&view.all_outer), all);
            assert!(ring.is_disjoint(&inner));
        }
    }

    #[test]
    fn border_window_uses_mirrored_spectra() {
        let src = ramp_cube(4, 4, 2);
        let spec = DualWindowSpec::new(3, 1).unwrap();
        let cube = PaddedCube::new(&src, 1);
        let view = extract_dual_window(&cube, PixelCoord::new(0, 0), &spec).unwrap();
        let corner = view.all_outer[0];
        assert_eq!(corner.pos, GridPoint::new(-1, -1));
        assert_eq!(corner.spectrum, src.spectrum(0, 0).as_slice());
        assert_eq!(view.center, src.spectrum(0, 0).as_slice());
    }

    #[test]
    fn window_errors() {
        let spec = DualWindowSpec::new(5, 3).unwrap();
        let thin = PaddedCube::new(&ramp_cube(4, 4, 1), 1);
        assert!(matches!(
            extract_dual_window(&thin, PixelCoord::new(1, 1), &spec),
            Err(Error::InvalidWindow(_))
        ));
        let cube = PaddedCube::new(&ramp_cube(4, 4, 1), 2);
        assert!(matches!(
            extract_dual_window(&cube, PixelCoord::new(4, 0), &spec),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn idw_two_neighbors() {
        let w = idw_weights(
            GridPoint::new(0, 0),
            &[GridPoint::new(0, 1), GridPoint::new(2, 0)],
        )
        .unwrap();
        assert!((w[0] - 0.8).abs() < 1e-15);
        assert!((w[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn idw_symmetric_neighbors() {
        let c = GridPoint::new(3, 3);
        let n = [
            c.offset(-1, 0),
            c.offset(1, 0),
            c.offset(0, -1),
            c.offset(0, 1),
        ];
        let w = idw_weights(c, &n).unwrap();
        assert!(w.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn idw_full_ring_sums_to_one() {
        let spec = DualWindowSpec::new(5, 3).unwrap();
        let cube = PaddedCube::new(&ramp_cube(5, 5, 1), 2);
        let view = extract_dual_window(&cube, PixelCoord::new(2, 2), &spec).unwrap();
        let pos: Vec<GridPoint> = view.ring_pixels.iter().map(|p| p.pos).collect();
        let w = idw_weights(view.center_pos, &pos).unwrap();

        // independent recomputation from offsets
        let mut inv = Vec::new();
        for a in -2i32..=2 {
            for b in -2i32..=2 {
                if a.abs() == 2 || b.abs() == 2 {
                    inv.push(1.0 / f64::from(a * a + b * b));
                }
            }
        }
        let total: f64 = inv.iter().sum();
        for (got, raw) in w.iter().zip(&inv) {
            assert!((got - raw / total).abs() < 1e-15);
        }
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn idw_rejects_center() {
        let c = GridPoint::new(1, 1);
        assert!(idw_weights(c, &[c]).is_err());
    }
}
