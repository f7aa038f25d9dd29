//! Raster data model: hyperspectral cubes, ground-truth masks and detection
//! maps, plus border padding and score normalization.

use crate::error::{Error, Result};

/// A `height x width x bands` hyperspectral raster.
///
/// Values are stored band-sequentially: element `(row, col, band)` lives at
/// `band * height * width + row * width + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    height: usize,
    width: usize,
    bands: usize,
    values: Vec<f64>,
}

impl HyperCube {
    /// Builds a cube from band-sequential values, rejecting empty shapes,
    /// length mismatches and non-finite values.
    pub fn from_bsq(height: usize, width: usize, bands: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::ShapeMismatch(format!(
                "cube dimensions must be positive, got {height}x{width}x{bands}"
            )));
        }
        let expected = height * width * bands;
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{height}x{width}x{bands} cube needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            height,
            width,
            bands,
            values,
        })
    }

    /// Builds a cube by evaluating `f(row, col, band)` for every element.
    pub fn from_fn(
        height: usize,
        width: usize,
        bands: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(height * width * bands);
        for b in 0..bands {
            for r in 0..height {
                for c in 0..width {
                    values.push(f(r, c, b));
                }
            }
        }
        Self::from_bsq(height, width, bands, values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// Band-sequential backing slice.
    pub fn as_bsq(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize, band: usize) -> f64 {
        self.values[(band * self.height + row) * self.width + col]
    }

    /// One contiguous `height * width` plane.
    pub fn band_plane(&self, band: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.values[band * plane..(band + 1) * plane]
    }

    /// Copies out the spectrum of one pixel.
    pub fn spectrum(&self, row: usize, col: usize) -> Vec<f64> {
        (0..self.bands).map(|b| self.value(row, col, b)).collect()
    }

    /// Pixel-interleaved copy of the data: spectrum of pixel `(r, c)` is the
    /// slice starting at `(r * width + c) * bands`.
    pub fn to_pixel_major(&self) -> Vec<f64> {
        let plane = self.height * self.width;
        let mut out = vec![0.0; self.values.len()];
        for b in 0..self.bands {
            let src = &self.values[b * plane..(b + 1) * plane];
            for (p, v) in src.iter().enumerate() {
                out[p * self.bands + b] = *v;
            }
        }
        out
    }

    /// Returns a new cube with every value mapped through `f`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_bsq(
            self.height,
            self.width,
            self.bands,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }
}

/// Binary anomaly labels, `true` for anomaly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthMask {
    height: usize,
    width: usize,
    labels: Vec<bool>,
}

impl GroundTruthMask {
    pub fn new(height: usize, width: usize, labels: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ShapeMismatch(
                "mask dimensions must be positive".into(),
            ));
        }
        if labels.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "{height}x{width} mask needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Row-major labels.
    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn is_anomaly(&self, row: usize, col: usize) -> bool {
        self.labels[row * self.width + col]
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

/// Per-pixel anomaly scores, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionMap {
    height: usize,
    width: usize,
    scores: Vec<f64>,
}

impl DetectionMap {
    pub fn new(height: usize, width: usize, scores: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ShapeMismatch(
                "map dimensions must be positive".into(),
            ));
        }
        if scores.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "{height}x{width} map needs {} scores, got {}",
                height * width,
                scores.len()
            )));
        }
        if let Some(index) = scores.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            height,
            width,
            scores,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0.0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.width + col]
    }

    pub fn same_shape(&self, other: &DetectionMap) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Location of the largest score; the first one in row-major order wins ties.
    pub fn argmax(&self) -> PixelCoord {
        let mut best = 0;
        for (i, &s) in self.scores.iter().enumerate() {
            if s > self.scores[best] {
                best = i;
            }
        }
        PixelCoord::new(best / self.width, best % self.width)
    }

    pub(crate) fn check_mask(&self, mask: &GroundTruthMask) -> Result<()> {
        if self.height != mask.height() || self.width != mask.width() {
            return Err(Error::ShapeMismatch(format!(
                "map is {}x{}, mask is {}x{}",
                self.height,
                self.width,
                mask.height(),
                mask.width()
            )));
        }
        Ok(())
    }
}

/// A pixel location inside a raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PixelCoord {
    pub row: usize,
    pub col: usize,
}

impl PixelCoord {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Maps a possibly out-of-range index onto `0..len` by symmetric reflection
/// (the edge sample is repeated: -1 -> 0, -2 -> 1, len -> len - 1).
#[inline]
pub(crate) fn reflect_index(i: isize, len: usize) -> usize {
    let n = len as isize;
    let m = i.rem_euclid(2 * n);
    if m < n {
        m as usize
    } else {
        (2 * n - 1 - m) as usize
    }
}

/// Pads every band by `radius` pixels on each side using symmetric
/// reflection.
pub fn pad_symmetric(cube: &HyperCube, radius: usize) -> HyperCube {
    if radius == 0 {
        return cube.clone();
    }
    let (h, w, bands) = (cube.height(), cube.width(), cube.bands());
    let (ph, pw) = (h + 2 * radius, w + 2 * radius);
    let r = radius as isize;
    let row_src: Vec<usize> = (0..ph).map(|i| reflect_index(i as isize - r, h)).collect();
    let col_src: Vec<usize> = (0..pw).map(|j| reflect_index(j as isize - r, w)).collect();

    let mut values = Vec::with_capacity(ph * pw * bands);
    for b in 0..bands {
        let plane = cube.band_plane(b);
        for &sr in &row_src {
            let src_row = &plane[sr * w..(sr + 1) * w];
            values.extend(col_src.iter().map(|&sc| src_row[sc]));
        }
    }
    HyperCube {
        height: ph,
        width: pw,
        bands,
        values,
    }
}

/// Affine rescale of the scores onto `[0, 1]`; constant maps become all zeros.
pub fn minmax_normalize(map: &DetectionMap) -> DetectionMap {
    let (lo, hi) = map
        .scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    let span = hi - lo;
    let scores = if span > 0.0 && span.is_finite() {
        map.scores
            .iter()
            .map(|&s| ((s - lo) / span).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![0.0; map.scores.len()]
    };
    DetectionMap {
        height: map.height,
        width: map.width,
        scores,
    }
}
