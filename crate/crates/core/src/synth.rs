//! Deterministic synthetic scenes: vertical background strips with per-class
//! signatures, additive Gaussian noise, and square anomaly blocks offset
//! along random unit directions.
//!
//! The generator is bit-reproducible. Random numbers come from SplitMix64;
//! normal variates come from Box-Muller, both outputs of each pair being
//! consumed in order. Draw order is: class signatures (class-major,
//! band-major, uniform on `[0.2, 0.8]`), anomaly directions (one unit vector
//! per block, in block order), then per-pixel noise (row-major, band-major).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::raster::{GroundTruthMask, HyperCube};

const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

/// SplitMix64 generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prng {
    state: u64,
}

impl Prng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        splitmix64_next(self)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_POW_NEG_53
    }

    /// Uniform on `(0, 1]` with 53 random bits.
    pub fn next_open_f64(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * TWO_POW_NEG_53
    }
}

pub fn splitmix64_next(prng: &mut Prng) -> u64 {
    prng.state = prng.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = prng.state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Box-Muller transform of two uniforms in `(0, 1]`.
pub fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let radius = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * PI * u2;
    (radius * theta.cos(), radius * theta.sin())
}

/// Two independent standard normal variates.
pub fn gauss_pair(prng: &mut Prng) -> (f64, f64) {
    let u1 = prng.next_open_f64();
    let u2 = prng.next_open_f64();
    box_muller(u1, u2)
}

/// A stream of standard normals that uses both halves of every Box-Muller
/// pair, cosine first.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    prng: Prng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(prng: Prng) -> Self {
        Self { prng, spare: None }
    }

    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let (a, b) = gauss_pair(&mut self.prng);
        self.spare = Some(b);
        a
    }
}

/// A square anomaly with top-left corner `(row, col)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalyBlock {
    pub row: usize,
    pub col: usize,
    pub size: usize,
    pub contrast: f64,
}

impl AnomalyBlock {
    fn overlaps(&self, other: &AnomalyBlock) -> bool {
        self.row < other.row + other.size
            && other.row < self.row + self.size
            && self.col < other.col + other.size
            && other.col < self.col + self.size
    }

    fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.row
            && row < self.row + self.size
            && col >= self.col
            && col < self.col + self.size
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    /// Number of vertical background strips.
    pub n_classes: usize,
    pub noise_sigma: f64,
    pub anomalies: Vec<AnomalyBlock>,
}

/// Contrast of the canonical scene's anomaly blocks.
pub const CANONICAL_CONTRAST: f64 = 0.075;

impl SceneSpec {
    /// 100x100x20 scene, three strips, noise 0.02 and four 4x4 anomalies.
    pub fn canonical() -> Self {
        let block = |row, col| AnomalyBlock {
            row,
            col,
            size: 4,
            contrast: CANONICAL_CONTRAST,
        };
        Self {
            seed: 42,
            height: 100,
            width: 100,
            bands: 20,
            n_classes: 3,
            noise_sigma: 0.02,
            anomalies: vec![block(20, 20), block(20, 75), block(75, 20), block(75, 75)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScene(msg));
        if self.height == 0 || self.width == 0 || self.bands == 0 {
            return bad("height, width and bands must be positive".into());
        }
        if self.n_classes == 0 || self.n_classes > self.width {
            return bad(format!(
                "class count must be in 1..={}, got {}",
                self.width, self.n_classes
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma > 0.0) {
            return bad(format!(
                "noise sigma must be positive, got {}",
                self.noise_sigma
            ));
        }
        for (i, a) in self.anomalies.iter().enumerate() {
            if a.size == 0 {
                return bad(format!("anomaly {i} has zero size"));
            }
            if a.contrast == 0.0 || !a.contrast.is_finite() {
                return bad(format!("anomaly {i} contrast must be finite and non-zero"));
            }
            if a.row + a.size > self.height || a.col + a.size > self.width {
                return bad(format!("anomaly {i} extends outside the scene"));
            }
            if let Some(j) = self.anomalies[..i].iter().position(|b| b.overlaps(a)) {
                return bad(format!("anomalies {j} and {i} overlap"));
            }
        }
        Ok(())
    }

    /// Parses `key=value` lines: `seed`, `height`, `width`, `bands`,
    /// `classes`, `noise_sigma`, and repeatable `anomaly=row,col,size,contrast`.
    /// `#` starts a comment line.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut seed = None;
        let (mut height, mut width, mut bands, mut classes) = (None, None, None, None);
        let mut noise_sigma = None;
        let mut anomalies = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidScene(format!("expected key=value, got {line:?}")))?;
            let value = value.trim();
            match key.trim() {
                "seed" => seed = Some(parse_num::<u64>("seed", value)?),
                "height" => height = Some(parse_num::<usize>("height", value)?),
                "width" => width = Some(parse_num::<usize>("width", value)?),
                "bands" => bands = Some(parse_num::<usize>("bands", value)?),
                "classes" => classes = Some(parse_num::<usize>("classes", value)?),
                "noise_sigma" => noise_sigma = Some(parse_num::<f64>("noise_sigma", value)?),
                "anomaly" => anomalies.push(parse_anomaly(value)?),
                other => return Err(Error::InvalidScene(format!("unknown key {other:?}"))),
            }
        }
        let need = |name: &str| Error::InvalidScene(format!("missing `{name}`"));
        let spec = Self {
            seed: seed.ok_or_else(|| need("seed"))?,
            height: height.ok_or_else(|| need("height"))?,
            width: width.ok_or_else(|| need("width"))?,
            bands: bands.ok_or_else(|| need("bands"))?,
            n_classes: classes.ok_or_else(|| need("classes"))?,
            noise_sigma: noise_sigma.ok_or_else(|| need("noise_sigma"))?,
            anomalies,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_kv_text(&self) -> String {
        let mut out = format!(
            "seed={}\nheight={}\nwidth={}\nbands={}\nclasses={}\nnoise_sigma={}\n",
            self.seed, self.height, self.width, self.bands, self.n_classes, self.noise_sigma
        );
        for a in &self.anomalies {
            out.push_str(&format!(
                "anomaly={},{},{},{}\n",
                a.row, a.col, a.size, a.contrast
            ));
        }
        out
    }

    fn class_of_col(&self, col: usize) -> usize {
        col * self.n_classes / self.width
    }
}

fn parse_num<T: std::str::FromStr>(name: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidScene(format!("bad value {value:?} for `{name}`")))
}

/// Parses `row,col,size,contrast`.
pub fn parse_anomaly(value: &str) -> Result<AnomalyBlock> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(Error::InvalidScene(format!(
            "anomaly must be row,col,size,contrast, got {value:?}"
        )));
    }
    Ok(AnomalyBlock {
        row: parse_num("anomaly row", parts[0])?,
        col: parse_num("anomaly col", parts[1])?,
        size: parse_num("anomaly size", parts[2])?,
        contrast: parse_num("anomaly contrast", parts[3])?,
    })
}

/// Generates the cube and its anomaly mask.
pub fn generate_scene(spec: &SceneSpec) -> Result<(HyperCube, GroundTruthMask)> {
    spec.validate()?;
    let (h, w, bands) = (spec.height, spec.width, spec.bands);
    let mut prng = Prng::new(spec.seed);

    let signatures: Vec<Vec<f64>> = (0..spec.n_classes)
        .map(|_| (0..bands).map(|_| 0.2 + 0.6 * prng.next_f64()).collect())
        .collect();

    let mut gauss = GaussianStream::new(prng);
    let directions: Vec<Vec<f64>> = spec
        .anomalies
        .iter()
        .map(|_| {
            let v: Vec<f64> = (0..bands).map(|_| gauss.next_gaussian()).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect()
        })
        .collect();

    let plane = h * w;
    let mut values = vec![0.0; plane * bands];
    let mut labels = vec![false; plane];
    for r in 0..h {
        for c in 0..w {
            let sig = &signatures[spec.class_of_col(c)];
            let block = spec.anomalies.iter().position(|a| a.contains(r, c));
            labels[r * w + c] = block.is_some();
            for b in 0..bands {
                let mut v = sig[b];
                if let Some(k) = block {
                    v += spec.anomalies[k].contrast * directions[k][b];
                }
                v += spec.noise_sigma * gauss.next_gaussian();
                values[b * plane + r * w + c] = v;
            }
        }
    }
    Ok((
        HyperCube::from_bsq(h, w, bands, values)?,
        GroundTruthMask::new(h, w, labels)?,
    ))
}
