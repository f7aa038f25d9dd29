//! File formats: key=value cube headers with raw little-endian band-sequential
//! data, and binary 8-bit PGM for masks and previews.
//!
//! A header looks like
//!
//! ```text
//! height=100
//! width=100
//! bands=20
//! dtype=float64
//! interleave=bsq
//! byteorder=little
//! data=scene.raw
//! ```
//!
//! `data` is resolved relative to the header's directory. When it is absent
//! the data file is the header path with its extension replaced by `raw`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::raster::{minmax_normalize, DetectionMap, GroundTruthMask, HyperCube};

/// On-disk scalar type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    Float32,
    Float64,
    Uint8,
}

impl DType {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "float32" => Some(DType::Float32),
            "float64" => Some(DType::Float64),
            "uint8" => Some(DType::Uint8),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            DType::Float32 => "float32",
            DType::Float64 => "float64",
            DType::Uint8 => "uint8",
        }
    }

    fn size(self) -> usize {
        match self {
            DType::Float32 => 4,
            DType::Float64 => 8,
            DType::Uint8 => 1,
        }
    }
}

/// Parsed raster header.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterHeader {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub dtype: DType,
    pub data_path: PathBuf,
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn check_path(path: &Path) -> Result<()> {
    if path.as_os_str().is_empty() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty path"),
        ));
    }
    Ok(())
}

fn parse_header_text(path: &Path, text: &str) -> Result<RasterHeader> {
    let mut fields = HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| malformed(path, format!("expected key=value, got {line:?}")))?;
        fields.insert(key.trim().to_ascii_lowercase(), value.trim().to_string());
    }

    let dim = |key: &str| -> Result<usize> {
        let raw = fields
            .get(key)
            .ok_or_else(|| malformed(path, format!("missing `{key}`")))?;
        match raw.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(malformed(
                path,
                format!("`{key}` must be a positive integer, got {raw:?}"),
            )),
        }
    };
    let height = dim("height")?;
    let width = dim("width")?;
    let bands = dim("bands")?;

    let dtype_raw = fields
        .get("dtype")
        .ok_or_else(|| malformed(path, "missing `dtype`"))?;
    let dtype = DType::parse(dtype_raw)
        .ok_or_else(|| malformed(path, format!("unsupported dtype {dtype_raw:?}")))?;

    if let Some(il) = fields.get("interleave") {
        if !il.eq_ignore_ascii_case("bsq") {
            return Err(Error::UnsupportedFormat(format!("interleave {il:?}")));
        }
    }
    if let Some(bo) = fields.get("byteorder") {
        if !bo.eq_ignore_ascii_case("little") {
            return Err(Error::UnsupportedFormat(format!("byteorder {bo:?}")));
        }
    }

    let data_path = match fields.get("data") {
        Some(name) => path.parent().unwrap_or(Path::new("")).join(name),
        None => path.with_extension("raw"),
    };

    Ok(RasterHeader {
        height,
        width,
        bands,
        dtype,
        data_path,
    })
}

/// Reads and parses a header file.
pub fn read_header(path: impl AsRef<Path>) -> Result<RasterHeader> {
    let path = path.as_ref();
    check_path(path)?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_header_text(path, &text)
}

fn read_raw(header: &RasterHeader) -> Result<Vec<u8>> {
    let bytes = fs::read(&header.data_path).map_err(|e| Error::io(&header.data_path, e))?;
    let expected = header.height * header.width * header.bands * header.dtype.size();
    if bytes.len() != expected {
        return Err(Error::SizeMismatch {
            expected,
            found: bytes.len(),
        });
    }
    Ok(bytes)
}

fn decode_floats(bytes: &[u8], dtype: DType) -> Result<Vec<f64>> {
    let values: Vec<f64> = match dtype {
        DType::Float32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        DType::Float64 => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect(),
        DType::Uint8 => bytes.iter().map(|&b| b as f64).collect(),
    };
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(values)
}

/// Loads a cube from its header path.
pub fn load_cube(header_path: impl AsRef<Path>) -> Result<HyperCube> {
    let header = read_header(header_path)?;
    let bytes = read_raw(&header)?;
    let values = decode_floats(&bytes, header.dtype)?;
    HyperCube::from_bsq(header.height, header.width, header.bands, values)
}

fn write_raster(
    header_path: &Path,
    height: usize,
    width: usize,
    bands: usize,
    dtype: DType,
    payload: &[u8],
) -> Result<()> {
    check_path(header_path)?;
    let data_path = header_path.with_extension("raw");
    if data_path == header_path {
        return Err(Error::io(
            header_path,
            std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                "header path must not have a .raw extension",
            ),
        ));
    }
    let data_name = data_path
        .file_name()
        .ok_or_else(|| {
            Error::io(
                header_path,
                std::io::Error::new(std::io::ErrorKind::InvalidInput, "no file name"),
            )
        })?
        .to_string_lossy()
        .into_owned();
    let header = format!(
        "height={height}\nwidth={width}\nbands={bands}\ndtype={}\ninterleave=bsq\nbyteorder=little\ndata={data_name}\n",
        dtype.name()
    );
    fs::write(&data_path, payload).map_err(|e| Error::io(&data_path, e))?;
    fs::write(header_path, header).map_err(|e| Error::io(header_path, e))?;
    Ok(())
}

/// Writes the cube as a float64 header/data pair; the data file sits next to
/// the header with a `raw` extension.
pub fn save_cube(cube: &HyperCube, header_path: impl AsRef<Path>) -> Result<()> {
    let payload: Vec<u8> = cube.as_bsq().iter().flat_map(|v| v.to_le_bytes()).collect();
    write_raster(
        header_path.as_ref(),
        cube.height(),
        cube.width(),
        cube.bands(),
        DType::Float64,
        &payload,
    )
}

/// Writes the map as a single-band float32 raster.
pub fn save_map(map: &DetectionMap, header_path: impl AsRef<Path>) -> Result<()> {
    let payload: Vec<u8> = map
        .scores()
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect();
    write_raster(
        header_path.as_ref(),
        map.height(),
        map.width(),
        1,
        DType::Float32,
        &payload,
    )
}

/// Loads a single-band raster as a detection map.
pub fn load_map(header_path: impl AsRef<Path>) -> Result<DetectionMap> {
    let cube = load_cube(header_path)?;
    if cube.bands() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "detection map must have 1 band, found {}",
            cube.bands()
        )));
    }
    DetectionMap::new(cube.height(), cube.width(), cube.as_bsq().to_vec())
}

/// 8-bit grey image decoded from a P5 PGM.
struct Pgm {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

fn parse_pgm(path: &Path, bytes: &[u8]) -> Result<Pgm> {
    let bad = |reason: &str| malformed(path, reason.to_string());
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(bad("missing P5 magic"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(bad("truncated PGM header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(bad("expected a number in PGM header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("PGM header number out of range"))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(bad("PGM dimensions must be positive"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedFormat(format!(
            "PGM maxval {maxval} (only 8-bit supported)"
        )));
    }
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(bad("missing whitespace after PGM maxval"));
    }
    pos += 1;
    let data = &bytes[pos..];
    if data.len() != width * height {
        return Err(Error::SizeMismatch {
            expected: width * height,
            found: data.len(),
        });
    }
    Ok(Pgm {
        width,
        height,
        pixels: data.to_vec(),
    })
}

fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    check_path(path)?;
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads a ground-truth mask from a P5 PGM or from a `uint8` raster header.
/// A pixel is an anomaly iff its byte is non-zero. When `expected` is given
/// as `(height, width)` the mask must match it.
pub fn load_mask(
    path: impl AsRef<Path>,
    expected: Option<(usize, usize)>,
) -> Result<GroundTruthMask> {
    let path = path.as_ref();
    check_path(path)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;

    let (height, width, pixels) = if bytes.first() == Some(&b'P') {
        let pgm = parse_pgm(path, &bytes)?;
        (pgm.height, pgm.width, pgm.pixels)
    } else {
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| malformed(path, "neither a P5 PGM nor a text header"))?;
        let header = parse_header_text(path, text)?;
        if header.dtype != DType::Uint8 || header.bands != 1 {
            return Err(Error::UnsupportedFormat(
                "mask sidecar must declare bands=1 and dtype=uint8".into(),
            ));
        }
        let raw = read_raw(&header)?;
        (header.height, header.width, raw)
    };

    if let Some((eh, ew)) = expected {
        if (eh, ew) != (height, width) {
            return Err(Error::ShapeMismatch(format!(
                "mask is {height}x{width}, expected {eh}x{ew}"
            )));
        }
    }
    GroundTruthMask::new(height, width, pixels.iter().map(|&b| b > 0).collect())
}

/// Writes the mask as a P5 PGM with anomalies at 255.
pub fn save_mask(mask: &GroundTruthMask, path: impl AsRef<Path>) -> Result<()> {
    let pixels: Vec<u8> = mask
        .labels()
        .iter()
        .map(|&l| if l { 255 } else { 0 })
        .collect();
    write_pgm(path.as_ref(), mask.width(), mask.height(), &pixels)
}

/// Converts a normalized score to a preview byte, rounding half up.
#[inline]
pub fn preview_byte(normalized: f64) -> u8 {
    (normalized * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Writes a min-max normalized greyscale preview of the map.
pub fn save_preview(map: &DetectionMap, path: impl AsRef<Path>) -> Result<()> {
    let norm = minmax_normalize(map);
    let pixels: Vec<u8> = norm.scores().iter().map(|&v| preview_byte(v)).collect();
    write_pgm(path.as_ref(), map.width(), map.height(), &pixels)
}
