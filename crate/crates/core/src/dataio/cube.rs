//! Multispectral cubes (`MSC1` container) and 8-bit PGM frames.

use crate::cmc::GrayFrame;
use crate::error::{Error, Result};

pub const CUBE_MAGIC: &[u8; 4] = b"MSC1";

/// 1-based source bands of the RGB proxy, in (R, G, B) order.
pub const RGB_PROXY_BANDS: [usize; 3] = [5, 3, 2];

/// Band-major image cube.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCube {
    bands: usize,
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl SpectralCube {
    pub fn new(bands: usize, height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if bands == 0 {
            return Err(Error::Shape("a cube needs at least one band".into()));
        }
        if values.len() != bands * height * width {
            return Err(Error::Shape(format!(
                "{} values for a {bands}x{height}x{width} cube",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("cube values must be finite"));
        }
        Ok(Self {
            bands,
            height,
            width,
            values,
        })
    }

    pub fn from_fn(bands: usize, height: usize, width: usize, f: impl Fn(usize, usize, usize) -> f32) -> Self {
        let mut values = Vec::with_capacity(bands * height * width);
        for b in 0..bands {
            for y in 0..height {
                for x in 0..width {
                    values.push(f(b, y, x));
                }
            }
        }
        Self {
            bands,
            height,
            width,
            values,
        }
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn at(&self, band: usize, row: usize, col: usize) -> f32 {
        self.values[(band * self.height + row) * self.width + col]
    }

    pub fn band(&self, band: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.values[band * n..(band + 1) * n]
    }

    /// Grayscale frame from the mean over bands.
    pub fn band_mean(&self) -> GrayFrame {
        let n = self.height * self.width;
        let mut acc = vec![0.0f64; n];
        for b in 0..self.bands {
            for (a, &v) in acc.iter_mut().zip(self.band(b)) {
                *a += f64::from(v);
            }
        }
        let k = self.bands as f64;
        GrayFrame::new(self.width, self.height, acc.into_iter().map(|v| v / k).collect())
            .expect("cube values are finite")
    }
}

pub fn write_cube(cube: &SpectralCube) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * cube.values.len());
    out.extend_from_slice(CUBE_MAGIC);
    for d in [cube.bands, cube.height, cube.width] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in &cube.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Little-endian cursor shared by the binary readers.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("unexpected end of data at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let m = self.take(4)?;
        if m != magic {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(m),
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(())
    }

    pub(crate) fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    pub(crate) fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let len = n
            .checked_mul(4)
            .ok_or_else(|| Error::Format("declared size overflows".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn read_cube(bytes: &[u8]) -> Result<SpectralCube> {
    let mut r = Reader::new(bytes);
    r.magic(CUBE_MAGIC)?;
    let (c, h, w) = (r.u32()?, r.u32()?, r.u32()?);
    let n = c
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| Error::Format("declared shape overflows".into()))?;
    let values = r.f32s(n)?;
    r.finish()?;
    SpectralCube::new(c, h, w, values).map_err(|e| Error::Format(e.to_string()))
}

/// Bands 5, 3, 2 (1-based) as a three-band (R, G, B) cube.
pub fn rgb_proxy(cube: &SpectralCube) -> Result<SpectralCube> {
    if cube.bands < 5 {
        return Err(Error::domain(format!(
            "RGB proxy needs at least 5 bands, cube has {}",
            cube.bands
        )));
    }
    let mut values = Vec::with_capacity(3 * cube.height * cube.width);
    for b in RGB_PROXY_BANDS {
        values.extend_from_slice(cube.band(b - 1));
    }
    SpectralCube::new(3, cube.height, cube.width, values)
}

/// Reads a binary (P5) PGM with maxval ≤ 255.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayFrame> {
    let mut pos = 0;
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if tokens[0] != "P5" {
        return Err(Error::Format(format!("unsupported PGM magic `{}`", tokens[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PGM header field `{s}`")));
    let (w, h, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("PGM maxval {maxval} not supported")));
    }
    // exactly one whitespace byte separates the header from the raster
    let data = bytes.get(pos + 1..).unwrap_or(&[]);
    if data.len() != w * h {
        return Err(Error::Format(format!("PGM raster has {} bytes, expected {}", data.len(), w * h)));
    }
    GrayFrame::new(w, h, data.iter().map(|&b| f64::from(b)).collect())
}

/// Writes a P5 PGM, rounding and clamping values to `0..=255`.
pub fn write_pgm(frame: &GrayFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend(frame.values().iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
    out
}
