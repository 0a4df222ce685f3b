//! Difference hashing and exact-hash overlap filtering.
//!
//! Pipeline: BT.601 grayscale, exact area-average resize to a 9x8 grid, then
//! one bit per horizontally adjacent pair (`left > right`), packed row-major
//! with the first comparison in the most significant bit.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Read};
use std::str::FromStr;

use thiserror::Error;

use crate::pool::SampleId;

#[derive(Debug, Error, PartialEq)]
pub enum DedupError {
    #[error("image dimensions {width}x{height} do not match {len} pixels")]
    Dimension { width: usize, height: usize, len: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported or malformed PNM image: {0}")]
    Pnm(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for DedupError {
    fn from(e: std::io::Error) -> Self {
        DedupError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, DedupError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(DedupError::Dimension { width, height, len: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Self {
        assert!(width > 0 && height > 0);
        let pixels = (0..height)
            .flat_map(|r| (0..width).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .collect();
        Self { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self, DedupError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(DedupError::Dimension { width, height, len: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }
}

/// `round(0.299 R + 0.587 G + 0.114 B)`, evaluated in integer thousandths
/// so the result is exact.
pub fn to_gray(img: &RgbImage) -> GrayImage {
    let pixels = img
        .pixels
        .iter()
        .map(|&[r, g, b]| {
            let y = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
            ((y + 500) / 1000).min(255) as u8
        })
        .collect();
    GrayImage { width: img.width, height: img.height, pixels }
}

pub const GRID_W: usize = 9;
pub const GRID_H: usize = 8;

/// Overlap of source pixel `i` with output cell `j`, measured in units of
/// `1/out` source pixels. Source pixel `i` spans `[i*out, (i+1)*out)` and
/// cell `j` spans `[j*src, (j+1)*src)` in those units.
fn overlap(i: usize, j: usize, src: usize, out: usize) -> u64 {
    let lo = (i * out).max(j * src);
    let hi = ((i + 1) * out).min((j + 1) * src);
    hi.saturating_sub(lo) as u64
}

/// Resample to `GRID_W x GRID_H` by exact area averaging, rounding half up.
pub fn resize_to_grid(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width, img.height);
    // Every cell covers w*h units of area (in 1/(9*8) pixel units).
    let area = (w * h) as u64;
    let mut out = Vec::with_capacity(GRID_W * GRID_H);
    for r in 0..GRID_H {
        let rows: Vec<(usize, u64)> = (0..h)
            .map(|y| (y, overlap(y, r, h, GRID_H)))
            .filter(|&(_, o)| o > 0)
            .collect();
        for c in 0..GRID_W {
            let mut sum = 0u64;
            for x in 0..w {
                let ox = overlap(x, c, w, GRID_W);
                if ox == 0 {
                    continue;
                }
                for &(y, oy) in &rows {
                    sum += img.get(y, x) as u64 * ox * oy;
                }
            }
            out.push(((2 * sum + area) / (2 * area)) as u8);
        }
    }
    GrayImage { width: GRID_W, height: GRID_H, pixels: out }
}

/// 64-bit difference hash.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DHash64(pub u64);

impl fmt::Display for DHash64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for DHash64 {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 16 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(format!("expected 16 hex digits, got `{s}`"));
        }
        u64::from_str_radix(s, 16).map(DHash64).map_err(|e| e.to_string())
    }
}

impl serde::Serialize for DHash64 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for DHash64 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn dhash(img: &GrayImage) -> DHash64 {
    let grid = if img.width == GRID_W && img.height == GRID_H {
        img.clone()
    } else {
        resize_to_grid(img)
    };
    let mut bits = 0u64;
    for r in 0..GRID_H {
        for c in 0..GRID_W - 1 {
            if grid.get(r, c) > grid.get(r, c + 1) {
                bits |= 1 << (63 - (8 * r + c));
            }
        }
    }
    DHash64(bits)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapResult {
    pub kept: Vec<SampleId>,
    pub discarded: usize,
}

/// Drop every crawled item whose hash equals some downstream hash.
pub fn overlap_filter(crawled: &[(SampleId, DHash64)], downstream: &HashSet<DHash64>) -> OverlapResult {
    let kept: Vec<SampleId> = crawled
        .iter()
        .filter(|(_, h)| !downstream.contains(h))
        .map(|&(id, _)| id)
        .collect();
    OverlapResult { discarded: crawled.len() - kept.len(), kept }
}

/// Hash list: one `<sample_id> <16-hex-digit hash>` per line. Blank lines
/// and `#` comments are skipped.
pub fn read_hash_list<R: BufRead>(reader: R) -> Result<Vec<(SampleId, DHash64)>, DedupError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let err = |message: String| DedupError::Parse { line: i + 1, message };
        let fields: Vec<&str> = t.split_whitespace().collect();
        let [id, hash] = fields[..] else {
            return Err(err(format!("expected `<sample_id> <hash>`, got `{t}`")));
        };
        let id = id.parse::<u64>().map_err(|e| err(format!("bad sample id `{id}`: {e}")))?;
        let hash = hash.parse::<DHash64>().map_err(err)?;
        out.push((SampleId(id), hash));
    }
    Ok(out)
}

/// Read a binary or ASCII PGM (P2/P5) or PPM (P3/P6) image with maxval 255
/// and convert it to grayscale.
pub fn read_pnm<R: Read>(mut reader: R) -> Result<GrayImage, DedupError> {
    let mut data = Vec::new();
    reader.read_to_end(&mut data)?;
    let mut pos = 0;
    let mut token = |data: &[u8]| -> Result<String, DedupError> {
        loop {
            while pos < data.len() && data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < data.len() && data[pos] == b'#' {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(DedupError::Pnm("unexpected end of header".into()));
        }
        Ok(String::from_utf8_lossy(&data[start..pos]).into_owned())
    };
    let magic = token(&data)?;
    let num = |s: String| s.parse::<usize>().map_err(|_| DedupError::Pnm(format!("bad number `{s}`")));
    let width = num(token(&data)?)?;
    let height = num(token(&data)?)?;
    let maxval = num(token(&data)?)?;
    if maxval != 255 {
        return Err(DedupError::Pnm(format!("maxval {maxval} unsupported")));
    }
    let channels = match magic.as_str() {
        "P2" | "P5" => 1,
        "P3" | "P6" => 3,
        m => return Err(DedupError::Pnm(format!("magic `{m}` unsupported"))),
    };
    let n = width * height * channels;
    let samples: Vec<u8> = if magic == "P5" || magic == "P6" {
        // exactly one whitespace byte separates header and raster
        let start = pos + 1;
        data.get(start..start + n)
            .ok_or_else(|| DedupError::Pnm("truncated raster".into()))?
            .to_vec()
    } else {
        (0..n)
            .map(|_| {
                token(&data)?
                    .parse::<u8>()
                    .map_err(|_| DedupError::Pnm("bad sample".into()))
            })
            .collect::<Result<_, _>>()?
    };
    if channels == 1 {
        GrayImage::new(width, height, samples)
    } else {
        let rgb = samples.chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect();
        Ok(to_gray(&RgbImage::new(width, height, rgb)?))
    }
}
