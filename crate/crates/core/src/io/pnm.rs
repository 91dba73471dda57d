//! Binary netpbm codecs: P5 (8 and 16 bit) and P6 (8 bit).
//!
//! Decoding is strict. The payload must be exactly `width · height ·
//! channels · bytes_per_sample` long, so a header that disagrees with its
//! payload in any way is rejected instead of being silently cropped.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::imaging::{ColorImage, DepthImage, GrayImage};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PnmError {
    #[error("byte {offset}: bad magic number {found:?}")]
    BadMagic { offset: usize, found: String },
    #[error("byte {offset}: malformed header: {reason}")]
    MalformedHeader { offset: usize, reason: String },
    #[error("byte {offset}: unsupported maxval {maxval}")]
    UnsupportedMaxval { offset: usize, maxval: u64 },
    #[error("byte {offset}: truncated payload, expected {expected} bytes but found {found}")]
    Truncated {
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("byte {offset}: {extra} bytes of trailing data after payload")]
    TrailingData { offset: usize, extra: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PnmImage {
    Gray8 {
        width: usize,
        height: usize,
        data: Vec<u8>,
    },
    Gray16 {
        width: usize,
        height: usize,
        data: Vec<u16>,
    },
    Rgb8 {
        width: usize,
        height: usize,
        data: Vec<u8>,
    },
}

impl PnmImage {
    pub fn dims(&self) -> (usize, usize) {
        match *self {
            PnmImage::Gray8 { width, height, .. }
            | PnmImage::Gray16 { width, height, .. }
            | PnmImage::Rgb8 { width, height, .. } => (width, height),
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn malformed(&self, reason: impl Into<String>) -> PnmError {
        PnmError::MalformedHeader {
            offset: self.pos,
            reason: reason.into(),
        }
    }

    /// Skips whitespace and `#` comments; at least one whitespace byte or
    /// comment must be present.
    fn separator(&mut self) -> Result<(), PnmError> {
        let start = self.pos;
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        if self.pos == start {
            return Err(self.malformed("expected whitespace"));
        }
        Ok(())
    }

    fn number(&mut self, what: &str) -> Result<u64, PnmError> {
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as u64))
                .ok_or_else(|| PnmError::MalformedHeader {
                    offset: start,
                    reason: format!("{what} overflows"),
                })?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.malformed(format!("expected {what}")));
        }
        Ok(value)
    }
}

pub fn decode(bytes: &[u8]) -> Result<PnmImage, PnmError> {
    let magic = bytes.get(..2).unwrap_or(bytes);
    let channels = match magic {
        b"P5" => 1,
        b"P6" => 3,
        _ => {
            return Err(PnmError::BadMagic {
                offset: 0,
                found: String::from_utf8_lossy(magic).into_owned(),
            })
        }
    };
    let mut cur = Cursor { bytes, pos: 2 };
    cur.separator()?;
    let width_at = cur.pos;
    let width = cur.number("width")?;
    cur.separator()?;
    let height_at = cur.pos;
    let height = cur.number("height")?;
    cur.separator()?;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.malformed("expected a single whitespace byte after maxval")),
    }
    if width == 0 {
        return Err(PnmError::MalformedHeader {
            offset: width_at,
            reason: "zero width".into(),
        });
    }
    if height == 0 {
        return Err(PnmError::MalformedHeader {
            offset: height_at,
            reason: "zero height".into(),
        });
    }
    let sample_bytes = match (channels, maxval) {
        (_, 255) => 1,
        (1, 65535) => 2,
        _ => {
            return Err(PnmError::UnsupportedMaxval {
                offset: maxval_at,
                maxval,
            })
        }
    };
    let expected = (width as usize)
        .checked_mul(height as usize)
        .and_then(|n| n.checked_mul(channels * sample_bytes))
        .ok_or(PnmError::MalformedHeader {
            offset: width_at,
            reason: "image size overflows".into(),
        })?;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(PnmError::Truncated {
            offset: bytes.len(),
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(PnmError::TrailingData {
            offset: cur.pos + expected,
            extra: payload.len() - expected,
        });
    }
    let (width, height) = (width as usize, height as usize);
    Ok(match (channels, sample_bytes) {
        (1, 1) => PnmImage::Gray8 {
            width,
            height,
            data: payload.to_vec(),
        },
        (1, _) => PnmImage::Gray16 {
            width,
            height,
            data: payload
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect(),
        },
        _ => PnmImage::Rgb8 {
            width,
            height,
            data: payload.to_vec(),
        },
    })
}

pub fn encode(img: &PnmImage) -> Vec<u8> {
    let (magic, maxval) = match img {
        PnmImage::Gray8 { .. } => ("P5", 255),
        PnmImage::Gray16 { .. } => ("P5", 65535),
        PnmImage::Rgb8 { .. } => ("P6", 255),
    };
    let (w, h) = img.dims();
    let mut out = format!("{magic}\n{w} {h}\n{maxval}\n").into_bytes();
    match img {
        PnmImage::Gray8 { data, .. } | PnmImage::Rgb8 { data, .. } => out.extend_from_slice(data),
        PnmImage::Gray16 { data, .. } => {
            out.reserve(data.len() * 2);
            for v in data {
                out.extend_from_slice(&v.to_be_bytes());
            }
        }
    }
    out
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn gray_to_pnm(img: &GrayImage) -> PnmImage {
    PnmImage::Gray8 {
        width: img.width(),
        height: img.height(),
        data: img.data().iter().map(|&v| quantize(v)).collect(),
    }
}

pub fn color_to_pnm(img: &ColorImage) -> PnmImage {
    PnmImage::Rgb8 {
        width: img.width(),
        height: img.height(),
        data: img.pixels().iter().flatten().map(|&v| quantize(v)).collect(),
    }
}

/// Depth in millimetres; 0 marks invalid samples.
pub fn depth_to_pnm(img: &DepthImage) -> PnmImage {
    PnmImage::Gray16 {
        width: img.width(),
        height: img.height(),
        data: img
            .data()
            .iter()
            .map(|&d| (d as f64 * 1000.0).round().clamp(0.0, 65535.0) as u16)
            .collect(),
    }
}

pub fn pnm_to_gray(img: &PnmImage) -> Result<GrayImage> {
    match img {
        PnmImage::Gray8 { width, height, data } => {
            GrayImage::from_vec(*width, *height, data.iter().map(|&b| b as f32 / 255.0).collect())
        }
        _ => Err(Error::InvalidData("expected an 8-bit grayscale image".into())),
    }
}

pub fn pnm_to_color(img: &PnmImage) -> Result<ColorImage> {
    match img {
        PnmImage::Rgb8 { width, height, data } => ColorImage::from_pixels(
            *width,
            *height,
            data.chunks_exact(3)
                .map(|c| [c[0] as f32 / 255.0, c[1] as f32 / 255.0, c[2] as f32 / 255.0])
                .collect(),
        ),
        _ => Err(Error::InvalidData("expected an 8-bit RGB image".into())),
    }
}

pub fn pnm_to_depth(img: &PnmImage, max_range: f32) -> Result<DepthImage> {
    match img {
        PnmImage::Gray16 { width, height, data } => DepthImage::from_vec(
            *width,
            *height,
            data.iter().map(|&mm| (mm as f64 / 1000.0) as f32).collect(),
            max_range,
        ),
        _ => Err(Error::InvalidData("expected a 16-bit depth image".into())),
    }
}

pub fn read_pnm(path: &Path) -> Result<PnmImage> {
    let bytes = fs::read(path).map_err(|e| Error::at_path(path, e))?;
    decode(&bytes).map_err(|e| Error::at_path(path, e))
}

pub fn write_pnm(path: &Path, img: &PnmImage) -> Result<()> {
    fs::write(path, encode(img)).map_err(|e| Error::at_path(path, e))
}

pub fn read_color(path: &Path) -> Result<ColorImage> {
    pnm_to_color(&read_pnm(path)?).map_err(|e| Error::at_path(path, e))
}

pub fn read_depth(path: &Path, max_range: f32) -> Result<DepthImage> {
    pnm_to_depth(&read_pnm(path)?, max_range).map_err(|e| Error::at_path(path, e))
}
