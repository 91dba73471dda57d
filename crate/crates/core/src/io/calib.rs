//! Plain-text calibration files.
//!
//! ```text
//! # image → ground plane
//! HOMOGRAPHY
//! h00 h01 h02 h10 h11 h12 h20 h21 h22
//! ```
//!
//! or `PINHOLE` followed by `fx fy cx cy`, nine rotation entries and three
//! translation entries, all row-major. `#` starts a comment.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::geometry::{check_rotation, orthonormalize, Homography, PinholeCamera, ROTATION_TOL};
use crate::pipeline::Calibration;

/// Rotations further than this from orthonormal are rejected on load.
pub const PARSE_ROTATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibError {
    #[error("empty calibration")]
    Empty,
    #[error("unknown calibration kind `{0}`")]
    UnknownKind(String),
    #[error("{kind} expects {expected} numbers, found {found}")]
    TokenCount {
        kind: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("`{0}` is not a finite number")]
    BadNumber(String),
    #[error("rotation is not orthonormal within {PARSE_ROTATION_TOL:e}")]
    NonOrthonormal,
    #[error("homography is singular")]
    Singular,
    #[error("invalid intrinsics: {0}")]
    Intrinsics(String),
}

fn tokens(text: &str) -> Vec<&str> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace)
        .collect()
}

fn numbers(kind: &'static str, toks: &[&str], expected: usize) -> Result<Vec<f64>, CalibError> {
    if toks.len() != expected {
        return Err(CalibError::TokenCount {
            kind,
            expected,
            found: toks.len(),
        });
    }
    toks.iter()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CalibError::BadNumber(t.to_string()))
        })
        .collect()
}

pub fn parse_calibration(text: &str) -> Result<Calibration, CalibError> {
    let toks = tokens(text);
    let (&kind, rest) = toks.split_first().ok_or(CalibError::Empty)?;
    match kind {
        "HOMOGRAPHY" => {
            let v = numbers("HOMOGRAPHY", rest, 9)?;
            let m = Matrix3::from_row_slice(&v);
            Homography::new(m)
                .map(Calibration::Homography)
                .map_err(|_| CalibError::Singular)
        }
        "PINHOLE" => {
            let v = numbers("PINHOLE", rest, 16)?;
            let mut r = Matrix3::from_row_slice(&v[4..13]);
            let t = Vector3::new(v[13], v[14], v[15]);
            if check_rotation(&r, ROTATION_TOL).is_err() {
                check_rotation(&r, PARSE_ROTATION_TOL).map_err(|_| CalibError::NonOrthonormal)?;
                r = orthonormalize(&r);
            }
            PinholeCamera::new(v[0], v[1], v[2], v[3], r, t)
                .map(Calibration::Pinhole)
                .map_err(|e| CalibError::Intrinsics(e.to_string()))
        }
        other => Err(CalibError::UnknownKind(other.to_string())),
    }
}

fn row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let line: Vec<String> = values.into_iter().map(|v| format!("{v:?}")).collect();
    out.push_str(&line.join(" "));
    out.push('\n');
}

/// Shortest round-tripping decimal for every entry.
pub fn serialize_calibration(calib: &Calibration) -> String {
    let mut out = String::new();
    match calib {
        Calibration::Homography(h) => {
            out.push_str("HOMOGRAPHY\n");
            let m = h.to_row_major();
            for r in m.chunks(3) {
                row(&mut out, r.iter().copied());
            }
        }
        Calibration::Pinhole(c) => {
            out.push_str("PINHOLE\n");
            row(&mut out, [c.fx, c.fy, c.cx, c.cy]);
            let r = c.rotation();
            for i in 0..3 {
                row(&mut out, (0..3).map(|j| r[(i, j)]));
            }
            row(&mut out, c.translation().iter().copied());
        }
    }
    out
}

pub fn read_calibration(path: &Path) -> Result<Calibration> {
    let text = fs::read_to_string(path).map_err(|e| Error::at_path(path, e))?;
    parse_calibration(&text).map_err(|e| Error::at_path(path, e))
}
