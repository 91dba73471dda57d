use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::imaging::{gaussian_blur, sobel_raster, BinaryMask, GrayImage, Raster};

/// Sobel responses are divided by this so that magnitudes read as intensity
/// change per pixel.
pub const SOBEL_NORM: f32 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyParams {
    pub low: f32,
    pub high: f32,
    pub sigma: f32,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            low: 0.04,
            high: 0.10,
            sigma: 1.4,
        }
    }
}

/// Edges plus the smoothed gradients they were extracted from. The pipeline
/// reuses the gradients for the angular threshold.
#[derive(Debug, Clone)]
pub struct EdgeMap {
    pub edges: BinaryMask,
    pub gx: Raster<f32>,
    pub gy: Raster<f32>,
}

pub fn canny(img: &GrayImage, low: f32, high: f32, sigma: f32) -> Result<BinaryMask> {
    Ok(canny_with_gradients(img, low, high, sigma)?.edges)
}

/// Gaussian smoothing, Sobel gradients, non-maximum suppression and
/// 8-connected hysteresis. Thresholds are on `|∇I| / 8`.
pub fn canny_with_gradients(img: &GrayImage, low: f32, high: f32, sigma: f32) -> Result<EdgeMap> {
    if !(low > 0.0 && low < high) {
        return Err(Error::invalid(
            "canny thresholds",
            format!("need 0 < low < high, got low={low} high={high}"),
        ));
    }
    let (w, h) = img.dims();
    if w < 3 || h < 3 {
        return Err(Error::invalid("image", format!("{w}x{h} too small for Canny")));
    }
    let smooth = gaussian_blur(img, sigma)?;
    let (gx, gy) = sobel_raster(smooth.as_raster());
    let mag: Vec<f32> = gx
        .data()
        .iter()
        .zip(gy.data())
        .map(|(a, b)| a.hypot(*b) / SOBEL_NORM)
        .collect();

    let thin = non_maximum_suppression(&mag, &gx, &gy, w, h);
    let edges = hysteresis(&thin, w, h, low, high);
    Ok(EdgeMap { edges, gx, gy })
}

fn non_maximum_suppression(mag: &[f32], gx: &Raster<f32>, gy: &Raster<f32>, w: usize, h: usize) -> Vec<f32> {
    let at = |x: isize, y: isize| -> f32 {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        mag[y * w + x]
    };
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let m = mag[y * w + x];
            if m == 0.0 {
                continue;
            }
            let mut angle = gy.get(x, y).atan2(gx.get(x, y)).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            // neighbours along the gradient direction, "behind" then "ahead"
            let (dx, dy) = if !(22.5..157.5).contains(&angle) {
                (1, 0)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let (xi, yi) = (x as isize, y as isize);
            let behind = at(xi - dx, yi - dy);
            let ahead = at(xi + dx, yi + dy);
            // asymmetric tie-break keeps plateaus one pixel thick
            if m > behind && m >= ahead {
                out[y * w + x] = m;
            }
        }
    }
    out
}

fn hysteresis(thin: &[f32], w: usize, h: usize, low: f32, high: f32) -> BinaryMask {
    let mut out = BinaryMask::new(w, h);
    let mut queue = VecDeque::new();
    for (i, &m) in thin.iter().enumerate() {
        if m >= high {
            out.set(i % w, i / w, true);
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                if !out.get(nx, ny) && thin[ny * w + nx] >= low {
                    out.set(nx, ny, true);
                    queue.push_back(ny * w + nx);
                }
            }
        }
    }
    out
}
