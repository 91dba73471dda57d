//! Per-component mean motion, the motion-aligned edge filter and the
//! line-sweep fill that turns retained edges into areas.

use crate::error::{ensure_dims, Error, Result};
use crate::imaging::{BinaryMask, FlowField, LabelImage, Raster};

/// Components moving slower than this (pixels/frame) keep all their edges.
pub const STATIONARY_FLOW: f32 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentFlow {
    pub label: u32,
    pub mean_u: f32,
    pub mean_v: f32,
    pub pixel_count: usize,
}

impl ComponentFlow {
    pub fn magnitude(&self) -> f32 {
        self.mean_u.hypot(self.mean_v)
    }
}

/// Arithmetic mean of the flow over each labelled component, sorted by label.
pub fn mean_flow_per_component(labels: &LabelImage, flow: &FlowField) -> Result<Vec<ComponentFlow>> {
    ensure_dims(labels.dims(), flow.dims())?;
    let k = labels.len();
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); k + 1];
    for ((&l, &u), &v) in labels.data().iter().zip(flow.u()).zip(flow.v()) {
        if l == 0 {
            continue;
        }
        let s = &mut sums[l as usize];
        s.0 += u as f64;
        s.1 += v as f64;
        s.2 += 1;
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .skip(1)
        .filter(|(_, s)| s.2 > 0)
        .map(|(l, (su, sv, n))| ComponentFlow {
            label: l as u32,
            mean_u: (su / n as f64) as f32,
            mean_v: (sv / n as f64) as f32,
            pixel_count: n,
        })
        .collect())
}

/// Unsigned angle in `[0, π/2]` between the line through `a` and the line
/// through `b`.
#[inline]
pub fn line_angle(a: (f32, f32), b: (f32, f32)) -> f32 {
    let cross = a.0 * b.1 - a.1 * b.0;
    let dot = a.0 * b.0 + a.1 * b.1;
    cross.abs().atan2(dot.abs())
}

/// Keeps labelled edge pixels whose tangent (perpendicular to the image
/// gradient) lies within `theta_max` of their component's mean motion.
pub fn angular_threshold(
    edges: &BinaryMask,
    labels: &LabelImage,
    flows: &[ComponentFlow],
    gx: &Raster<f32>,
    gy: &Raster<f32>,
    theta_max: f32,
) -> Result<BinaryMask> {
    let dims = edges.dims();
    ensure_dims(dims, labels.dims())?;
    ensure_dims(dims, gx.dims())?;
    ensure_dims(dims, gy.dims())?;
    if !(theta_max > 0.0 && theta_max < std::f32::consts::FRAC_PI_2) {
        return Err(Error::invalid(
            "theta_max",
            format!("{theta_max} rad outside (0, pi/2)"),
        ));
    }

    let mut by_label: Vec<Option<&ComponentFlow>> = vec![None; labels.len() + 1];
    for f in flows {
        if let Some(slot) = by_label.get_mut(f.label as usize) {
            *slot = Some(f);
        }
    }

    let (w, h) = dims;
    let mut out = BinaryMask::new(w, h);
    for (x, y) in edges.iter_set() {
        let l = labels.get(x, y);
        if l == 0 {
            continue;
        }
        let flow = by_label
            .get(l as usize)
            .copied()
            .flatten()
            .ok_or(Error::MissingFlow(l))?;
        let keep = if flow.magnitude() < STATIONARY_FLOW {
            true
        } else {
            let (dx, dy) = (gx.get(x, y), gy.get(x, y));
            if dx == 0.0 && dy == 0.0 {
                false
            } else {
                let tangent = (-dy, dx);
                line_angle(tangent, (flow.mean_u, flow.mean_v)) < theta_max
            }
        };
        if keep {
            out.set(x, y, true);
        }
    }
    Ok(out)
}

/// For each component and row, fills the span between the leftmost and
/// rightmost retained pixels of that component when there are at least two,
/// restricted to pixels carrying the component's label.
pub fn scanline_fill(retained: &BinaryMask, labels: &LabelImage) -> Result<BinaryMask> {
    ensure_dims(retained.dims(), labels.dims())?;
    let (w, h) = retained.dims();
    let mut out = retained.clone();
    // per-row extent: (min_x, max_x, count) indexed by label
    let mut spans: Vec<(usize, usize, usize)> = vec![(usize::MAX, 0, 0); labels.len() + 1];
    let mut touched: Vec<u32> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !retained.get(x, y) {
                continue;
            }
            let l = labels.get(x, y);
            if l == 0 {
                continue;
            }
            let s = &mut spans[l as usize];
            if s.2 == 0 {
                touched.push(l);
            }
            s.0 = s.0.min(x);
            s.1 = s.1.max(x);
            s.2 += 1;
        }
        for &l in &touched {
            let (lo, hi, count) = spans[l as usize];
            if count >= 2 {
                for x in lo..=hi {
                    if labels.get(x, y) == l {
                        out.set(x, y, true);
                    }
                }
            }
            spans[l as usize] = (usize::MAX, 0, 0);
        }
        touched.clear();
    }
    Ok(out)
}
