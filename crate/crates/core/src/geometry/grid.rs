use nalgebra::Vector3;

use super::{Homography, PinholeCamera};
use crate::error::{ensure_dims, Error, Result};
use crate::imaging::{BinaryMask, DepthImage};

/// Pixels whose ground footprint spans more cells than this only mark the
/// cell under their centre.
pub const MAX_PIXEL_FOOTPRINT_CELLS: usize = 4096;

/// Metric top-view raster. Cell `(col, row)` covers
/// `[origin_x + col·cell_size, origin_x + (col+1)·cell_size)` and likewise
/// for rows along the second ground axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub cols: usize,
    pub rows: usize,
}

impl GridSpec {
    pub fn new(origin_x: f64, origin_y: f64, cell_size: f64, cols: usize, rows: usize) -> Result<Self> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::invalid("cell_size", format!("{cell_size} must be positive")));
        }
        if cols == 0 || rows == 0 {
            return Err(Error::invalid("grid", format!("{cols}x{rows} cells")));
        }
        if !(origin_x.is_finite() && origin_y.is_finite()) {
            return Err(Error::invalid("origin", "non-finite"));
        }
        Ok(Self {
            origin_x,
            origin_y,
            cell_size,
            cols,
            rows,
        })
    }

    /// 100 m × 30 m at 0.1 m per cell.
    pub fn outdoor_default() -> Self {
        Self::new(0.0, 0.0, 0.1, 1000, 300).expect("valid constant")
    }

    /// 20 m × 10 m at 0.05 m per cell, used by the synthetic scenes.
    pub fn synthetic_default() -> Self {
        Self::new(0.0, 0.0, 0.05, 400, 200).expect("valid constant")
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.cols, self.rows)
    }

    pub fn empty_mask(&self) -> BinaryMask {
        BinaryMask::new(self.cols, self.rows)
    }

    /// Continuous cell coordinates of a ground point.
    #[inline]
    pub fn to_cell_coords(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.origin_x) / self.cell_size,
            (y - self.origin_y) / self.cell_size,
        )
    }

    #[inline]
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (cx, cy) = self.to_cell_coords(x, y);
        let (c, r) = (cx.floor(), cy.floor());
        if c >= 0.0 && r >= 0.0 && c < self.cols as f64 && r < self.rows as f64 {
            Some((c as usize, r as usize))
        } else {
            None
        }
    }

    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.cell_size,
            self.origin_y + (row as f64 + 0.5) * self.cell_size,
        )
    }
}

/// Which world axes span the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroundAxes {
    /// Ground is `Z = 0`, height along Z (RGB homographies).
    #[default]
    XY,
    /// Height along Y; ground coordinates are `(X, Z)` (depth cameras).
    XZ,
}

impl GroundAxes {
    #[inline]
    pub fn project(self, p: &Vector3<f64>) -> (f64, f64) {
        match self {
            GroundAxes::XY => (p.x, p.y),
            GroundAxes::XZ => (p.x, p.z),
        }
    }
}

/// Forward-maps every true pixel through `h` into the grid. Each pixel marks
/// the cell under its centre plus the cell rectangle covered by its four
/// mapped corners.
pub fn warp_mask_to_grid(mask: &BinaryMask, h: &Homography, spec: &GridSpec) -> BinaryMask {
    let mut out = spec.empty_mask();
    for (px, py) in mask.iter_set() {
        let (x, y) = (px as f64, py as f64);
        let (cx, cy, cw) = h.apply_homogeneous(x, y);
        if cw.abs() <= super::HORIZON_EPS {
            continue;
        }
        if let Some((c, r)) = spec.cell_of(cx / cw, cy / cw) {
            out.set(c, r, true);
        }

        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut ok = true;
        for (dx, dy) in [(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)] {
            let (qx, qy, qw) = h.apply_homogeneous(x + dx, y + dy);
            // a corner across the horizon has no finite image on the ground
            if qw.abs() <= super::HORIZON_EPS || qw.signum() != cw.signum() {
                ok = false;
                break;
            }
            let (gx, gy) = spec.to_cell_coords(qx / qw, qy / qw);
            lo = (lo.0.min(gx), lo.1.min(gy));
            hi = (hi.0.max(gx), hi.1.max(gy));
        }
        if !ok {
            continue;
        }
        fill_cell_rect(&mut out, spec, lo, hi);
    }
    out
}

fn fill_cell_rect(out: &mut BinaryMask, spec: &GridSpec, lo: (f64, f64), hi: (f64, f64)) {
    let c0 = lo.0.floor();
    let r0 = lo.1.floor();
    let c1 = (hi.0.ceil() - 1.0).max(c0);
    let r1 = (hi.1.ceil() - 1.0).max(r0);
    if c1 < 0.0 || r1 < 0.0 || c0 >= spec.cols as f64 || r0 >= spec.rows as f64 {
        return;
    }
    let span = (c1 - c0 + 1.0) * (r1 - r0 + 1.0);
    if span > MAX_PIXEL_FOOTPRINT_CELLS as f64 {
        return;
    }
    let c0 = c0.max(0.0) as usize;
    let r0 = r0.max(0.0) as usize;
    let c1 = (c1 as usize).min(spec.cols - 1);
    let r1 = (r1 as usize).min(spec.rows - 1);
    for r in r0..=r1 {
        for c in c0..=c1 {
            out.set(c, r, true);
        }
    }
}

/// Marks the grid cell under each point after dropping its height.
pub fn points_to_grid<'a>(
    points: impl IntoIterator<Item = &'a Vector3<f64>>,
    spec: &GridSpec,
    axes: GroundAxes,
) -> BinaryMask {
    let mut out = spec.empty_mask();
    for p in points {
        let (gx, gy) = axes.project(p);
        if let Some((c, r)) = spec.cell_of(gx, gy) {
            out.set(c, r, true);
        }
    }
    out
}

/// Backprojects masked pixels with valid depth and marks their `(X, Z)`
/// ground cell.
pub fn depth_mask_to_grid(
    depth: &DepthImage,
    mask: &BinaryMask,
    cam: &PinholeCamera,
    spec: &GridSpec,
) -> Result<BinaryMask> {
    depth_mask_to_grid_with_axes(depth, mask, cam, spec, GroundAxes::XZ)
}

pub fn depth_mask_to_grid_with_axes(
    depth: &DepthImage,
    mask: &BinaryMask,
    cam: &PinholeCamera,
    spec: &GridSpec,
    axes: GroundAxes,
) -> Result<BinaryMask> {
    ensure_dims(depth.dims(), mask.dims())?;
    let mut out = spec.empty_mask();
    for (x, y) in mask.iter_set() {
        let d = depth.get(x, y);
        let Ok(p) = cam.backproject(x as f64, y as f64, d as f64) else {
            continue;
        };
        let (gx, gy) = axes.project(&p);
        if let Some((c, r)) = spec.cell_of(gx, gy) {
            out.set(c, r, true);
        }
    }
    Ok(out)
}
