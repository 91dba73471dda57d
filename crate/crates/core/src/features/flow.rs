//! Coarse-to-fine Horn–Schunck optical flow.
//!
//! Each level warps the current frame by the flow inherited from the coarser
//! level, linearizes brightness constancy around it and runs Jacobi sweeps of
//! the regularized system on the total flow.

use crate::error::{ensure_dims, Error, Result};
use crate::imaging::{convolve_separable, gaussian_kernel, FlowField, GrayImage, Raster};

/// Coarsest pyramid level is never reduced below this many pixels per side.
const MIN_LEVEL_SIZE: usize = 8;

/// Intensity scale at which `alpha` is expressed (8-bit units).
const INTENSITY_SCALE: f32 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    /// Smoothness weight, in 8-bit intensity units.
    pub alpha: f32,
    pub iterations: usize,
    pub pyramid_levels: usize,
    pub presmooth_sigma: f32,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            alpha: 10.0,
            iterations: 100,
            pyramid_levels: 3,
            presmooth_sigma: 1.0,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid("alpha", format!("{} must be positive", self.alpha)));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", "must be at least 1"));
        }
        if self.pyramid_levels == 0 {
            return Err(Error::invalid("pyramid_levels", "must be at least 1"));
        }
        if !(self.presmooth_sigma.is_finite() && self.presmooth_sigma >= 0.0) {
            return Err(Error::invalid(
                "presmooth_sigma",
                format!("{} must be non-negative", self.presmooth_sigma),
            ));
        }
        Ok(())
    }
}

pub fn dense_flow(prev: &GrayImage, curr: &GrayImage, params: &FlowParams) -> Result<FlowField> {
    ensure_dims(prev.dims(), curr.dims())?;
    params.validate()?;
    let (w, h) = prev.dims();
    if w == 0 || h == 0 {
        return Ok(FlowField::zeros(w, h));
    }

    let smooth = |img: &GrayImage| -> Result<Raster<f32>> {
        if params.presmooth_sigma > 0.0 {
            Ok(convolve_separable(
                img.as_raster(),
                &gaussian_kernel(params.presmooth_sigma)?,
            ))
        } else {
            Ok(img.as_raster().clone())
        }
    };
    let prev_pyr = pyramid(smooth(prev)?, params.pyramid_levels);
    let curr_pyr = pyramid(smooth(curr)?, params.pyramid_levels);

    let alpha_sq = params.alpha * params.alpha;
    let mut flow: Option<(Raster<f32>, Raster<f32>)> = None;
    for (p, c) in prev_pyr.iter().zip(&curr_pyr).rev() {
        let (lw, lh) = p.dims();
        let (u0, v0) = match flow.take() {
            Some((u, v)) => (upsample_flow(&u, lw, lh), upsample_flow(&v, lw, lh)),
            None => (Raster::filled(lw, lh, 0.0), Raster::filled(lw, lh, 0.0)),
        };
        flow = Some(refine_level(p, c, u0, v0, alpha_sq, params.iterations));
    }
    let (u, v) = flow.expect("at least one level");
    FlowField::from_vecs(w, h, u.into_vec(), v.into_vec())
}

fn pyramid(base: Raster<f32>, levels: usize) -> Vec<Raster<f32>> {
    let mut out = vec![base];
    while out.len() < levels {
        let last = out.last().expect("non-empty");
        let (w, h) = last.dims();
        if w.div_ceil(2) < MIN_LEVEL_SIZE || h.div_ceil(2) < MIN_LEVEL_SIZE {
            break;
        }
        out.push(downsample(last));
    }
    out
}

/// 2×2 box average; odd trailing rows/columns are edge-clamped.
fn downsample(src: &Raster<f32>) -> Raster<f32> {
    let (w, h) = src.dims();
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    let mut data = Vec::with_capacity(nw * nh);
    for y in 0..nh {
        let (y0, y1) = (2 * y, (2 * y + 1).min(h - 1));
        for x in 0..nw {
            let (x0, x1) = (2 * x, (2 * x + 1).min(w - 1));
            data.push(0.25 * (src.get(x0, y0) + src.get(x1, y0) + src.get(x0, y1) + src.get(x1, y1)));
        }
    }
    Raster::from_vec(nw, nh, data).expect("sized")
}

#[inline]
fn bilinear(src: &Raster<f32>, x: f32, y: f32) -> f32 {
    let (w, h) = src.dims();
    let x = x.clamp(0.0, (w - 1) as f32);
    let y = y.clamp(0.0, (h - 1) as f32);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f32;
    let fy = y - y0 as f32;
    let top = src.get(x0, y0) * (1.0 - fx) + src.get(x1, y0) * fx;
    let bottom = src.get(x0, y1) * (1.0 - fx) + src.get(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

fn upsample_flow(coarse: &Raster<f32>, w: usize, h: usize) -> Raster<f32> {
    let (cw, ch) = coarse.dims();
    let (sx, sy) = (cw as f32 / w as f32, ch as f32 / h as f32);
    // displacements are rescaled with the resolution; both axes share a factor
    let gain = w as f32 / cw as f32;
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        let cy = (y as f32 + 0.5) * sy - 0.5;
        for x in 0..w {
            let cx = (x as f32 + 0.5) * sx - 0.5;
            data.push(gain * bilinear(coarse, cx, cy));
        }
    }
    Raster::from_vec(w, h, data).expect("sized")
}

fn refine_level(
    prev: &Raster<f32>,
    curr: &Raster<f32>,
    u0: Raster<f32>,
    v0: Raster<f32>,
    alpha_sq: f32,
    iterations: usize,
) -> (Raster<f32>, Raster<f32>) {
    let (w, h) = prev.dims();
    let n = w * h;

    let mut warped = vec![0.0f32; n];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            warped[i] = bilinear(curr, x as f32 + u0.data()[i], y as f32 + v0.data()[i]);
        }
    }

    let mut ix = vec![0.0f32; n];
    let mut iy = vec![0.0f32; n];
    let mut residual = vec![0.0f32; n];
    let mut denom = vec![0.0f32; n];
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let i = y * w + x;
            let dx = 0.25 * ((prev.get(xp, y) - prev.get(xm, y)) + (warped[y * w + xp] - warped[y * w + xm]));
            let dy = 0.25 * ((prev.get(x, yp) - prev.get(x, ym)) + (warped[yp * w + x] - warped[ym * w + x]));
            let dt = warped[i] - prev.data()[i];
            let (gx, gy, gt) = (dx * INTENSITY_SCALE, dy * INTENSITY_SCALE, dt * INTENSITY_SCALE);
            ix[i] = gx;
            iy[i] = gy;
            // brightness constancy linearized around the inherited flow
            residual[i] = gt - gx * u0.data()[i] - gy * v0.data()[i];
            denom[i] = alpha_sq + gx * gx + gy * gy;
        }
    }

    let mut u = u0.into_vec();
    let mut v = v0.into_vec();
    let mut un = vec![0.0f32; n];
    let mut vn = vec![0.0f32; n];
    for _ in 0..iterations {
        for y in 0..h {
            let rows = [y.saturating_sub(1) * w, y * w, (y + 1).min(h - 1) * w];
            let row = y * w;
            let sweep = |x: usize, xm: usize, xp: usize, un: &mut [f32], vn: &mut [f32]| {
                let avg = |f: &[f32]| {
                    let [a, b, c] = [
                        &f[rows[0]..rows[0] + w],
                        &f[rows[1]..rows[1] + w],
                        &f[rows[2]..rows[2] + w],
                    ];
                    (a[x] + c[x] + b[xm] + b[xp]) / 6.0 + (a[xm] + a[xp] + c[xm] + c[xp]) / 12.0
                };
                let i = row + x;
                let ub = avg(&u);
                let vb = avg(&v);
                let t = (ix[i] * ub + iy[i] * vb + residual[i]) / denom[i];
                un[i] = ub - ix[i] * t;
                vn[i] = vb - iy[i] * t;
            };
            sweep(0, 0, 1.min(w - 1), &mut un, &mut vn);
            if w > 2 {
                interior_row(&u, &v, &mut un, &mut vn, rows, w, &ix, &iy, &residual, &denom);
            }
            if w > 1 {
                sweep(w - 1, w - 2, w - 1, &mut un, &mut vn);
            }
        }
        std::mem::swap(&mut u, &mut un);
        std::mem::swap(&mut v, &mut vn);
    }
    (
        Raster::from_vec(w, h, u).expect("sized"),
        Raster::from_vec(w, h, v).expect("sized"),
    )
}

/// Jacobi update of pixels `1..w-1` of one row; `rows` holds the start
/// offsets of the rows above, at and below.
#[allow(clippy::too_many_arguments)]
#[inline]
fn interior_row(
    u: &[f32],
    v: &[f32],
    un: &mut [f32],
    vn: &mut [f32],
    rows: [usize; 3],
    w: usize,
    ix: &[f32],
    iy: &[f32],
    residual: &[f32],
    denom: &[f32],
) {
    let r = rows[1];
    let (ua, ub, uc) = (&u[rows[0]..rows[0] + w], &u[r..r + w], &u[rows[2]..rows[2] + w]);
    let (va, vb, vc) = (&v[rows[0]..rows[0] + w], &v[r..r + w], &v[rows[2]..rows[2] + w]);
    let (ix, iy, res, den) = (&ix[r..r + w], &iy[r..r + w], &residual[r..r + w], &denom[r..r + w]);
    let (un, vn) = (&mut un[r..r + w], &mut vn[r..r + w]);
    for x in 1..w - 1 {
        let ubar =
            (ua[x] + uc[x] + ub[x - 1] + ub[x + 1]) / 6.0 + (ua[x - 1] + ua[x + 1] + uc[x - 1] + uc[x + 1]) / 12.0;
        let vbar =
            (va[x] + vc[x] + vb[x - 1] + vb[x + 1]) / 6.0 + (va[x - 1] + va[x + 1] + vc[x - 1] + vc[x + 1]) / 12.0;
        let t = (ix[x] * ubar + iy[x] * vbar + res[x]) / den[x];
        un[x] = ubar - ix[x] * t;
        vn[x] = vbar - iy[x] * t;
    }
}
