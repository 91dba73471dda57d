use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{CameraRig, Scenario};
use crate::error::{Error, Result};
use crate::imaging::{ColorImage, DepthImage};
use crate::pipeline::ViewKind;

pub const SKY: [f32; 3] = [0.62, 0.74, 0.92];

#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Color(ColorImage),
    Depth(DepthImage),
}

#[derive(Debug, Clone, Copy)]
struct Cylinder {
    cx: f64,
    cy: f64,
    r: f64,
    h: f64,
    albedo: [f32; 3],
}

enum Surface {
    Agent(usize),
    Ground(f64, f64),
    Sky,
}

fn cylinders(s: &Scenario, t: usize) -> Vec<Cylinder> {
    s.agents
        .iter()
        .filter(|a| a.present(t))
        .map(|a| {
            let (cx, cy) = a.position(t);
            Cylinder {
                cx,
                cy,
                r: a.radius,
                h: a.height,
                albedo: a.albedo,
            }
        })
        .collect()
}

/// Ray parameter of the first hit of `o + s·d` with a capped vertical
/// cylinder, if any.
fn hit_cylinder(o: &Vector3<f64>, d: &Vector3<f64>, c: &Cylinder) -> Option<f64> {
    let (ox, oy) = (o.x - c.cx, o.y - c.cy);
    let mut best: Option<f64> = None;
    let a = d.x * d.x + d.y * d.y;
    if a > 0.0 {
        let b = 2.0 * (ox * d.x + oy * d.y);
        let cc = ox * ox + oy * oy - c.r * c.r;
        let disc = b * b - 4.0 * a * cc;
        if disc >= 0.0 {
            let s = (-b - disc.sqrt()) / (2.0 * a);
            let z = o.z + s * d.z;
            if s > 0.0 && (0.0..=c.h).contains(&z) {
                best = Some(s);
            }
        }
    }
    if d.z != 0.0 {
        let s = (c.h - o.z) / d.z;
        if s > 0.0 {
            let (x, y) = (ox + s * d.x, oy + s * d.y);
            if x * x + y * y <= c.r * c.r && best.is_none_or(|b| s < b) {
                best = Some(s);
            }
        }
    }
    best
}

/// Nearest surface along the ray and its parameter. With `d` scaled to unit
/// camera-z, the parameter equals the camera depth.
fn trace(o: &Vector3<f64>, d: &Vector3<f64>, cyls: &[Cylinder]) -> (Surface, f64) {
    let mut best = (Surface::Sky, f64::INFINITY);
    if d.z < 0.0 {
        let s = -o.z / d.z;
        best = (Surface::Ground(o.x + s * d.x, o.y + s * d.y), s);
    }
    for (i, c) in cyls.iter().enumerate() {
        if let Some(s) = hit_cylinder(o, d, c) {
            if s < best.1 {
                best = (Surface::Agent(i), s);
            }
        }
    }
    best
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    let h = splitmix(seed ^ splitmix(ix as u64 ^ splitmix(iy as u64)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (fx, fy) = (x.floor(), y.floor());
    let (ix, iy) = (fx as i64, fy as i64);
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let (tx, ty) = (smooth(x - fx), smooth(y - fy));
    let a = lattice(seed, ix, iy) * (1.0 - tx) + lattice(seed, ix + 1, iy) * tx;
    let b = lattice(seed, ix, iy + 1) * (1.0 - tx) + lattice(seed, ix + 1, iy + 1) * tx;
    a * (1.0 - ty) + b * ty
}

fn ground_color(seed: u64, x: f64, y: f64) -> [f32; 3] {
    let n = 0.6 * value_noise(seed, x / 0.6, y / 0.6) + 0.4 * value_noise(seed ^ 0x5EED, x / 0.17, y / 0.17);
    let b = (0.56 + 0.2 * n) as f32;
    [b, b * 0.98, b * 0.88]
}

fn noise_rng(s: &Scenario, camera: usize, t: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(s.seed ^ splitmix(camera as u64 ^ splitmix(t as u64 ^ 0xD1CE))))
}

fn quantize8(v: f32) -> f32 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

fn rays(rig: &CameraRig) -> impl Iterator<Item = Vector3<f64>> + '_ {
    (0..rig.height).flat_map(move |y| (0..rig.width).map(move |x| rig.camera.ray_direction(x as f64, y as f64)))
}

/// Subsamples per axis for pixels on a surface boundary.
const SUPERSAMPLE: usize = 4;

fn shade(s: &Scenario, surface: Surface, cyls: &[Cylinder]) -> [f32; 3] {
    match surface {
        Surface::Agent(i) => cyls[i].albedo,
        Surface::Ground(x, y) => ground_color(s.seed, x, y),
        Surface::Sky => SKY,
    }
}

fn surface_id(surface: &Surface) -> usize {
    match surface {
        Surface::Agent(i) => *i,
        Surface::Ground(..) => usize::MAX,
        Surface::Sky => usize::MAX - 1,
    }
}

/// Box-filtered render: pixels whose centre sample differs in surface from
/// a 4-neighbour are averaged over a regular subsample grid.
fn rgb(s: &Scenario, rig: &CameraRig, cyls: &[Cylinder], noise: Option<ChaCha8Rng>) -> Result<ColorImage> {
    let o = rig.camera.center();
    let (w, h) = (rig.width, rig.height);
    let centre: Vec<Surface> = rays(rig).map(|d| trace(&o, &d, cyls).0).collect();
    let ids: Vec<usize> = centre.iter().map(surface_id).collect();
    let mut pixels: Vec<[f32; 3]> = Vec::with_capacity(w * h);
    for (i, surface) in centre.into_iter().enumerate() {
        let (x, y) = (i % w, i / w);
        let boundary = (x > 0 && ids[i - 1] != ids[i])
            || (x + 1 < w && ids[i + 1] != ids[i])
            || (y > 0 && ids[i - w] != ids[i])
            || (y + 1 < h && ids[i + w] != ids[i]);
        if !boundary {
            pixels.push(shade(s, surface, cyls));
            continue;
        }
        let mut acc = [0.0f32; 3];
        for sy in 0..SUPERSAMPLE {
            for sx in 0..SUPERSAMPLE {
                let off = |k: usize| (k as f64 + 0.5) / SUPERSAMPLE as f64 - 0.5;
                let d = rig.camera.ray_direction(x as f64 + off(sx), y as f64 + off(sy));
                let c = shade(s, trace(&o, &d, cyls).0, cyls);
                for (a, v) in acc.iter_mut().zip(c) {
                    *a += v;
                }
            }
        }
        pixels.push(acc.map(|a| a / (SUPERSAMPLE * SUPERSAMPLE) as f32));
    }
    if let Some(mut rng) = noise {
        let normal = Normal::new(0.0, s.noise_sigma).map_err(|e| Error::invalid("noise_sigma", e.to_string()))?;
        for c in pixels.iter_mut().flatten() {
            *c += normal.sample(&mut rng);
        }
    }
    for c in pixels.iter_mut().flatten() {
        *c = quantize8(*c);
    }
    ColorImage::from_pixels(rig.width, rig.height, pixels)
}

fn depth(s: &Scenario, rig: &CameraRig, cyls: &[Cylinder], noise: Option<ChaCha8Rng>) -> Result<DepthImage> {
    let o = rig.camera.center();
    let max = rig.max_range as f64;
    let mut values: Vec<f64> = rays(rig)
        .map(|d| match trace(&o, &d, cyls) {
            (Surface::Sky, _) => 0.0,
            (_, s) => s,
        })
        .collect();
    if let Some(mut rng) = noise {
        let normal =
            Normal::new(0.0, s.noise_sigma as f64).map_err(|e| Error::invalid("noise_sigma", e.to_string()))?;
        for v in values.iter_mut().filter(|v| **v > 0.0) {
            *v += normal.sample(&mut rng);
        }
    }
    let data = values
        .into_iter()
        .map(|v| {
            let mm = (v * 1000.0).round();
            if mm <= 0.0 || mm > max * 1000.0 {
                0.0
            } else {
                (mm / 1000.0) as f32
            }
        })
        .collect();
    DepthImage::from_vec(rig.width, rig.height, data, rig.max_range)
}

fn noise_for(s: &Scenario, camera: usize, t: usize) -> Option<ChaCha8Rng> {
    (s.noise_sigma > 0.0).then(|| noise_rng(s, camera, t))
}

fn rig_of_kind(s: &Scenario, camera: usize, kind: ViewKind) -> Result<CameraRig> {
    let rig = s.rig(camera)?;
    if rig.kind != kind {
        return Err(Error::invalid(
            "camera",
            format!("camera {camera} is a {} camera", rig.kind),
        ));
    }
    Ok(rig)
}

pub fn render_rgb(s: &Scenario, camera: usize, t: usize) -> Result<ColorImage> {
    s.check_frame(t)?;
    let rig = rig_of_kind(s, camera, ViewKind::Rgb)?;
    rgb(s, &rig, &cylinders(s, t), noise_for(s, camera, t))
}

pub fn render_depth(s: &Scenario, camera: usize, t: usize) -> Result<DepthImage> {
    s.check_frame(t)?;
    let rig = rig_of_kind(s, camera, ViewKind::Depth)?;
    depth(s, &rig, &cylinders(s, t), noise_for(s, camera, t))
}

/// Deterministic render of frame `t`; noise is seeded by `(seed, camera, t)`.
pub fn render_frame(s: &Scenario, camera: usize, t: usize) -> Result<Frame> {
    match s.rig(camera)?.kind {
        ViewKind::Rgb => render_rgb(s, camera, t).map(Frame::Color),
        ViewKind::Depth => render_depth(s, camera, t).map(Frame::Depth),
    }
}

/// The empty scene without noise.
pub fn render_background(s: &Scenario, camera: usize) -> Result<Frame> {
    let rig = s.rig(camera)?;
    Ok(match rig.kind {
        ViewKind::Rgb => Frame::Color(rgb(s, &rig, &[], None)?),
        ViewKind::Depth => Frame::Depth(depth(s, &rig, &[], None)?),
    })
}
