#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use topgrid::geometry::GridSpec;
use topgrid::imaging::{BinaryMask, ColorImage, DepthImage};
use topgrid::pipeline::ViewKind;
use topgrid::pipeline::{BackgroundModel, ViewConfig};
use topgrid::synthgen::{render_background, render_frame, CameraSpec, Frame, Scenario, Waypoint};
use topgrid::synthgen::{Agent, Extent, GridDef};

pub fn rgb_views(s: &Scenario) -> Vec<ViewConfig> {
    s.rigs()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, r)| ViewConfig::rgb(i, r.homography().unwrap()))
        .collect()
}

pub fn depth_views(s: &Scenario) -> Vec<ViewConfig> {
    s.rigs()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, r)| ViewConfig::depth(i, r.depth_calibration().unwrap()))
        .collect()
}

pub fn color_frames(s: &Scenario, t: usize) -> Vec<ColorImage> {
    (0..s.cameras.len())
        .map(|c| match render_frame(s, c, t).unwrap() {
            Frame::Color(img) => img,
            Frame::Depth(_) => panic!("depth camera in an rgb scenario"),
        })
        .collect()
}

pub fn depth_frames(s: &Scenario, t: usize) -> Vec<DepthImage> {
    (0..s.cameras.len())
        .map(|c| match render_frame(s, c, t).unwrap() {
            Frame::Depth(img) => img,
            Frame::Color(_) => panic!("rgb camera in a depth scenario"),
        })
        .collect()
}

pub fn color_backgrounds(s: &Scenario) -> Vec<BackgroundModel<ColorImage>> {
    (0..s.cameras.len())
        .map(|c| match render_background(s, c).unwrap() {
            Frame::Color(img) => BackgroundModel::user_frame(img),
            Frame::Depth(_) => panic!("depth camera in an rgb scenario"),
        })
        .collect()
}

pub fn depth_backgrounds(s: &Scenario) -> Vec<BackgroundModel<DepthImage>> {
    (0..s.cameras.len())
        .map(|c| match render_background(s, c).unwrap() {
            Frame::Depth(img) => BackgroundModel::user_frame(img),
            Frame::Color(_) => panic!("rgb camera in a depth scenario"),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    /// Mean (col, row) of member cells.
    pub centroid: (f64, f64),
    pub area: usize,
}

/// 8-connected clusters of set cells, by flood fill.
pub fn blobs(m: &BinaryMask) -> Vec<Blob> {
    let (w, h) = m.dims();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for start in 0..w * h {
        if !m.data()[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            sx += x as f64;
            sy += y as f64;
            n += 1;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if m.data()[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        out.push(Blob {
            centroid: (sx / n as f64, sy / n as f64),
            area: n,
        });
    }
    out
}

/// 3×3 dilation.
pub fn dilate1(m: &BinaryMask) -> BinaryMask {
    let (w, h) = m.dims();
    BinaryMask::from_fn(w, h, |x, y| {
        (y.saturating_sub(1)..=(y + 1).min(h - 1))
            .any(|yy| (x.saturating_sub(1)..=(x + 1).min(w - 1)).any(|xx| m.get(xx, yy)))
    })
}

/// Intersection over union; two empty masks count as a perfect match.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let pairs = a.data().iter().zip(b.data());
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &q) in pairs {
        inter += (p && q) as usize;
        union += (p || q) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn mask_centroid(m: &BinaryMask) -> Option<(f64, f64)> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for (i, &b) in m.data().iter().enumerate() {
        if b {
            sx += (i % m.width()) as f64;
            sy += (i / m.width()) as f64;
            n += 1;
        }
    }
    (n > 0).then(|| (sx / n as f64, sy / n as f64))
}

/// Ground point in the index coordinates used by `blobs` (cell centres at
/// integers).
pub fn cell_index_coords(spec: &GridSpec, x: f64, y: f64) -> (f64, f64) {
    (
        (x - spec.origin_x) / spec.cell_size - 0.5,
        (y - spec.origin_y) / spec.cell_size - 0.5,
    )
}

pub fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Every file under `root`, keyed by relative path.
pub fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn agent(x: f64, y: f64, albedo: [f32; 3]) -> Agent {
    Agent {
        radius: 0.25,
        height: 1.75,
        albedo,
        waypoints: vec![Waypoint { x, y, frame: 0 }],
        appear_frame: 0,
    }
}

pub fn walker(from: (f64, f64), to: (f64, f64), frames: usize, albedo: [f32; 3]) -> Agent {
    Agent {
        waypoints: vec![
            Waypoint {
                x: from.0,
                y: from.1,
                frame: 0,
            },
            Waypoint {
                x: to.0,
                y: to.1,
                frame: frames - 1,
            },
        ],
        ..agent(from.0, from.1, albedo)
    }
}

pub fn camera(eye: [f64; 3], target: [f64; 3]) -> CameraSpec {
    CameraSpec {
        kind: ViewKind::Rgb,
        width: 320,
        height: 240,
        focal: 280.0,
        eye,
        target,
        max_range: None,
    }
}

/// 20 m × 10 m field at 5 cm cells.
pub fn scene(name: &str, cameras: Vec<CameraSpec>, agents: Vec<Agent>, frame_count: usize) -> Scenario {
    Scenario {
        name: name.into(),
        extent: Extent {
            min_x: 0.0,
            min_y: 0.0,
            max_x: 20.0,
            max_y: 10.0,
        },
        agents,
        cameras,
        frame_count,
        seed: 7,
        noise_sigma: 0.0,
        grid: GridSpec::synthetic_default().into(),
        t_span: 100,
        min_votes: None,
    }
}

pub fn grid_def(spec: &GridSpec) -> GridDef {
    (*spec).into()
}

pub const RED: [f32; 3] = [0.55, 0.05, 0.05];
pub const BLUE: [f32; 3] = [0.05, 0.10, 0.50];
