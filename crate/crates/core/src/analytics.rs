//! Temporal statistics over the fused top view: cumulative occupancy grids,
//! top-view motion and saturation queries.

use std::collections::VecDeque;

use crate::error::{ensure_dims, Error, Result};
use crate::features::{connected_components, dense_flow, FlowParams};
use crate::geometry::GridSpec;
use crate::imaging::{gaussian_blur, BinaryMask, ColorImage, FlowField};

/// Updates between exact recomputations of the sliding mean.
pub const RESYNC_INTERVAL: usize = 1024;

/// Top-view flow magnitude (cells per frame) shown at full saturation.
pub const FLOW_SATURATION: f32 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CumulativeMode {
    FullHistory,
    Sliding { t_span: usize },
}

#[derive(Debug, Clone)]
pub struct CumulativeGrid {
    spec: GridSpec,
    mode: CumulativeMode,
    values: Vec<f64>,
    t: usize,
    ring: VecDeque<Vec<bool>>,
    since_resync: usize,
}

impl CumulativeGrid {
    pub fn new(spec: GridSpec, mode: CumulativeMode) -> Result<Self> {
        if mode == (CumulativeMode::Sliding { t_span: 0 }) {
            return Err(Error::invalid("t_span", "must be at least 1"));
        }
        Ok(Self {
            spec,
            mode,
            values: vec![0.0; spec.cols * spec.rows],
            t: 0,
            ring: VecDeque::new(),
            since_resync: 0,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn mode(&self) -> CumulativeMode {
        self.mode
    }

    /// Frames observed so far.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.spec.cols + col]
    }

    pub fn update(&mut self, occupancy: &BinaryMask) -> Result<()> {
        ensure_dims(self.spec.dims(), occupancy.dims())?;
        self.t += 1;
        let p = occupancy.data();
        match self.mode {
            CumulativeMode::FullHistory => {
                let t = self.t as f64;
                for (a, &o) in self.values.iter_mut().zip(p) {
                    *a += (o as u8 as f64 - *a) / t;
                }
            }
            CumulativeMode::Sliding { t_span } => {
                self.ring.push_back(p.to_vec());
                if self.ring.len() > t_span {
                    let old = self.ring.pop_front().expect("ring holds t_span + 1 frames");
                    let span = t_span as f64;
                    for ((a, &o), &n) in self.values.iter_mut().zip(&old).zip(p) {
                        *a = *a - o as u8 as f64 / span + n as u8 as f64 / span;
                    }
                } else {
                    // warm-up: mean over the frames seen so far
                    let t = self.t as f64;
                    for (a, &o) in self.values.iter_mut().zip(p) {
                        *a += (o as u8 as f64 - *a) / t;
                    }
                }
                self.since_resync += 1;
                if self.since_resync >= RESYNC_INTERVAL {
                    self.resync();
                }
            }
        }
        for a in &mut self.values {
            *a = a.clamp(0.0, 1.0);
        }
        Ok(())
    }

    /// Exact window mean from the stored ring.
    fn resync(&mut self) {
        let n = self.ring.len().max(1) as f64;
        for (i, a) in self.values.iter_mut().enumerate() {
            let count = self.ring.iter().filter(|f| f[i]).count();
            *a = count as f64 / n;
        }
        self.since_resync = 0;
    }

    /// Values as a single-channel f32 raster, row-major.
    pub fn to_f32(&self) -> Vec<f32> {
        self.values.iter().map(|&v| v as f32).collect()
    }
}

pub fn update_cumulative(mut grid: CumulativeGrid, occupancy: &BinaryMask) -> Result<CumulativeGrid> {
    grid.update(occupancy)?;
    Ok(grid)
}

/// Dense flow between two occupancy masks, in cells per frame.
pub fn topview_flow(prev_occ: &BinaryMask, curr_occ: &BinaryMask, params: &FlowParams) -> Result<FlowField> {
    ensure_dims(prev_occ.dims(), curr_occ.dims())?;
    let (w, h) = curr_occ.dims();
    if prev_occ == curr_occ {
        return Ok(FlowField::zeros(w, h));
    }
    let prev = gaussian_blur(&prev_occ.to_gray(), 1.0)?;
    let curr = gaussian_blur(&curr_occ.to_gray(), 1.0)?;
    dense_flow(&prev, &curr, params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturatedCluster {
    pub cells: Vec<(usize, usize)>,
    /// Mean (col, row) of the member cells.
    pub centroid: (f64, f64),
}

impl SaturatedCluster {
    pub fn area(&self) -> usize {
        self.cells.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SaturationReport {
    /// `((col, row), value)` for every cell of a retained cluster.
    pub cells: Vec<((usize, usize), f64)>,
    pub clusters: Vec<SaturatedCluster>,
}

/// Cells at or above `s_min`, grouped into 8-connected clusters of at least
/// `min_cluster` cells; smaller clusters and their cells are dropped.
pub fn saturation_query(grid: &CumulativeGrid, s_min: f64, min_cluster: usize) -> Result<SaturationReport> {
    if !(s_min > 0.0 && s_min <= 1.0) {
        return Err(Error::invalid("s_min", format!("{s_min} outside (0, 1]")));
    }
    let (cols, rows) = grid.spec.dims();
    let mask = BinaryMask::from_vec(cols, rows, grid.values.iter().map(|&v| v >= s_min).collect())?;
    let labels = connected_components(&mask, min_cluster.max(1));
    let mut clusters: Vec<SaturatedCluster> = labels
        .components()
        .iter()
        .map(|c| SaturatedCluster {
            cells: Vec::with_capacity(c.pixel_count),
            centroid: (0.0, 0.0),
        })
        .collect();
    let mut cells = Vec::new();
    for row in 0..rows {
        for col in 0..cols {
            let l = labels.get(col, row);
            if l != 0 {
                clusters[l as usize - 1].cells.push((col, row));
                cells.push(((col, row), grid.value(col, row)));
            }
        }
    }
    for c in &mut clusters {
        let n = c.cells.len() as f64;
        let (sx, sy) = c
            .cells
            .iter()
            .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
        c.centroid = (sx / n, sy / n);
    }
    Ok(SaturationReport { cells, clusters })
}

/// 0 → black, 1 → full blue, linear in between.
pub fn heatmap(grid: &CumulativeGrid) -> ColorImage {
    let (cols, rows) = grid.spec.dims();
    let pixels = grid
        .values
        .iter()
        .map(|&v| [0.0, 0.0, v.clamp(0.0, 1.0) as f32])
        .collect();
    ColorImage::from_pixels(cols, rows, pixels).expect("values clamped to [0, 1]")
}

/// Hue encodes direction, saturation the magnitude up to
/// [`FLOW_SATURATION`]; zero motion is white.
pub fn flow_visualization(flow: &FlowField) -> ColorImage {
    let (w, h) = flow.dims();
    let pixels = flow
        .u()
        .iter()
        .zip(flow.v())
        .map(|(&u, &v)| {
            let mag = (u * u + v * v).sqrt();
            let sat = (mag / FLOW_SATURATION).min(1.0);
            let hue = (v.atan2(u).to_degrees() + 360.0) % 360.0;
            hsv_to_rgb(hue, sat, 1.0)
        })
        .collect();
    ColorImage::from_pixels(w, h, pixels).expect("hsv output in [0, 1]")
}

fn hsv_to_rgb(h: f32, s: f32, v: f32) -> [f32; 3] {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [
        (r + m).clamp(0.0, 1.0),
        (g + m).clamp(0.0, 1.0),
        (b + m).clamp(0.0, 1.0),
    ]
}
