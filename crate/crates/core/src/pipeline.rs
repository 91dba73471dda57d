//! Per-frame orchestration: background differencing, motion-aligned edge
//! selection and reprojection for every view, followed by the multi-view
//! vote that produces the fused top-view occupancy.

use std::collections::VecDeque;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{ensure_dims, Error, Result};
use crate::features::{
    angular_threshold, canny_with_gradients, connected_components, dense_flow, mean_flow_per_component, scanline_fill,
    CannyParams, ComponentFlow, FlowParams,
};
use crate::geometry::{depth_mask_to_grid, warp_mask_to_grid, GridSpec, Homography, PinholeCamera};
use crate::imaging::{
    color_absdiff_mask, to_gray, BinaryMask, ColorImage, DepthImage, FlowField, GrayImage, LabelImage, Raster,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Foreground,
    Components,
    Gray,
    Flow,
    Edges,
    MeanFlow,
    AngularThreshold,
    ScanlineFill,
    Reproject,
    Fusion,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Foreground,
        Stage::Components,
        Stage::Gray,
        Stage::Flow,
        Stage::Edges,
        Stage::MeanFlow,
        Stage::AngularThreshold,
        Stage::ScanlineFill,
        Stage::Reproject,
        Stage::Fusion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Foreground => "foreground",
            Stage::Components => "components",
            Stage::Gray => "gray",
            Stage::Flow => "flow",
            Stage::Edges => "edges",
            Stage::MeanFlow => "mean_flow",
            Stage::AngularThreshold => "angular_threshold",
            Stage::ScanlineFill => "scanline_fill",
            Stage::Reproject => "reproject",
            Stage::Fusion => "fusion",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    ms: [f64; Stage::ALL.len()],
}

impl StageTimings {
    pub fn get(&self, stage: Stage) -> f64 {
        self.ms[stage.index()]
    }

    pub fn add(&mut self, stage: Stage, ms: f64) {
        self.ms[stage.index()] += ms;
    }

    pub fn accumulate(&mut self, other: &StageTimings) {
        for (a, b) in self.ms.iter_mut().zip(other.ms) {
            *a += b;
        }
    }

    pub fn total(&self) -> f64 {
        self.ms.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Stage, f64)> + '_ {
        Stage::ALL.iter().map(|&s| (s, self.ms[s.index()]))
    }
}

struct Clock<'a> {
    timings: &'a mut StageTimings,
    view: usize,
}

impl Clock<'_> {
    fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| Error::Stage {
            view: self.view,
            stage,
            source: Box::new(e),
        });
        self.timings.add(stage, start.elapsed().as_secs_f64() * 1e3);
        out
    }
}

// ---------------------------------------------------------------------------
// background model

/// Frames that can be averaged sample-wise into a background estimate.
pub trait BackgroundFrame: Clone + Send + Sync {
    fn dims(&self) -> (usize, usize);
    /// Flat samples with a validity flag.
    fn samples(&self) -> Vec<(f32, bool)>;
    /// Frame of the same kind as `self` holding `values`.
    fn with_samples(&self, values: Vec<f32>) -> Self;
}

impl BackgroundFrame for ColorImage {
    fn dims(&self) -> (usize, usize) {
        ColorImage::dims(self)
    }

    fn samples(&self) -> Vec<(f32, bool)> {
        self.pixels().iter().flatten().map(|&v| (v, true)).collect()
    }

    fn with_samples(&self, values: Vec<f32>) -> Self {
        let pixels = values
            .chunks_exact(3)
            .map(|c| [c[0].clamp(0.0, 1.0), c[1].clamp(0.0, 1.0), c[2].clamp(0.0, 1.0)])
            .collect();
        ColorImage::from_pixels(self.width(), self.height(), pixels).expect("clamped samples")
    }
}

impl BackgroundFrame for DepthImage {
    fn dims(&self) -> (usize, usize) {
        DepthImage::dims(self)
    }

    fn samples(&self) -> Vec<(f32, bool)> {
        self.data().iter().map(|&d| (d, d > 0.0)).collect()
    }

    fn with_samples(&self, values: Vec<f32>) -> Self {
        let max = self.max_range();
        let values = values.into_iter().map(|v| v.clamp(0.0, max)).collect();
        DepthImage::from_vec(self.width(), self.height(), values, max).expect("clamped samples")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackgroundMode {
    /// A fixed frame chosen by the operator.
    UserFrame,
    /// Mean over the last `window` frames; invalid depth samples are skipped.
    RunningMean { window: usize },
}

#[derive(Debug, Clone)]
pub struct BackgroundModel<F> {
    mode: BackgroundMode,
    frame: F,
    ring: VecDeque<F>,
    sums: Vec<f64>,
    counts: Vec<u32>,
}

impl<F: BackgroundFrame> BackgroundModel<F> {
    pub fn user_frame(frame: F) -> Self {
        Self {
            mode: BackgroundMode::UserFrame,
            frame,
            ring: VecDeque::new(),
            sums: Vec::new(),
            counts: Vec::new(),
        }
    }

    /// Running mean seeded with `first`.
    pub fn running_mean(first: F, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("window", "must be at least 1"));
        }
        let n = first.samples().len();
        let mut model = Self {
            mode: BackgroundMode::RunningMean { window },
            frame: first.clone(),
            ring: VecDeque::with_capacity(window + 1),
            sums: vec![0.0; n],
            counts: vec![0; n],
        };
        model.push(first);
        Ok(model)
    }

    pub fn mode(&self) -> BackgroundMode {
        self.mode
    }

    pub fn frame(&self) -> &F {
        &self.frame
    }

    pub fn frames_accumulated(&self) -> usize {
        match self.mode {
            BackgroundMode::UserFrame => 1,
            BackgroundMode::RunningMean { .. } => self.ring.len(),
        }
    }

    pub fn update(&mut self, frame: &F) -> Result<()> {
        ensure_dims(self.frame.dims(), frame.dims())?;
        if let BackgroundMode::RunningMean { .. } = self.mode {
            self.push(frame.clone());
        }
        Ok(())
    }

    fn push(&mut self, frame: F) {
        let BackgroundMode::RunningMean { window } = self.mode else {
            return;
        };
        for (i, (v, ok)) in frame.samples().into_iter().enumerate() {
            if ok {
                self.sums[i] += v as f64;
                self.counts[i] += 1;
            }
        }
        self.ring.push_back(frame);
        if self.ring.len() > window {
            let old = self.ring.pop_front().expect("non-empty ring");
            for (i, (v, ok)) in old.samples().into_iter().enumerate() {
                if ok {
                    self.sums[i] -= v as f64;
                    self.counts[i] -= 1;
                }
            }
        }
        let means = self
            .sums
            .iter()
            .zip(&self.counts)
            .map(|(&s, &c)| if c == 0 { 0.0 } else { (s / c as f64) as f32 })
            .collect();
        self.frame = self.frame.with_samples(means);
    }
}

pub fn update_background<F: BackgroundFrame>(mut model: BackgroundModel<F>, frame: &F) -> Result<BackgroundModel<F>> {
    model.update(frame)?;
    Ok(model)
}

// ---------------------------------------------------------------------------
// view configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewKind {
    Rgb,
    Depth,
}

impl fmt::Display for ViewKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViewKind::Rgb => "rgb",
            ViewKind::Depth => "depth",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Calibration {
    Homography(Homography),
    Pinhole(PinholeCamera),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionParams {
    /// RGB distance marking a pixel as foreground.
    pub tau: f32,
    /// Depth difference in meters marking a pixel as foreground.
    pub tau_depth: f32,
    pub min_area: usize,
    pub canny: CannyParams,
    /// Radians.
    pub theta_max: f32,
    pub flow: FlowParams,
}

impl DetectionParams {
    pub fn rgb_default() -> Self {
        Self {
            tau: 0.15,
            tau_depth: 0.15,
            min_area: 50,
            canny: CannyParams::default(),
            theta_max: 20f32.to_radians(),
            flow: FlowParams::default(),
        }
    }

    /// Depth edges are computed on range / max_range, so contrasts are
    /// smaller than in 8-bit colour.
    pub fn depth_default() -> Self {
        Self {
            min_area: 25,
            canny: CannyParams {
                low: 0.01,
                high: 0.03,
                sigma: 1.0,
            },
            ..Self::rgb_default()
        }
    }

    pub fn default_for(kind: ViewKind) -> Self {
        match kind {
            ViewKind::Rgb => Self::rgb_default(),
            ViewKind::Depth => Self::depth_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewConfig {
    pub id: usize,
    kind: ViewKind,
    calibration: Calibration,
    pub params: DetectionParams,
}

impl ViewConfig {
    pub fn new(id: usize, kind: ViewKind, calibration: Calibration, params: DetectionParams) -> Result<Self> {
        match (kind, &calibration) {
            (ViewKind::Rgb, Calibration::Homography(_)) | (ViewKind::Depth, Calibration::Pinhole(_)) => {}
            _ => {
                return Err(Error::Calibration(format!(
                    "view {id}: {kind} view needs a {} calibration",
                    if kind == ViewKind::Rgb { "homography" } else { "pinhole" }
                )))
            }
        }
        Ok(Self {
            id,
            kind,
            calibration,
            params,
        })
    }

    pub fn rgb(id: usize, h: Homography) -> Self {
        Self::new(
            id,
            ViewKind::Rgb,
            Calibration::Homography(h),
            DetectionParams::rgb_default(),
        )
        .expect("kind matches")
    }

    pub fn depth(id: usize, cam: PinholeCamera) -> Self {
        Self::new(
            id,
            ViewKind::Depth,
            Calibration::Pinhole(cam),
            DetectionParams::depth_default(),
        )
        .expect("kind matches")
    }

    pub fn kind(&self) -> ViewKind {
        self.kind
    }

    pub fn calibration(&self) -> &Calibration {
        &self.calibration
    }
}

// ---------------------------------------------------------------------------
// results

#[derive(Debug, Clone)]
pub struct ViewResult {
    pub view: usize,
    /// Background-difference foreground.
    pub objects: BinaryMask,
    pub labels: LabelImage,
    pub flow: FlowField,
    pub flows: Vec<ComponentFlow>,
    pub edges: BinaryMask,
    /// Edge pixels surviving the angular threshold.
    pub retained: BinaryMask,
    /// Retained pixels after the line-sweep fill; these are reprojected.
    pub areas: BinaryMask,
    pub grid: BinaryMask,
    pub timings: StageTimings,
}

#[derive(Debug, Clone)]
pub struct FrameResult {
    pub views: Vec<ViewResult>,
    /// Number of views marking each cell.
    pub votes: Raster<u32>,
    pub occupancy: BinaryMask,
    pub timings: StageTimings,
}

struct Intermediates {
    objects: BinaryMask,
    labels: LabelImage,
    flow: FlowField,
    flows: Vec<ComponentFlow>,
    edges: BinaryMask,
    retained: BinaryMask,
    areas: BinaryMask,
}

/// Components → flow → edges → mean flow → angular threshold → fill, shared
/// by the RGB and depth paths once a foreground mask exists.
fn select_areas(
    clock: &mut Clock<'_>,
    params: &DetectionParams,
    objects: BinaryMask,
    prev_gray: impl FnOnce() -> Result<GrayImage>,
    curr_gray: impl FnOnce() -> Result<GrayImage>,
) -> Result<Intermediates> {
    let labels = clock.time(Stage::Components, || {
        Ok(connected_components(&objects, params.min_area))
    })?;
    let (prev_g, curr_g) = clock.time(Stage::Gray, || Ok((prev_gray()?, curr_gray()?)))?;
    let (w, h) = curr_g.dims();
    let flow = clock.time(Stage::Flow, || {
        if labels.is_empty() {
            // nothing to average over; the field would be discarded
            Ok(FlowField::zeros(w, h))
        } else {
            dense_flow(&prev_g, &curr_g, &params.flow)
        }
    })?;
    let edge_map = clock.time(Stage::Edges, || {
        canny_with_gradients(&curr_g, params.canny.low, params.canny.high, params.canny.sigma)
    })?;
    let flows = clock.time(Stage::MeanFlow, || mean_flow_per_component(&labels, &flow))?;
    let retained = clock.time(Stage::AngularThreshold, || {
        angular_threshold(
            &edge_map.edges,
            &labels,
            &flows,
            &edge_map.gx,
            &edge_map.gy,
            params.theta_max,
        )
    })?;
    let areas = clock.time(Stage::ScanlineFill, || scanline_fill(&retained, &labels))?;
    Ok(Intermediates {
        objects,
        labels,
        flow,
        flows,
        edges: edge_map.edges,
        retained,
        areas,
    })
}

pub fn process_view_rgb(
    view: &ViewConfig,
    prev: &ColorImage,
    curr: &ColorImage,
    bg: &BackgroundModel<ColorImage>,
    spec: &GridSpec,
) -> Result<ViewResult> {
    let Calibration::Homography(h) = view.calibration else {
        return Err(Error::Calibration(format!("view {} is not an rgb view", view.id)));
    };
    let mut timings = StageTimings::default();
    let mut clock = Clock {
        timings: &mut timings,
        view: view.id,
    };
    let p = &view.params;
    let objects = clock.time(Stage::Foreground, || {
        ensure_dims(curr.dims(), prev.dims())?;
        color_absdiff_mask(curr, bg.frame(), p.tau)
    })?;
    let it = select_areas(&mut clock, p, objects, || Ok(to_gray(prev)), || Ok(to_gray(curr)))?;
    let grid = clock.time(Stage::Reproject, || Ok(warp_mask_to_grid(&it.areas, &h, spec)))?;
    Ok(ViewResult {
        view: view.id,
        objects: it.objects,
        labels: it.labels,
        flow: it.flow,
        flows: it.flows,
        edges: it.edges,
        retained: it.retained,
        areas: it.areas,
        grid,
        timings,
    })
}

pub fn process_view_depth(
    view: &ViewConfig,
    prev: &DepthImage,
    curr: &DepthImage,
    bg: &BackgroundModel<DepthImage>,
    spec: &GridSpec,
) -> Result<ViewResult> {
    let Calibration::Pinhole(cam) = view.calibration else {
        return Err(Error::Calibration(format!("view {} is not a depth view", view.id)));
    };
    let mut timings = StageTimings::default();
    let mut clock = Clock {
        timings: &mut timings,
        view: view.id,
    };
    let p = &view.params;
    let objects = clock.time(Stage::Foreground, || depth_foreground(curr, bg.frame(), p.tau_depth))?;
    ensure_dims(prev.dims(), curr.dims()).map_err(|e| Error::Stage {
        view: view.id,
        stage: Stage::Gray,
        source: Box::new(e),
    })?;
    let it = select_areas(
        &mut clock,
        p,
        objects,
        || Ok(prev.normalized()),
        || Ok(curr.normalized()),
    )?;
    let grid = clock.time(Stage::Reproject, || depth_mask_to_grid(curr, &it.areas, &cam, spec))?;
    Ok(ViewResult {
        view: view.id,
        objects: it.objects,
        labels: it.labels,
        flow: it.flow,
        flows: it.flows,
        edges: it.edges,
        retained: it.retained,
        areas: it.areas,
        grid,
        timings,
    })
}

/// Pixels valid in both images whose range differs by more than `tau_depth`.
pub fn depth_foreground(curr: &DepthImage, bg: &DepthImage, tau_depth: f32) -> Result<BinaryMask> {
    ensure_dims(bg.dims(), curr.dims())?;
    if !(tau_depth.is_finite() && tau_depth >= 0.0) {
        return Err(Error::invalid("tau_depth", format!("{tau_depth} must be non-negative")));
    }
    let data = curr
        .data()
        .iter()
        .zip(bg.data())
        .map(|(&c, &b)| c > 0.0 && b > 0.0 && (c - b).abs() > tau_depth)
        .collect();
    BinaryMask::from_vec(curr.width(), curr.height(), data)
}

/// Sums per-view grid masks and keeps cells with at least `min_votes`.
pub fn fuse_votes(grids: &[&BinaryMask], spec: &GridSpec, min_votes: usize) -> Result<(Raster<u32>, BinaryMask)> {
    let mut votes = Raster::filled(spec.cols, spec.rows, 0u32);
    for g in grids {
        ensure_dims(spec.dims(), g.dims())?;
        for (v, &b) in votes.data_mut().iter_mut().zip(g.data()) {
            *v += b as u32;
        }
    }
    let occupancy = BinaryMask::from_vec(
        spec.cols,
        spec.rows,
        votes.data().iter().map(|&v| v as usize >= min_votes).collect(),
    )?;
    Ok((votes, occupancy))
}

fn check_min_votes(min_votes: usize, n: usize) -> Result<()> {
    if !(1..=n).contains(&min_votes) {
        return Err(Error::invalid("min_votes", format!("{min_votes} outside [1, {n}]")));
    }
    Ok(())
}

fn assemble(views: Vec<ViewResult>, spec: &GridSpec, min_votes: usize) -> Result<FrameResult> {
    let start = Instant::now();
    let grids: Vec<&BinaryMask> = views.iter().map(|v| &v.grid).collect();
    let (votes, occupancy) = fuse_votes(&grids, spec, min_votes)?;
    let mut timings = StageTimings::default();
    for v in &views {
        timings.accumulate(&v.timings);
    }
    timings.add(Stage::Fusion, start.elapsed().as_secs_f64() * 1e3);
    Ok(FrameResult {
        views,
        votes,
        occupancy,
        timings,
    })
}

fn map_views<T: Send>(
    n: usize,
    pool: Option<&rayon::ThreadPool>,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    match pool {
        Some(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        None => (0..n).map(f).collect(),
    }
}

fn check_view_count(views: usize, inputs: &[usize]) -> Result<()> {
    if views == 0 {
        return Err(Error::invalid("views", "at least one view is required"));
    }
    if let Some(&bad) = inputs.iter().find(|&&n| n != views) {
        return Err(Error::invalid(
            "views",
            format!("{views} views configured but {bad} inputs supplied"),
        ));
    }
    Ok(())
}

/// Processes one RGB frame pair per view and intersects their reprojections:
/// a cell is occupied when at least `min_votes` views mark it.
pub fn process_rgb_frames(
    views: &[ViewConfig],
    frames_t: &[ColorImage],
    frames_prev: &[ColorImage],
    backgrounds: &[BackgroundModel<ColorImage>],
    spec: &GridSpec,
    min_votes: usize,
) -> Result<FrameResult> {
    process_rgb_frames_in(views, frames_t, frames_prev, backgrounds, spec, min_votes, None)
}

pub fn process_rgb_frames_in(
    views: &[ViewConfig],
    frames_t: &[ColorImage],
    frames_prev: &[ColorImage],
    backgrounds: &[BackgroundModel<ColorImage>],
    spec: &GridSpec,
    min_votes: usize,
    pool: Option<&rayon::ThreadPool>,
) -> Result<FrameResult> {
    check_view_count(views.len(), &[frames_t.len(), frames_prev.len(), backgrounds.len()])?;
    check_min_votes(min_votes, views.len())?;
    let results = map_views(views.len(), pool, |i| {
        process_view_rgb(&views[i], &frames_prev[i], &frames_t[i], &backgrounds[i], spec)
    })?;
    assemble(results, spec, min_votes)
}

pub fn process_depth_frame(
    view: &ViewConfig,
    prev: &DepthImage,
    curr: &DepthImage,
    bg: &BackgroundModel<DepthImage>,
    spec: &GridSpec,
) -> Result<FrameResult> {
    if view.kind() != ViewKind::Depth {
        return Err(Error::Calibration(format!("view {} is not a depth view", view.id)));
    }
    let result = process_view_depth(view, prev, curr, bg, spec)?;
    assemble(vec![result], spec, 1)
}

/// Several depth views: metric reprojection needs no intersection, so the
/// fused occupancy is the union.
pub fn process_depth_frames_in(
    views: &[ViewConfig],
    frames_t: &[DepthImage],
    frames_prev: &[DepthImage],
    backgrounds: &[BackgroundModel<DepthImage>],
    spec: &GridSpec,
    pool: Option<&rayon::ThreadPool>,
) -> Result<FrameResult> {
    check_view_count(views.len(), &[frames_t.len(), frames_prev.len(), backgrounds.len()])?;
    let results = map_views(views.len(), pool, |i| {
        process_view_depth(&views[i], &frames_prev[i], &frames_t[i], &backgrounds[i], spec)
    })?;
    assemble(results, spec, 1)
}
