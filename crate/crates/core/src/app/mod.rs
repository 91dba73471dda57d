//! Command implementations behind the `topgrid` binary.

mod bench;
mod run;
mod synth;

use std::time::Instant;

use crate::analytics::{saturation_query, topview_flow, CumulativeGrid, SaturationReport};
use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, ColorImage, DepthImage, FlowField};
use crate::io::config::{BackgroundSetting, RunConfig};
use crate::io::pnm::{read_color, read_depth};
use crate::pipeline::{
    process_depth_frames_in, process_rgb_frames_in, BackgroundModel, FrameResult, ViewConfig, ViewKind,
};

pub use bench::{bench, BenchReport, BENCH_REPEATS, REALTIME_FPS};
pub use run::{run, RunSummary};
pub use synth::{load_scenario, synth, SynthSummary};

/// Environment variable overriding the configured worker count.
pub const THREADS_ENV: &str = "TOPGRID_THREADS";

/// Parses a `TOPGRID_THREADS` value.
pub fn parse_threads(value: &str) -> Result<usize> {
    match value.trim().parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(Error::invalid(
            "TOPGRID_THREADS",
            format!("`{value}` is not a positive integer"),
        )),
    }
}

/// One decoded frame per view.
#[derive(Debug, Clone)]
pub enum Frames {
    Rgb(Vec<ColorImage>),
    Depth(Vec<DepthImage>),
}

enum Backgrounds {
    Rgb(Vec<BackgroundModel<ColorImage>>),
    Depth(Vec<BackgroundModel<DepthImage>>),
}

/// Output of one processed frame.
#[derive(Debug, Clone)]
pub struct Step {
    pub result: FrameResult,
    pub flow: FlowField,
    pub saturation: SaturationReport,
    pub cumulative_ms: f64,
    pub topview_flow_ms: f64,
}

/// Per-stream state carried between frames.
pub struct Session<'a> {
    cfg: &'a RunConfig,
    views: Vec<ViewConfig>,
    pool: Option<rayon::ThreadPool>,
    backgrounds: Option<Backgrounds>,
    prev: Option<Frames>,
    prev_occupancy: Option<BinaryMask>,
    cumulative: CumulativeGrid,
}

impl<'a> Session<'a> {
    pub fn new(cfg: &'a RunConfig, threads: usize) -> Result<Self> {
        let pool = if threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| Error::invalid("threads", e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Self {
            cfg,
            views: cfg.views.iter().map(|v| v.view.clone()).collect(),
            pool,
            backgrounds: None,
            prev: None,
            prev_occupancy: None,
            cumulative: CumulativeGrid::new(cfg.grid, cfg.cumulative)?,
        })
    }

    pub fn cumulative(&self) -> &CumulativeGrid {
        &self.cumulative
    }

    /// Decodes frame `t` of every view.
    pub fn load(&self, t: usize) -> Result<Frames> {
        match self.cfg.kind {
            ViewKind::Rgb => self
                .cfg
                .views
                .iter()
                .map(|v| read_color(&v.frame_path(t)))
                .collect::<Result<_>>()
                .map(Frames::Rgb),
            ViewKind::Depth => self
                .cfg
                .views
                .iter()
                .map(|v| read_depth(&v.frame_path(t), v.max_range.expect("validated depth view")))
                .collect::<Result<_>>()
                .map(Frames::Depth),
        }
    }

    fn init_backgrounds(&self, first: &Frames) -> Result<Backgrounds> {
        let cfg = self.cfg;
        Ok(match (first, cfg.background) {
            (Frames::Rgb(_), BackgroundSetting::UserFrame) => Backgrounds::Rgb(
                cfg.views
                    .iter()
                    .map(|v| {
                        Ok(BackgroundModel::user_frame(read_color(
                            v.background.as_ref().expect("validated"),
                        )?))
                    })
                    .collect::<Result<_>>()?,
            ),
            (Frames::Depth(_), BackgroundSetting::UserFrame) => Backgrounds::Depth(
                cfg.views
                    .iter()
                    .map(|v| {
                        let path = v.background.as_ref().expect("validated");
                        Ok(BackgroundModel::user_frame(read_depth(
                            path,
                            v.max_range.expect("validated"),
                        )?))
                    })
                    .collect::<Result<_>>()?,
            ),
            (Frames::Rgb(f), BackgroundSetting::RunningMean { window }) => Backgrounds::Rgb(
                f.iter()
                    .map(|img| BackgroundModel::running_mean(img.clone(), window))
                    .collect::<Result<_>>()?,
            ),
            (Frames::Depth(f), BackgroundSetting::RunningMean { window }) => Backgrounds::Depth(
                f.iter()
                    .map(|img| BackgroundModel::running_mean(img.clone(), window))
                    .collect::<Result<_>>()?,
            ),
        })
    }

    /// Runs the pipeline and analytics on the next frame of the stream.
    pub fn process(&mut self, frames: Frames) -> Result<Step> {
        let first = self.backgrounds.is_none();
        if first {
            self.backgrounds = Some(self.init_backgrounds(&frames)?);
        }
        let prev = self.prev.take().unwrap_or_else(|| frames.clone());
        let spec = self.cfg.grid;
        let pool = self.pool.as_ref();
        let result = match (&frames, &prev, self.backgrounds.as_mut().expect("initialised")) {
            (Frames::Rgb(curr), Frames::Rgb(prev), Backgrounds::Rgb(bgs)) => {
                let r = process_rgb_frames_in(&self.views, curr, prev, bgs, &spec, self.cfg.min_votes, pool)?;
                if !first {
                    for (bg, f) in bgs.iter_mut().zip(curr) {
                        bg.update(f)?;
                    }
                }
                r
            }
            (Frames::Depth(curr), Frames::Depth(prev), Backgrounds::Depth(bgs)) => {
                let r = process_depth_frames_in(&self.views, curr, prev, bgs, &spec, pool)?;
                if !first {
                    for (bg, f) in bgs.iter_mut().zip(curr) {
                        bg.update(f)?;
                    }
                }
                r
            }
            _ => {
                return Err(Error::invalid(
                    "frames",
                    "frame kind does not match the configured views",
                ))
            }
        };
        self.prev = Some(frames);

        let start = Instant::now();
        self.cumulative.update(&result.occupancy)?;
        let saturation = saturation_query(
            &self.cumulative,
            self.cfg.analytics.s_min,
            self.cfg.analytics.min_cluster,
        )?;
        let cumulative_ms = start.elapsed().as_secs_f64() * 1e3;

        let start = Instant::now();
        let prev_occ = self.prev_occupancy.as_ref().unwrap_or(&result.occupancy);
        let flow = topview_flow(prev_occ, &result.occupancy, &self.cfg.analytics.flow)?;
        let topview_flow_ms = start.elapsed().as_secs_f64() * 1e3;
        self.prev_occupancy = Some(result.occupancy.clone());

        Ok(Step {
            result,
            flow,
            saturation,
            cumulative_ms,
            topview_flow_ms,
        })
    }
}
