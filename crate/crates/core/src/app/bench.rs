use std::fmt;
use std::time::Instant;

use super::Session;
use crate::error::{Error, Result};
use crate::io::config::RunConfig;
use crate::pipeline::{Stage, StageTimings};

/// Measurement passes; the reported figures are per-pass medians.
pub const BENCH_REPEATS: usize = 3;
pub const REALTIME_FPS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub frames: usize,
    pub warmup: usize,
    pub threads: usize,
    /// Decode plus pipeline plus analytics.
    pub pipeline_fps: f64,
    /// Decode only, same frames.
    pub noop_fps: f64,
    pub stage_ms: StageTimings,
    pub cumulative_ms: f64,
    pub topview_flow_ms: f64,
    pub realtime: bool,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Times `measure` frames after `warmup` unmeasured ones.
pub fn bench(cfg: &RunConfig, threads: usize, warmup: usize, measure: usize) -> Result<BenchReport> {
    if measure == 0 {
        return Err(Error::invalid("measure", "must be at least 1"));
    }
    if cfg.frame_count < warmup + measure {
        return Err(Error::invalid(
            "measure",
            format!(
                "warmup {warmup} + measure {measure} exceeds the {} available frames",
                cfg.frame_count
            ),
        ));
    }
    let mut pipeline = Vec::with_capacity(BENCH_REPEATS);
    let mut noop = Vec::with_capacity(BENCH_REPEATS);
    let mut stage_ms = StageTimings::default();
    let mut cumulative_ms = 0.0;
    let mut topview_flow_ms = 0.0;
    for _ in 0..BENCH_REPEATS {
        let mut session = Session::new(cfg, threads)?;
        for t in 0..warmup {
            let f = session.load(t)?;
            session.process(f)?;
        }
        let start = Instant::now();
        for t in warmup..warmup + measure {
            let f = session.load(t)?;
            let step = session.process(f)?;
            stage_ms.accumulate(&step.result.timings);
            cumulative_ms += step.cumulative_ms;
            topview_flow_ms += step.topview_flow_ms;
        }
        pipeline.push(measure as f64 / start.elapsed().as_secs_f64());

        let start = Instant::now();
        for t in warmup..warmup + measure {
            std::hint::black_box(session.load(t)?);
        }
        noop.push(measure as f64 / start.elapsed().as_secs_f64());
    }
    let n = (BENCH_REPEATS * measure) as f64;
    let mut mean = StageTimings::default();
    for (stage, ms) in stage_ms.iter() {
        mean.add(stage, ms / n);
    }
    let pipeline_fps = median(pipeline);
    Ok(BenchReport {
        frames: measure,
        warmup,
        threads,
        pipeline_fps,
        noop_fps: median(noop),
        stage_ms: mean,
        cumulative_ms: cumulative_ms / n,
        topview_flow_ms: topview_flow_ms / n,
        realtime: pipeline_fps >= REALTIME_FPS,
    })
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "# {} measured frames after {} warmup, {} threads, median of {} passes",
            self.frames, self.warmup, self.threads, BENCH_REPEATS
        )?;
        writeln!(f, "# no-op baseline decodes the same frames and does nothing else")?;
        writeln!(f, "pipeline_fps {:.2}", self.pipeline_fps)?;
        writeln!(f, "noop_fps {:.2}", self.noop_fps)?;
        for stage in Stage::ALL {
            writeln!(f, "{}_ms {:.3}", stage.name(), self.stage_ms.get(stage))?;
        }
        writeln!(f, "cumulative_ms {:.3}", self.cumulative_ms)?;
        writeln!(f, "topview_flow_ms {:.3}", self.topview_flow_ms)?;
        write!(
            f,
            "realtime {} (threshold {REALTIME_FPS} fps)",
            if self.realtime { "yes" } else { "no" }
        )
    }
}
