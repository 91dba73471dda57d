use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::Session;
use crate::analytics::{flow_visualization, heatmap};
use crate::error::{Error, Result};
use crate::imaging::BinaryMask;
use crate::io::config::RunConfig;
use crate::io::metrics::MetricsRecord;
use crate::io::pnm::{color_to_pnm, write_pnm, PnmImage};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub frames: usize,
    pub output: PathBuf,
    pub metrics_log: PathBuf,
    /// Mean frames per second over the whole run.
    pub fps: f64,
}

fn occupancy_pnm(m: &BinaryMask) -> PnmImage {
    PnmImage::Gray8 {
        width: m.width(),
        height: m.height(),
        data: m.data().iter().map(|&b| if b { 255 } else { 0 }).collect(),
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::at_path(dir, e))?;
    }
    Ok(())
}

/// Processes every frame of the configured streams, writing the fused
/// occupancy, cumulative heatmap and top-view flow per frame plus one
/// metrics line per frame.
pub fn run(cfg: &RunConfig, threads: usize) -> Result<RunSummary> {
    fs::create_dir_all(&cfg.output).map_err(|e| Error::at_path(&cfg.output, e))?;
    create_parent(&cfg.metrics_log)?;
    let log = File::create(&cfg.metrics_log).map_err(|e| Error::at_path(&cfg.metrics_log, e))?;
    let mut log = BufWriter::new(log);
    let mut session = Session::new(cfg, threads)?;
    let start = Instant::now();
    let mut last = None;
    for t in 0..cfg.frame_count {
        let wrap = |e: Error| Error::Frame {
            frame: t,
            source: Box::new(e),
        };
        let frames = session.load(t).map_err(wrap)?;
        let step = session.process(frames).map_err(wrap)?;
        let out = |prefix: &str, ext: &str| cfg.output.join(format!("{prefix}_{t:06}.{ext}"));
        write_pnm(&out("occ", "pgm"), &occupancy_pnm(&step.result.occupancy)).map_err(wrap)?;
        write_pnm(&out("cum", "ppm"), &color_to_pnm(&heatmap(session.cumulative()))).map_err(wrap)?;
        write_pnm(&out("flow", "ppm"), &color_to_pnm(&flow_visualization(&step.flow))).map_err(wrap)?;
        let record = MetricsRecord {
            frame: t,
            occupied_cells: step.result.occupancy.count(),
            clusters: step.saturation.clusters.len(),
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            stages: step.result.timings,
            cumulative_ms: step.cumulative_ms,
            topview_flow_ms: step.topview_flow_ms,
        };
        writeln!(log, "{}", record.to_line()).map_err(|e| Error::at_path(&cfg.metrics_log, e))?;
        last = Some(record);
    }
    log.flush().map_err(|e| Error::at_path(&cfg.metrics_log, e))?;
    Ok(RunSummary {
        frames: cfg.frame_count,
        output: cfg.output.clone(),
        metrics_log: cfg.metrics_log.clone(),
        fps: last.map_or(0.0, |r| r.fps()),
    })
}
