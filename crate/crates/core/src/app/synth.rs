use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::calib::serialize_calibration;
use crate::io::pnm::{color_to_pnm, depth_to_pnm, encode, PnmImage};
use crate::pipeline::{Calibration, ViewKind};
use crate::synthgen::{ground_truth_footprint, render_background, render_frame, scenario_by_name, Frame, Scenario};

/// Frames rendered in parallel before being written in order.
const CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub scenario: String,
    pub out: PathBuf,
    pub config: PathBuf,
    pub frames: usize,
    pub cameras: usize,
}

/// A standard scenario name, or a path to a TOML scenario file.
pub fn load_scenario(name_or_file: &str) -> Result<Scenario> {
    let path = Path::new(name_or_file);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| Error::at_path(path, e))?;
        return Scenario::from_toml(&text).map_err(|e| Error::at_path(path, e));
    }
    scenario_by_name(name_or_file)
}

fn encode_frame(f: &Frame) -> Vec<u8> {
    match f {
        Frame::Color(img) => encode(&color_to_pnm(img)),
        Frame::Depth(img) => encode(&depth_to_pnm(img)),
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::at_path(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::at_path(path, e))
}

fn run_config(s: &Scenario) -> String {
    let g = s.grid_spec();
    let mut c = String::new();
    let _ = writeln!(c, "# scenario {} (seed {})", s.name, s.seed);
    let _ = writeln!(c, "output = results");
    let _ = writeln!(c, "metrics_log = metrics.log");
    let _ = writeln!(c, "threads = 1");
    let _ = writeln!(c, "frame_count = {}", s.frame_count);
    if let Some(v) = s.min_votes {
        let _ = writeln!(c, "min_votes = {v}");
    }
    let _ = writeln!(c, "\n[grid]");
    let _ = writeln!(c, "origin_x = {:?}", g.origin_x);
    let _ = writeln!(c, "origin_y = {:?}", g.origin_y);
    let _ = writeln!(c, "cell_size = {:?}", g.cell_size);
    let _ = writeln!(c, "cols = {}", g.cols);
    let _ = writeln!(c, "rows = {}", g.rows);
    let _ = writeln!(c, "\n[background]\nmode = user-frame");
    let _ = writeln!(c, "\n[cumulative]\nmode = sliding\nt_span = {}", s.t_span);
    let ext = match s.kind() {
        ViewKind::Rgb => "ppm",
        ViewKind::Depth => "pgm",
    };
    for (i, cam) in s.cameras.iter().enumerate() {
        let _ = writeln!(c, "\n[view.{i}]");
        let _ = writeln!(c, "kind = {}", cam.kind);
        let _ = writeln!(c, "calibration = cam{i}/calib.txt");
        let _ = writeln!(c, "frames = cam{i}/frame_%06d.{ext}");
        let _ = writeln!(c, "background = cam{i}/background.{ext}");
        if let Some(m) = cam.max_range {
            let _ = writeln!(c, "max_range = {m:?}");
        }
    }
    c
}

/// Writes per-camera frames, backgrounds and calibrations, ground-truth
/// footprints and a ready-to-run config into `out`.
pub fn synth(s: &Scenario, out: &Path) -> Result<SynthSummary> {
    s.validate()?;
    let rigs = s.rigs()?;
    let spec = s.grid_spec();
    mkdir(out)?;
    let truth_dir = out.join("truth");
    mkdir(&truth_dir)?;
    let ext = match s.kind() {
        ViewKind::Rgb => "ppm",
        ViewKind::Depth => "pgm",
    };
    for (i, rig) in rigs.iter().enumerate() {
        let dir = out.join(format!("cam{i}"));
        mkdir(&dir)?;
        let calib = match rig.kind {
            ViewKind::Rgb => Calibration::Homography(rig.homography()?),
            ViewKind::Depth => Calibration::Pinhole(rig.depth_calibration()?),
        };
        write(&dir.join("calib.txt"), serialize_calibration(&calib).as_bytes())?;
        write(
            &dir.join(format!("background.{ext}")),
            &encode_frame(&render_background(s, i)?),
        )?;
    }
    let jobs: Vec<(usize, usize)> = (0..s.frame_count)
        .flat_map(|t| (0..rigs.len()).map(move |c| (t, c)))
        .collect();
    for chunk in jobs.chunks(CHUNK * rigs.len()) {
        let rendered: Vec<Vec<u8>> = chunk
            .par_iter()
            .map(|&(t, c)| render_frame(s, c, t).map(|f| encode_frame(&f)))
            .collect::<Result<_>>()?;
        for (&(t, c), bytes) in chunk.iter().zip(&rendered) {
            write(&out.join(format!("cam{c}/frame_{t:06}.{ext}")), bytes)?;
        }
    }
    for t in 0..s.frame_count {
        let m = ground_truth_footprint(s, &spec, t)?;
        let img = PnmImage::Gray8 {
            width: m.width(),
            height: m.height(),
            data: m.data().iter().map(|&b| if b { 255 } else { 0 }).collect(),
        };
        write(&truth_dir.join(format!("truth_{t:06}.pgm")), &encode(&img))?;
    }
    let config = out.join("config.ini");
    write(&config, run_config(s).as_bytes())?;
    Ok(SynthSummary {
        scenario: s.name.clone(),
        out: out.to_path_buf(),
        config,
        frames: s.frame_count,
        cameras: rigs.len(),
    })
}
