//! `key = value` run configuration with `[section]` headers.
//!
//! ```text
//! output = results
//! metrics_log = metrics.log
//! threads = 1
//!
//! [grid]
//! origin_x = 0
//! origin_y = 0
//! cell_size = 0.05
//! cols = 400
//! rows = 200
//!
//! [background]
//! mode = user-frame            # or running-mean
//!
//! [cumulative]
//! mode = sliding               # or full
//! t_span = 100
//!
//! [view.0]
//! kind = rgb
//! calibration = cam0/calib.txt
//! frames = cam0/frame_%06d.ppm
//! background = cam0/background.ppm
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analytics::CumulativeMode;
use crate::error::{Error, Result};
use crate::features::{CannyParams, FlowParams};
use crate::geometry::GridSpec;
use crate::io::calib::read_calibration;
use crate::pipeline::{DetectionParams, ViewConfig, ViewKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackgroundSetting {
    UserFrame,
    RunningMean { window: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewSource {
    pub view: ViewConfig,
    /// Frame path pattern with a `%d` / `%0Nd` placeholder.
    pub frames: String,
    pub background: Option<PathBuf>,
    /// Depth views only.
    pub max_range: Option<f32>,
}

impl ViewSource {
    pub fn frame_path(&self, t: usize) -> PathBuf {
        PathBuf::from(format_frame(&self.frames, t))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticsSettings {
    pub s_min: f64,
    pub min_cluster: usize,
    pub flow: FlowParams,
}

impl Default for AnalyticsSettings {
    fn default() -> Self {
        Self {
            s_min: 0.8,
            min_cluster: 4,
            flow: FlowParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub base_dir: PathBuf,
    pub views: Vec<ViewSource>,
    pub kind: ViewKind,
    pub grid: GridSpec,
    pub background: BackgroundSetting,
    pub cumulative: CumulativeMode,
    pub analytics: AnalyticsSettings,
    pub min_votes: usize,
    pub output: PathBuf,
    pub metrics_log: PathBuf,
    pub threads: usize,
    pub frame_count: usize,
    /// Per-view frame counts when they differ and were truncated.
    pub stream_lengths: Vec<usize>,
}

/// Substitutes the frame index into the first `%d` or `%0Nd`.
pub fn format_frame(pattern: &str, t: usize) -> String {
    if let Some(start) = pattern.find('%') {
        let rest = &pattern[start + 1..];
        if let Some(end) = rest.find('d') {
            let spec = &rest[..end];
            if spec.chars().all(|c| c.is_ascii_digit()) {
                let width: usize = spec.parse().unwrap_or(0);
                return format!("{}{:0width$}{}", &pattern[..start], t, &rest[end + 1..]);
            }
        }
    }
    pattern.to_string()
}

type Section = BTreeMap<String, (usize, String)>;

fn parse_sections(text: &str) -> Result<Vec<(String, usize, Section)>> {
    let mut sections: Vec<(String, usize, Section)> = vec![(String::new(), 0, Section::new())];
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| Error::Config {
                line: line_no,
                reason: "unterminated section header".into(),
            })?;
            let name = name.trim().to_string();
            if sections.iter().any(|(n, _, _)| *n == name) {
                return Err(Error::Config {
                    line: line_no,
                    reason: format!("duplicate section [{name}]"),
                });
            }
            sections.push((name, line_no, Section::new()));
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: line_no,
            reason: format!("expected `key = value`, got `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::Config {
                line: line_no,
                reason: "empty key".into(),
            });
        }
        let section = &mut sections.last_mut().expect("root section").2;
        if section.insert(key.to_string(), (line_no, value.to_string())).is_some() {
            return Err(Error::Config {
                line: line_no,
                reason: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(sections)
}

struct Reader {
    name: String,
    header_line: usize,
    entries: Section,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| Error::Config {
                line,
                reason: format!("cannot parse `{key} = {v}`"),
            }),
        }
    }

    fn get<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn require<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        self.parse(key)?.ok_or_else(|| Error::Config {
            line: self.header_line,
            reason: format!("[{}] is missing `{key}`", self.name),
        })
    }

    fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, (line, _))) => Err(Error::Config {
                line,
                reason: format!("unknown key `{key}` in [{}]", self.name),
            }),
        }
    }
}

fn check(ok: bool, line: usize, reason: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config {
            line,
            reason: reason.into(),
        })
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn detection_params(r: &mut Reader, kind: ViewKind) -> Result<DetectionParams> {
    let d = DetectionParams::default_for(kind);
    let line = r.header_line;
    let p = DetectionParams {
        tau: r.get("tau", d.tau)?,
        tau_depth: r.get("tau_depth", d.tau_depth)?,
        min_area: r.get("min_area", d.min_area)?,
        canny: CannyParams {
            low: r.get("canny_low", d.canny.low)?,
            high: r.get("canny_high", d.canny.high)?,
            sigma: r.get("canny_sigma", d.canny.sigma)?,
        },
        theta_max: r
            .parse::<f32>("theta_max_deg")?
            .map(f32::to_radians)
            .unwrap_or(d.theta_max),
        flow: flow_params(r, d.flow)?,
    };
    check(p.tau >= 0.0 && p.tau <= 3f32.sqrt(), line, "tau outside [0, sqrt(3)]")?;
    check(p.tau_depth >= 0.0, line, "tau_depth must be non-negative")?;
    check(
        p.canny.low > 0.0 && p.canny.low < p.canny.high,
        line,
        "canny thresholds need 0 < low < high",
    )?;
    check(p.canny.sigma > 0.0, line, "canny_sigma must be positive")?;
    check(
        p.theta_max > 0.0 && p.theta_max < std::f32::consts::FRAC_PI_2,
        line,
        "theta_max_deg outside (0, 90)",
    )?;
    Ok(p)
}

fn flow_params(r: &mut Reader, d: FlowParams) -> Result<FlowParams> {
    let p = FlowParams {
        alpha: r.get("flow_alpha", d.alpha)?,
        iterations: r.get("flow_iterations", d.iterations)?,
        pyramid_levels: r.get("flow_levels", d.pyramid_levels)?,
        presmooth_sigma: r.get("flow_sigma", d.presmooth_sigma)?,
    };
    p.validate().map_err(|e| Error::Config {
        line: r.header_line,
        reason: e.to_string(),
    })?;
    Ok(p)
}

/// Largest `n` such that frames `0..n` all exist.
fn probe_frames(src: &ViewSource) -> usize {
    let mut n = 0;
    while src.frame_path(n).is_file() {
        n += 1;
    }
    n
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::at_path(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| match e {
            Error::Config { line, reason } => Error::at_path(path, format!("line {line}: {reason}")),
            other => other,
        })
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut root = None;
        let mut grid = None;
        let mut background = None;
        let mut cumulative = None;
        let mut analytics = None;
        let mut views = Vec::new();
        for (name, header_line, entries) in parse_sections(text)? {
            let reader = Reader {
                name: name.clone(),
                header_line,
                entries,
            };
            match name.as_str() {
                "" => root = Some(reader),
                "grid" => grid = Some(reader),
                "background" => background = Some(reader),
                "cumulative" => cumulative = Some(reader),
                "analytics" => analytics = Some(reader),
                _ => match name.strip_prefix("view.").map(str::parse::<usize>) {
                    Some(Ok(id)) => views.push((id, reader)),
                    _ => {
                        return Err(Error::Config {
                            line: header_line,
                            reason: format!("unknown section [{name}]"),
                        })
                    }
                },
            }
        }

        let mut root = root.expect("root section always present");
        let output = resolve(base_dir, &root.require::<String>("output")?);
        let metrics_log = resolve(base_dir, &root.get("metrics_log", "metrics.log".to_string())?);
        let threads: usize = root.get("threads", 1)?;
        check(threads >= 1, root.header_line, "threads must be at least 1")?;
        let min_votes: Option<usize> = root.parse("min_votes")?;
        let frame_count: Option<usize> = root.parse("frame_count")?;
        let root_line = root.header_line;
        root.finish()?;
        if output.starts_with(&metrics_log) || metrics_log.starts_with(&output) {
            return Err(Error::Config {
                line: root_line,
                reason: "metrics_log must lie outside the output directory".into(),
            });
        }

        let grid = {
            let mut g = grid.ok_or(Error::Config {
                line: 0,
                reason: "missing [grid] section".into(),
            })?;
            let spec = GridSpec::new(
                g.require("origin_x")?,
                g.require("origin_y")?,
                g.require("cell_size")?,
                g.require("cols")?,
                g.require("rows")?,
            )
            .map_err(|e| Error::Config {
                line: g.header_line,
                reason: e.to_string(),
            })?;
            g.finish()?;
            spec
        };

        let background = match background {
            None => BackgroundSetting::UserFrame,
            Some(mut b) => {
                let mode: String = b.get("mode", "user-frame".to_string())?;
                let setting = match mode.as_str() {
                    "user-frame" => BackgroundSetting::UserFrame,
                    "running-mean" => {
                        let window: usize = b.require("window")?;
                        check(window >= 1, b.header_line, "window must be at least 1")?;
                        BackgroundSetting::RunningMean { window }
                    }
                    other => {
                        return Err(Error::Config {
                            line: b.header_line,
                            reason: format!("unknown background mode `{other}`"),
                        })
                    }
                };
                b.finish()?;
                setting
            }
        };

        let cumulative = match cumulative {
            None => CumulativeMode::Sliding { t_span: 100 },
            Some(mut c) => {
                let mode: String = c.get("mode", "sliding".to_string())?;
                let m = match mode.as_str() {
                    "full" => CumulativeMode::FullHistory,
                    "sliding" => {
                        let t_span: usize = c.get("t_span", 100)?;
                        check(t_span >= 1, c.header_line, "t_span must be at least 1")?;
                        CumulativeMode::Sliding { t_span }
                    }
                    other => {
                        return Err(Error::Config {
                            line: c.header_line,
                            reason: format!("unknown cumulative mode `{other}`"),
                        })
                    }
                };
                c.finish()?;
                m
            }
        };

        let analytics = match analytics {
            None => AnalyticsSettings::default(),
            Some(mut a) => {
                let d = AnalyticsSettings::default();
                let s = AnalyticsSettings {
                    s_min: a.get("s_min", d.s_min)?,
                    min_cluster: a.get("min_cluster", d.min_cluster)?,
                    flow: flow_params(&mut a, d.flow)?,
                };
                check(s.s_min > 0.0 && s.s_min <= 1.0, a.header_line, "s_min outside (0, 1]")?;
                a.finish()?;
                s
            }
        };

        if views.is_empty() {
            return Err(Error::Config {
                line: 0,
                reason: "no [view.N] sections".into(),
            });
        }
        views.sort_by_key(|(id, _)| *id);
        let mut sources = Vec::with_capacity(views.len());
        for (id, mut r) in views {
            let kind = match r.require::<String>("kind")?.as_str() {
                "rgb" => ViewKind::Rgb,
                "depth" => ViewKind::Depth,
                other => {
                    return Err(Error::Config {
                        line: r.header_line,
                        reason: format!("unknown view kind `{other}`"),
                    })
                }
            };
            let calib_path = resolve(base_dir, &r.require::<String>("calibration")?);
            let frames = resolve(base_dir, &r.require::<String>("frames")?)
                .to_string_lossy()
                .into_owned();
            let bg = r.parse::<String>("background")?.map(|p| resolve(base_dir, &p));
            let max_range: Option<f32> = r.parse("max_range")?;
            let params = detection_params(&mut r, kind)?;
            let line = r.header_line;
            r.finish()?;
            match kind {
                ViewKind::Depth => check(
                    max_range.is_some_and(|m| m > 0.0),
                    line,
                    format!("depth view {id} needs a positive max_range"),
                )?,
                ViewKind::Rgb => check(max_range.is_none(), line, "max_range applies to depth views only")?,
            }
            if background == BackgroundSetting::UserFrame {
                let path = bg.as_ref().ok_or_else(|| Error::Config {
                    line,
                    reason: format!("view {id} needs a background frame in user-frame mode"),
                })?;
                if !path.is_file() {
                    return Err(Error::at_path(path, "background frame not found"));
                }
            }
            if !calib_path.is_file() {
                return Err(Error::at_path(&calib_path, "calibration file not found"));
            }
            let calibration = read_calibration(&calib_path)?;
            let view = ViewConfig::new(id, kind, calibration, params).map_err(|e| Error::at_path(&calib_path, e))?;
            sources.push(ViewSource {
                view,
                frames,
                background: bg,
                max_range,
            });
        }
        let kind = sources[0].view.kind();
        if let Some(s) = sources.iter().find(|s| s.view.kind() != kind) {
            return Err(Error::Config {
                line: 0,
                reason: format!(
                    "view {} is {} but view {} is {kind}; all views must share one kind",
                    s.view.id,
                    s.view.kind(),
                    sources[0].view.id
                ),
            });
        }
        let n = sources.len();
        let min_votes = match kind {
            ViewKind::Rgb => min_votes.unwrap_or(n),
            ViewKind::Depth => min_votes.unwrap_or(1),
        };
        check(
            (1..=n).contains(&min_votes),
            root_line,
            format!("min_votes {min_votes} outside [1, {n}]"),
        )?;

        let (frame_count, stream_lengths) = match frame_count {
            Some(f) => {
                check(f >= 1, root_line, "frame_count must be at least 1")?;
                for s in &sources {
                    for t in 0..f {
                        let p = s.frame_path(t);
                        if !p.is_file() {
                            return Err(Error::at_path(p, format!("frame {t} of view {} not found", s.view.id)));
                        }
                    }
                }
                (f, vec![f; n])
            }
            None => {
                let lengths: Vec<usize> = sources.iter().map(probe_frames).collect();
                let f = *lengths.iter().min().expect("at least one view");
                if f == 0 {
                    let s = &sources[lengths.iter().position(|&l| l == 0).expect("a view with no frames")];
                    return Err(Error::at_path(s.frame_path(0), "no frames found"));
                }
                (f, lengths)
            }
        };

        Ok(Self {
            base_dir: base_dir.to_path_buf(),
            views: sources,
            kind,
            grid,
            background,
            cumulative,
            analytics,
            min_votes,
            output,
            metrics_log,
            threads,
            frame_count,
            stream_lengths,
        })
    }

    /// Whether the per-view streams had different lengths.
    pub fn streams_differ(&self) -> bool {
        self.stream_lengths.iter().any(|&l| l != self.frame_count)
    }
}
