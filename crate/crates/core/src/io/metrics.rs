//! One line per processed frame:
//!
//! ```text
//! frame=<n> occupied=<cells> clusters=<n> elapsed_ms=<f> fps=<f> <stage>_ms=<f> ... total_ms=<f>
//! ```
//!
//! Stage fields follow the pipeline stage order, then `cumulative_ms` and
//! `topview_flow_ms`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::pipeline::{Stage, StageTimings};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub frame: usize,
    pub occupied_cells: usize,
    pub clusters: usize,
    /// Wall-clock milliseconds since the first frame started.
    pub elapsed_ms: f64,
    pub stages: StageTimings,
    pub cumulative_ms: f64,
    pub topview_flow_ms: f64,
}

impl MetricsRecord {
    /// Frames per second over the whole run so far.
    pub fn fps(&self) -> f64 {
        if self.elapsed_ms > 0.0 {
            (self.frame + 1) as f64 / (self.elapsed_ms / 1e3)
        } else {
            0.0
        }
    }

    pub fn total_ms(&self) -> f64 {
        self.stages.total() + self.cumulative_ms + self.topview_flow_ms
    }

    pub fn to_line(&self) -> String {
        let mut s = format!(
            "frame={} occupied={} clusters={} elapsed_ms={:.6} fps={:.6}",
            self.frame,
            self.occupied_cells,
            self.clusters,
            self.elapsed_ms,
            self.fps()
        );
        for (stage, ms) in self.stages.iter() {
            let _ = write!(s, " {stage}_ms={ms:.6}");
        }
        let _ = write!(
            s,
            " cumulative_ms={:.6} topview_flow_ms={:.6} total_ms={:.6}",
            self.cumulative_ms,
            self.topview_flow_ms,
            self.total_ms()
        );
        s
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let bad = |reason: String| Error::InvalidData(format!("metrics line: {reason}"));
        let fields: Vec<(&str, &str)> = line
            .split_whitespace()
            .map(|f| f.split_once('=').ok_or_else(|| bad(format!("field `{f}` lacks `=`"))))
            .collect::<Result<_>>()?;
        let expected = 5 + Stage::ALL.len() + 3;
        if fields.len() != expected {
            return Err(bad(format!("expected {expected} fields, found {}", fields.len())));
        }
        let get = |i: usize, key: &str| -> Result<&str> {
            let (k, v) = fields[i];
            if k != key {
                return Err(bad(format!("field {i} is `{k}`, expected `{key}`")));
            }
            Ok(v)
        };
        let num = |i: usize, key: &str| -> Result<f64> {
            get(i, key)?
                .parse()
                .map_err(|_| bad(format!("`{key}` is not a number")))
        };
        let int = |i: usize, key: &str| -> Result<usize> {
            get(i, key)?
                .parse()
                .map_err(|_| bad(format!("`{key}` is not an integer")))
        };
        let mut stages = StageTimings::default();
        for (j, stage) in Stage::ALL.iter().enumerate() {
            stages.add(*stage, num(5 + j, &format!("{stage}_ms"))?);
        }
        let k = 5 + Stage::ALL.len();
        Ok(Self {
            frame: int(0, "frame")?,
            occupied_cells: int(1, "occupied")?,
            clusters: int(2, "clusters")?,
            elapsed_ms: num(3, "elapsed_ms")?,
            stages,
            cumulative_ms: num(k, "cumulative_ms")?,
            topview_flow_ms: num(k + 1, "topview_flow_ms")?,
        })
    }
}
