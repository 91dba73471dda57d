//! Synthetic multi-camera scenes with known ground truth.
//!
//! Pedestrians are upright cylinders standing on the plane `Z = 0` of a
//! right-handed world with `Z` up. RGB views see them flat-shaded over a
//! textured floor; depth views see a z-buffer of the same geometry.

mod render;
mod scenarios;

use nalgebra::{Matrix3, Vector3};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{GridSpec, Homography, PinholeCamera};
use crate::imaging::BinaryMask;
use crate::pipeline::ViewKind;

pub use render::{render_background, render_depth, render_frame, render_rgb, Frame, SKY};
pub use scenarios::{scenario_by_name, standard_scenarios, SCENARIO_NAMES};

/// Maps synthetic world coordinates `(X, Y, up)` to the depth-calibration
/// frame `(X, -up, Y)`, in which dropping the second coordinate leaves the
/// ground position.
pub const DEPTH_FRAME: Matrix3<f64> = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub frame: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Agent {
    /// Footprint radius in metres.
    pub radius: f64,
    pub height: f64,
    pub albedo: [f32; 3],
    /// Piecewise-linear trajectory; held constant outside its frame range.
    pub waypoints: Vec<Waypoint>,
    /// First frame in which the agent exists.
    #[serde(default)]
    pub appear_frame: usize,
}

impl Agent {
    pub fn position(&self, t: usize) -> (f64, f64) {
        let w = &self.waypoints;
        if t <= w[0].frame {
            return (w[0].x, w[0].y);
        }
        for pair in w.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if t <= b.frame {
                let s = (t - a.frame) as f64 / (b.frame - a.frame) as f64;
                return (a.x + s * (b.x - a.x), a.y + s * (b.y - a.y));
            }
        }
        let last = w[w.len() - 1];
        (last.x, last.y)
    }

    pub fn present(&self, t: usize) -> bool {
        t >= self.appear_frame
    }

    fn validate(&self, i: usize) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("agent", format!("agent {i}: {reason}")));
        if !(self.radius > 0.0 && self.height > 0.0) {
            return bad(format!(
                "radius {} and height {} must be positive",
                self.radius, self.height
            ));
        }
        if self.albedo.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return bad("albedo outside [0, 1]".into());
        }
        if self.waypoints.is_empty() {
            return bad("no waypoints".into());
        }
        if self.waypoints.windows(2).any(|p| p[1].frame <= p[0].frame) {
            return bad("waypoint frames must be strictly increasing".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub kind: ViewKind,
    pub width: usize,
    pub height: usize,
    /// Focal length in pixels; the principal point is the image centre.
    pub focal: f64,
    pub eye: [f64; 3],
    pub target: [f64; 3],
    /// Depth views only; samples beyond it are invalid.
    #[serde(default)]
    pub max_range: Option<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraRig {
    pub kind: ViewKind,
    pub camera: PinholeCamera,
    pub width: usize,
    pub height: usize,
    pub max_range: f32,
}

impl CameraRig {
    pub fn from_spec(spec: &CameraSpec) -> Result<Self> {
        if spec.width < 3 || spec.height < 3 {
            return Err(Error::invalid(
                "camera",
                format!("{}x{} image", spec.width, spec.height),
            ));
        }
        let camera = PinholeCamera::look_at(
            spec.focal,
            spec.focal,
            (spec.width as f64 - 1.0) / 2.0,
            (spec.height as f64 - 1.0) / 2.0,
            Vector3::from(spec.eye),
            Vector3::from(spec.target),
            Vector3::z(),
        )?;
        if spec.eye[2] <= 0.0 {
            return Err(Error::invalid("camera", "eye must be above the ground"));
        }
        let max_range = match (spec.kind, spec.max_range) {
            (ViewKind::Depth, Some(m)) if m > 0.0 && m * 1000.0 <= 65535.0 => m,
            (ViewKind::Depth, m) => {
                return Err(Error::invalid(
                    "max_range",
                    format!("{m:?}: depth cameras need (0, 65.535] m"),
                ))
            }
            (ViewKind::Rgb, None) => f32::INFINITY,
            (ViewKind::Rgb, Some(_)) => return Err(Error::invalid("max_range", "only for depth cameras")),
        };
        Ok(Self {
            kind: spec.kind,
            camera,
            width: spec.width,
            height: spec.height,
            max_range,
        })
    }

    /// Image → ground homography induced by the pinhole and `Z = 0`.
    pub fn homography(&self) -> Result<Homography> {
        self.camera.ground_homography()
    }

    /// The camera expressed in the depth-calibration frame.
    pub fn depth_calibration(&self) -> Result<PinholeCamera> {
        self.camera.reframed(&DEPTH_FRAME)
    }

    /// Whether a world point projects inside the image.
    pub fn sees(&self, p: &Vector3<f64>) -> bool {
        match self.camera.project(p) {
            Some(((x, y), _)) => x >= -0.5 && y >= -0.5 && x < self.width as f64 - 0.5 && y < self.height as f64 - 0.5,
            None => false,
        }
    }
}

/// Rectangle the agents must stay inside.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Extent {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDef {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub cols: usize,
    pub rows: usize,
}

impl GridDef {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.origin_x, self.origin_y, self.cell_size, self.cols, self.rows)
    }
}

impl From<GridSpec> for GridDef {
    fn from(g: GridSpec) -> Self {
        Self {
            origin_x: g.origin_x,
            origin_y: g.origin_y,
            cell_size: g.cell_size,
            cols: g.cols,
            rows: g.rows,
        }
    }
}

fn default_t_span() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub extent: Extent,
    pub agents: Vec<Agent>,
    pub cameras: Vec<CameraSpec>,
    pub frame_count: usize,
    pub seed: u64,
    /// Standard deviation of the additive pixel noise: colour units for RGB,
    /// metres for depth.
    #[serde(default)]
    pub noise_sigma: f32,
    pub grid: GridDef,
    /// Window of the sliding cumulative grid written into run configs.
    #[serde(default = "default_t_span")]
    pub t_span: usize,
    /// Vote threshold written into run configs; defaults to all views.
    #[serde(default)]
    pub min_votes: Option<usize>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::invalid("scenario", e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_count < 2 {
            return Err(Error::invalid("frame_count", "needs at least 2 frames"));
        }
        if self.cameras.is_empty() {
            return Err(Error::invalid("cameras", "at least one camera is required"));
        }
        let kind = self.cameras[0].kind;
        if self.cameras.iter().any(|c| c.kind != kind) {
            return Err(Error::invalid("cameras", "all cameras must share one kind"));
        }
        for c in &self.cameras {
            CameraRig::from_spec(c)?;
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma", "must be non-negative"));
        }
        if self.t_span == 0 {
            return Err(Error::invalid("t_span", "must be at least 1"));
        }
        if let Some(v) = self.min_votes {
            if !(1..=self.cameras.len()).contains(&v) {
                return Err(Error::invalid(
                    "min_votes",
                    format!("{v} outside [1, {}]", self.cameras.len()),
                ));
            }
        }
        self.grid.spec()?;
        let e = &self.extent;
        for (i, a) in self.agents.iter().enumerate() {
            a.validate(i)?;
            // piecewise-linear paths stay in the rectangle iff their vertices do
            if let Some(w) = a
                .waypoints
                .iter()
                .find(|w| w.x < e.min_x || w.x > e.max_x || w.y < e.min_y || w.y > e.max_y)
            {
                return Err(Error::invalid(
                    "agent",
                    format!("agent {i}: waypoint ({}, {}) outside the world extent", w.x, w.y),
                ));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> ViewKind {
        self.cameras[0].kind
    }

    pub fn rig(&self, camera: usize) -> Result<CameraRig> {
        let spec = self
            .cameras
            .get(camera)
            .ok_or_else(|| Error::invalid("camera", format!("index {camera} of {}", self.cameras.len())))?;
        CameraRig::from_spec(spec)
    }

    pub fn rigs(&self) -> Result<Vec<CameraRig>> {
        (0..self.cameras.len()).map(|i| self.rig(i)).collect()
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.grid.spec().expect("validated grid")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise(mut self, sigma: f32) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub(crate) fn check_frame(&self, t: usize) -> Result<()> {
        if t >= self.frame_count {
            return Err(Error::invalid(
                "t",
                format!("frame {t} outside [0, {})", self.frame_count),
            ));
        }
        Ok(())
    }
}

fn disc_mask(spec: &GridSpec, mask: &mut BinaryMask, (cx, cy): (f64, f64), r: f64) {
    let (c0, r0) = spec.to_cell_coords(cx - r, cy - r);
    let (c1, r1) = spec.to_cell_coords(cx + r, cy + r);
    if c1 < 0.0 || r1 < 0.0 || c0 >= spec.cols as f64 || r0 >= spec.rows as f64 {
        return;
    }
    let clamp = |v: f64, n: usize| v.floor().clamp(0.0, n as f64 - 1.0) as usize;
    for row in clamp(r0, spec.rows)..=clamp(r1, spec.rows) {
        for col in clamp(c0, spec.cols)..=clamp(c1, spec.cols) {
            let (x, y) = spec.cell_center(col, row);
            if (x - cx).powi(2) + (y - cy).powi(2) <= r * r {
                mask.set(col, row, true);
            }
        }
    }
}

/// Cells whose centre lies inside some present agent's footprint disc.
pub fn ground_truth_footprint(scenario: &Scenario, spec: &GridSpec, t: usize) -> Result<BinaryMask> {
    scenario.check_frame(t)?;
    let mut mask = spec.empty_mask();
    for a in scenario.agents.iter().filter(|a| a.present(t)) {
        disc_mask(spec, &mut mask, a.position(t), a.radius);
    }
    Ok(mask)
}

/// Footprint of a single agent.
pub fn agent_footprint(agent: &Agent, spec: &GridSpec, t: usize) -> BinaryMask {
    let mut mask = spec.empty_mask();
    if agent.present(t) {
        disc_mask(spec, &mut mask, agent.position(t), agent.radius);
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::connected_components;

    fn agent_at(x: f64, y: f64, radius: f64) -> Agent {
        Agent {
            radius,
            height: 1.7,
            albedo: [0.8, 0.1, 0.1],
            waypoints: vec![Waypoint { x, y, frame: 0 }],
            appear_frame: 0,
        }
    }

    fn scene(agents: Vec<Agent>) -> Scenario {
        Scenario {
            name: "test".into(),
            extent: Extent {
                min_x: 0.0,
                min_y: 0.0,
                max_x: 20.0,
                max_y: 10.0,
            },
            agents,
            cameras: vec![CameraSpec {
                kind: ViewKind::Rgb,
                width: 64,
                height: 48,
                focal: 60.0,
                eye: [10.0, -3.0, 6.0],
                target: [10.0, 5.0, 0.0],
                max_range: None,
            }],
            frame_count: 10,
            seed: 1,
            noise_sigma: 0.0,
            grid: GridSpec::synthetic_default().into(),
            t_span: 100,
            min_votes: None,
        }
    }

    #[test]
    fn trajectory_interpolation() {
        let mut a = agent_at(0.0, 0.0, 0.3);
        a.waypoints = vec![
            Waypoint {
                x: 0.0,
                y: 0.0,
                frame: 2,
            },
            Waypoint {
                x: 4.0,
                y: 2.0,
                frame: 6,
            },
            Waypoint {
                x: 4.0,
                y: 6.0,
                frame: 8,
            },
        ];
        assert_eq!(a.position(0), (0.0, 0.0));
        assert_eq!(a.position(4), (2.0, 1.0));
        assert_eq!(a.position(7), (4.0, 4.0));
        assert_eq!(a.position(50), (4.0, 6.0));
    }

    #[test]
    fn empty_footprint() {
        let s = scene(vec![]);
        assert!(ground_truth_footprint(&s, &s.grid_spec(), 0).unwrap().is_empty());
        assert!(ground_truth_footprint(&s, &s.grid_spec(), 10).is_err());
    }

    #[test]
    fn disc_cell_count() {
        let s = scene(vec![agent_at(10.013, 5.007, 0.3)]);
        let n = ground_truth_footprint(&s, &s.grid_spec(), 0).unwrap().count() as f64;
        let area = std::f64::consts::PI * (0.3f64 / 0.05).powi(2);
        assert!((n - area).abs() <= 8.0, "{n} vs {area}");
    }

    #[test]
    fn two_agents_two_clusters() {
        let s = scene(vec![agent_at(6.0, 5.0, 0.3), agent_at(11.0, 5.0, 0.3)]);
        let spec = s.grid_spec();
        let m = ground_truth_footprint(&s, &spec, 0).unwrap();
        let labels = connected_components(&m, 1);
        assert_eq!(labels.len(), 2);
        for (c, x) in labels.components().iter().zip([6.0, 11.0]) {
            let cells: Vec<_> = m.iter_set().filter(|&(cx, cy)| labels.get(cx, cy) == c.label).collect();
            let n = cells.len() as f64;
            let mx = cells.iter().map(|p| p.0 as f64).sum::<f64>() / n;
            let my = cells.iter().map(|p| p.1 as f64).sum::<f64>() / n;
            let (wx, wy) = spec.cell_center(0, 0);
            let (wx, wy) = (wx + mx * spec.cell_size, wy + my * spec.cell_size);
            assert!((wx - x).abs() <= 0.025 && (wy - 5.0).abs() <= 0.025, "({wx}, {wy})");
        }
    }

    #[test]
    fn footprint_near_grid_edge() {
        let s = scene(vec![agent_at(0.1, 0.1, 0.3)]);
        let m = ground_truth_footprint(&s, &s.grid_spec(), 0).unwrap();
        assert!(m.count() > 10);
    }

    #[test]
    fn validation() {
        let mut s = scene(vec![agent_at(30.0, 5.0, 0.3)]);
        assert!(s.validate().is_err());
        s.agents = vec![agent_at(3.0, 5.0, 0.0)];
        assert!(s.validate().is_err());
        s.agents = vec![agent_at(3.0, 5.0, 0.3)];
        s.frame_count = 1;
        assert!(s.validate().is_err());
        s.frame_count = 2;
        assert!(s.validate().is_ok());
        s.agents[0].waypoints.push(Waypoint {
            x: 1.0,
            y: 1.0,
            frame: 0,
        });
        assert!(s.validate().is_err());
    }

    #[test]
    fn homography_consistency() {
        let s = scene(vec![]);
        let rig = s.rig(0).unwrap();
        let inv = rig.homography().unwrap().inverse();
        for (x, y) in [(8.0, 3.0), (12.5, 7.25), (10.0, 5.0)] {
            let ((px, py), _) = rig.camera.project(&Vector3::new(x, y, 0.0)).unwrap();
            let (hx, hy) = inv.apply(x, y).unwrap();
            assert!((px - hx).abs() < 1e-9 && (py - hy).abs() < 1e-9);
        }
    }

    #[test]
    fn depth_frame_is_a_rotation() {
        assert!((DEPTH_FRAME.determinant() - 1.0).abs() < 1e-15);
        let p = DEPTH_FRAME * Vector3::new(2.0, 3.0, 1.5);
        assert_eq!(p, Vector3::new(2.0, -1.5, 3.0));
    }
}
