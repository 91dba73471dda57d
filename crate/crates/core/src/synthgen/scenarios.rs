use std::f64::consts::PI;

use super::{Agent, CameraSpec, Extent, GridDef, Scenario, Waypoint};
use crate::error::{Error, Result};
use crate::geometry::GridSpec;
use crate::pipeline::ViewKind;

pub const SCENARIO_NAMES: [&str; 5] = ["crossing", "loiter", "crowd", "depth-walk", "dropbag"];

const CENTER: (f64, f64) = (10.0, 5.0);

const ALBEDOS: [[f32; 3]; 8] = [
    [0.55, 0.05, 0.05],
    [0.05, 0.10, 0.50],
    [0.05, 0.30, 0.08],
    [0.08, 0.08, 0.10],
    [0.35, 0.05, 0.40],
    [0.45, 0.20, 0.02],
    [0.02, 0.25, 0.30],
    [0.25, 0.12, 0.08],
];

fn extent() -> Extent {
    Extent {
        min_x: 0.0,
        min_y: 0.0,
        max_x: 20.0,
        max_y: 10.0,
    }
}

/// RGB camera on a circle around the scene centre, looking at it.
fn ring_camera(azimuth_deg: f64, distance: f64, height: f64) -> CameraSpec {
    let a = azimuth_deg.to_radians();
    CameraSpec {
        kind: ViewKind::Rgb,
        width: 320,
        height: 240,
        focal: 280.0,
        eye: [CENTER.0 + distance * a.cos(), CENTER.1 + distance * a.sin(), height],
        target: [CENTER.0, CENTER.1, 0.0],
        max_range: None,
    }
}

fn person(albedo: [f32; 3], waypoints: &[(f64, f64, usize)]) -> Agent {
    Agent {
        radius: 0.25,
        height: 1.75,
        albedo,
        waypoints: waypoints
            .iter()
            .map(|&(x, y, frame)| Waypoint { x, y, frame })
            .collect(),
        appear_frame: 0,
    }
}

fn base(name: &str, seed: u64, frame_count: usize, cameras: Vec<CameraSpec>, agents: Vec<Agent>) -> Scenario {
    Scenario {
        name: name.into(),
        extent: extent(),
        agents,
        cameras,
        frame_count,
        seed,
        noise_sigma: 0.01,
        grid: GridSpec::synthetic_default().into(),
        t_span: 100,
        min_votes: None,
    }
}

fn crossing() -> Scenario {
    base(
        "crossing",
        11,
        40,
        vec![ring_camera(-90.0, 8.0, 6.0), ring_camera(40.0, 8.0, 6.0)],
        vec![
            person(ALBEDOS[0], &[(7.0, 3.5, 0), (13.0, 6.5, 39)]),
            person(ALBEDOS[1], &[(8.0, 7.5, 0), (12.5, 2.5, 39)]),
        ],
    )
}

/// The walker enters at frame 10 so that the warm-up average never
/// saturates its start position.
fn loiter() -> Scenario {
    let mut walker = person(ALBEDOS[1], &[(5.5, 7.2, 0), (12.5, 7.2, 100), (5.5, 7.2, 199)]);
    walker.appear_frame = 10;
    base(
        "loiter",
        23,
        200,
        vec![ring_camera(-90.0, 8.0, 6.0), ring_camera(40.0, 8.0, 6.0)],
        vec![person(ALBEDOS[0], &[(9.0, 4.5, 0), (9.0, 4.5, 199)]), walker],
    )
}

/// Agents walk in from a 2.6 m circle to a 1.8 m one and then stand as a
/// group.
fn crowd() -> Scenario {
    let agents = (0..8)
        .map(|k| {
            let a = (k as f64 * 45.0 + 22.5) * PI / 180.0;
            let at = |r: f64| (CENTER.0 + r * a.cos(), CENTER.1 + r * a.sin());
            let (x0, y0) = at(2.6);
            let (x1, y1) = at(1.8);
            person(ALBEDOS[k], &[(x0, y0, 0), (x1, y1, 15)])
        })
        .collect();
    base(
        "crowd",
        37,
        200,
        vec![
            ring_camera(-90.0, 8.0, 8.0),
            ring_camera(30.0, 8.0, 8.0),
            ring_camera(150.0, 8.0, 8.0),
        ],
        agents,
    )
}

/// Walks away from the camera, pauses and walks back along the same line.
fn depth_walk() -> Scenario {
    Scenario {
        name: "depth-walk".into(),
        extent: Extent {
            min_x: -3.0,
            min_y: 0.0,
            max_x: 3.0,
            max_y: 6.0,
        },
        agents: vec![person(
            ALBEDOS[0],
            &[(-0.45, 1.5, 0), (-1.2, 4.0, 40), (-1.2, 4.0, 50), (-0.45, 1.5, 89)],
        )],
        cameras: vec![CameraSpec {
            kind: ViewKind::Depth,
            width: 176,
            height: 144,
            focal: 150.0,
            eye: [0.0, 0.0, 3.0],
            target: [0.0, 3.0, 0.0],
            max_range: Some(7.5),
        }],
        frame_count: 90,
        seed: 41,
        noise_sigma: 0.01,
        grid: GridDef {
            origin_x: -3.0,
            origin_y: 0.0,
            cell_size: 0.1,
            cols: 60,
            rows: 60,
        },
        t_span: 100,
        min_votes: None,
    }
}

/// A carrier walks in, leaves a bag at frame 60 and walks away.
fn dropbag() -> Scenario {
    let mut bag = person([0.12, 0.07, 0.02], &[(10.0, 5.45, 0)]);
    bag.radius = 0.2;
    bag.height = 0.45;
    bag.appear_frame = 60;
    base(
        "dropbag",
        53,
        220,
        vec![ring_camera(-90.0, 8.0, 6.0), ring_camera(40.0, 8.0, 6.0)],
        vec![
            person(
                ALBEDOS[1],
                &[
                    (6.5, 3.5, 0),
                    (10.0, 5.0, 60),
                    (12.5, 3.5, 95),
                    (13.0, 6.0, 160),
                    (12.5, 7.0, 219),
                ],
            ),
            bag,
        ],
    )
}

pub fn standard_scenarios() -> Vec<Scenario> {
    vec![crossing(), loiter(), crowd(), depth_walk(), dropbag()]
}

pub fn scenario_by_name(name: &str) -> Result<Scenario> {
    standard_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownScenario {
            name: name.to_string(),
            valid: SCENARIO_NAMES.join(", "),
        })
}
