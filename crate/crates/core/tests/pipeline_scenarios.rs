mod common;

use common::*;
use topgrid::geometry::warp_mask_to_grid;
use topgrid::imaging::{BinaryMask, ColorImage};
use topgrid::pipeline::{process_depth_frame, process_rgb_frames, process_view_rgb, BackgroundModel, ViewConfig};
use topgrid::synthgen::{agent_footprint, ground_truth_footprint, scenario_by_name, Scenario};

/// Steep camera south of the agent; the reprojected silhouette stays short.
fn steep_scene(agents: Vec<topgrid::synthgen::Agent>) -> Scenario {
    scene("steep", vec![camera([10.0, -1.0, 12.0], [10.0, 5.0, 0.0])], agents, 2)
}

fn first_view(s: &Scenario, t: usize) -> topgrid::pipeline::ViewResult {
    let views = rgb_views(s);
    let frames = color_frames(s, t);
    let bg = color_backgrounds(s);
    process_view_rgb(&views[0], &frames[0], &frames[0], &bg[0], &s.grid_spec()).unwrap()
}

fn metres(spec: &topgrid::geometry::GridSpec, cells: f64) -> f64 {
    cells * spec.cell_size
}

#[test]
fn static_scene_gives_empty_view_mask() {
    let s = steep_scene(vec![]);
    let r = first_view(&s, 0);
    assert_eq!(r.grid.count(), 0);
    assert_eq!(r.objects.count(), 0);
}

#[test]
fn single_agent_view_mask_near_footprint() {
    let s = steep_scene(vec![agent(10.0, 5.0, RED)]);
    let spec = s.grid_spec();
    let r = first_view(&s, 0);
    assert!(r.grid.count() > 0);
    let c = mask_centroid(&r.grid).unwrap();
    let truth = mask_centroid(&ground_truth_footprint(&s, &spec, 0).unwrap()).unwrap();
    let d = metres(&spec, dist(c, truth));
    assert!(d <= 1.0, "view mask centroid {d:.2} m from the footprint centroid");
}

#[test]
fn agents_five_metres_apart_give_disjoint_clusters() {
    let s = steep_scene(vec![agent(7.5, 5.0, RED), agent(12.5, 5.0, BLUE)]);
    let spec = s.grid_spec();
    let r = first_view(&s, 0);
    let anchors: Vec<(f64, f64)> = s
        .agents
        .iter()
        .map(|a| {
            let (x, y) = a.position(0);
            cell_index_coords(&spec, x, y)
        })
        .collect();
    // every cell belongs to the neighbourhood of exactly one agent
    let near = |cell: (f64, f64), a: (f64, f64)| metres(&spec, dist(cell, a)) < 2.0;
    let mut hit = [false, false];
    for b in blobs(&r.grid) {
        let owners: Vec<usize> = (0..2).filter(|&k| near(b.centroid, anchors[k])).collect();
        assert_eq!(owners.len(), 1, "cluster at {:?} not attributable", b.centroid);
        hit[owners[0]] = true;
    }
    assert_eq!(hit, [true, true]);
    let bridge = r.grid.iter_set().any(|(c, rr)| {
        let cell = (c as f64, rr as f64);
        !near(cell, anchors[0]) && !near(cell, anchors[1])
    });
    assert!(!bridge);
}

#[test]
fn single_view_fusion_is_the_view_mask() {
    let s = steep_scene(vec![agent(10.0, 5.0, RED)]);
    let frames = color_frames(&s, 0);
    let r = process_rgb_frames(
        &rgb_views(&s),
        &frames,
        &frames,
        &color_backgrounds(&s),
        &s.grid_spec(),
        1,
    )
    .unwrap();
    assert!(r.occupancy.count() > 0);
    assert_eq!(r.occupancy, r.views[0].grid);
}

fn two_camera_scene() -> Scenario {
    scene(
        "pair",
        vec![
            camera([10.0, -3.0, 6.0], [10.0, 5.0, 0.0]),
            camera([16.1, 10.1, 6.0], [10.0, 5.0, 0.0]),
        ],
        vec![agent(10.0, 5.0, RED)],
        2,
    )
}

/// Dark rectangle standing in for something only one camera sees.
fn paint_ghost(img: &ColorImage, x0: usize, y0: usize) -> ColorImage {
    let (w, h) = img.dims();
    let pixels = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if (x0..x0 + 14).contains(&x) && (y0..y0 + 30).contains(&y) {
                [0.05, 0.05, 0.08]
            } else {
                img.pixels()[i]
            }
        })
        .collect();
    ColorImage::from_pixels(w, h, pixels).unwrap()
}

#[test]
fn one_view_ghost_is_excluded() {
    let s = two_camera_scene();
    let spec = s.grid_spec();
    let mut frames = color_frames(&s, 0);
    frames[1] = paint_ghost(&frames[1], 30, 180);
    let r = process_rgb_frames(&rgb_views(&s), &frames, &frames, &color_backgrounds(&s), &spec, 2).unwrap();
    let (x, y) = s.agents[0].position(0);
    let anchor = cell_index_coords(&spec, x, y);
    let far = |(c, rr): (usize, usize)| metres(&spec, dist((c as f64, rr as f64), anchor)) > 3.0;
    let ghost_cells = r.views[1].grid.iter_set().filter(|&c| far(c)).count();
    assert!(ghost_cells > 0, "the painted ghost must reach the grid of its view");
    assert!(r.occupancy.count() > 0);
    assert_eq!(r.occupancy.iter_set().filter(|&c| far(c)).count(), 0);
}

#[test]
fn fully_occluded_camera_empties_the_intersection() {
    let mut s = two_camera_scene();
    s.cameras.push(camera([3.9, 10.1, 6.0], [10.0, 5.0, 0.0]));
    let mut frames = color_frames(&s, 0);
    let (w, h) = frames[2].dims();
    frames[2] = ColorImage::filled(w, h, [0.0, 0.0, 0.0]).unwrap();
    let r = process_rgb_frames(
        &rgb_views(&s),
        &frames,
        &frames,
        &color_backgrounds(&s),
        &s.grid_spec(),
        3,
    )
    .unwrap();
    assert!(r.views[0].grid.count() > 0 && r.views[1].grid.count() > 0);
    assert_eq!(r.occupancy.count(), 0);
}

#[test]
fn depth_background_frame_gives_empty_occupancy() {
    let s = scenario_by_name("depth-walk").unwrap().with_noise(0.0);
    let view = &depth_views(&s)[0];
    let bg = depth_backgrounds(&s).remove(0);
    let r = process_depth_frame(view, bg.frame(), bg.frame(), &bg, &s.grid_spec()).unwrap();
    assert_eq!(r.occupancy.count(), 0);
}

#[test]
fn depth_standing_agent_is_kept() {
    let mut s = scenario_by_name("depth-walk").unwrap();
    let (x, y) = (0.4, 3.2);
    s.agents = vec![agent(x, y, RED)];
    let spec = s.grid_spec();
    let view = &depth_views(&s)[0];
    let frame = depth_frames(&s, 5).remove(0);
    let bg = depth_backgrounds(&s).remove(0);
    let r = process_depth_frame(view, &frame, &frame, &bg, &spec).unwrap();
    assert!(r.occupancy.count() > 0);
    let footprint = dilate1(&agent_footprint(&s.agents[0], &spec, 5));
    let inside = r.occupancy.iter_set().filter(|&(c, rr)| footprint.get(c, rr)).count();
    assert!(inside > 0);
    let anchor = cell_index_coords(&spec, x, y);
    let reach = s.agents[0].radius / spec.cell_size + 2.0;
    assert!(r
        .occupancy
        .iter_set()
        .all(|(c, rr)| dist((c as f64, rr as f64), anchor) <= reach));
}

#[test]
fn warped_silhouette_overlaps_footprint() {
    let s = scene(
        "top",
        vec![camera([10.0, 0.5, 20.0], [10.0, 5.0, 0.0])],
        vec![agent(10.0, 5.0, RED)],
        2,
    );
    let spec = s.grid_spec();
    let img = &color_frames(&s, 0)[0];
    let bg = color_backgrounds(&s).remove(0);
    let silhouette = BinaryMask::from_fn(img.width(), img.height(), |x, y| {
        let (a, b) = (img.get(x, y), bg.frame().get(x, y));
        (0..3).any(|k| (a[k] - b[k]).abs() > 0.1)
    });
    let h = s.rig(0).unwrap().homography().unwrap();
    let warped = warp_mask_to_grid(&silhouette, &h, &spec);
    let truth = ground_truth_footprint(&s, &spec, 0).unwrap();
    let score = iou(&warped, &truth);
    assert!(score > 0.3, "IoU {score:.3}");
}

#[test]
fn footprint_rasterization_matches_disc_area() {
    let mut a = agent(10.0, 5.0, RED);
    a.radius = 0.3;
    let s = steep_scene(vec![a]);
    let n = ground_truth_footprint(&s, &s.grid_spec(), 0).unwrap().count() as i64;
    assert!((n - 113).abs() <= 8, "{n} cells");
}

#[test]
fn footprints_of_distant_agents_are_separate_discs() {
    let s = steep_scene(vec![agent(7.5, 5.0, RED), agent(12.5, 5.0, BLUE)]);
    let spec = s.grid_spec();
    let clusters = blobs(&ground_truth_footprint(&s, &spec, 0).unwrap());
    assert_eq!(clusters.len(), 2);
    for a in &s.agents {
        let (x, y) = a.position(0);
        let c = cell_index_coords(&spec, x, y);
        assert!(clusters.iter().any(|b| dist(b.centroid, c) <= 0.5));
    }
}

#[test]
fn background_model_window_of_alternating_frames() {
    let black = ColorImage::filled(4, 4, [0.0; 3]).unwrap();
    let white = ColorImage::filled(4, 4, [1.0; 3]).unwrap();
    let mut bg = BackgroundModel::running_mean(black.clone(), 4).unwrap();
    for k in 1..9 {
        bg.update(if k % 2 == 0 { &black } else { &white }).unwrap();
    }
    assert!(bg.frame().pixels().iter().flatten().all(|&v| (v - 0.5).abs() < 1e-6));
}

#[test]
fn view_config_rejects_mismatched_calibration() {
    let s = scenario_by_name("depth-walk").unwrap();
    let cam = s.rig(0).unwrap().depth_calibration().unwrap();
    let err = ViewConfig::new(
        0,
        topgrid::pipeline::ViewKind::Rgb,
        topgrid::pipeline::Calibration::Pinhole(cam),
        topgrid::pipeline::DetectionParams::rgb_default(),
    );
    assert!(err.is_err());
}
