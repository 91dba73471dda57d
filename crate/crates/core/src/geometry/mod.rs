//! Image ↔ ground-plane geometry: homographies fitted from floor markers,
//! pinhole cameras for depth backprojection, and the metric top-view grid.

mod camera;
mod grid;
mod homography;

pub use camera::{backproject_depth, PinholeCamera, ROTATION_TOL};
pub(crate) use camera::{check_rotation, orthonormalize};
pub use grid::{
    depth_mask_to_grid, depth_mask_to_grid_with_axes, points_to_grid, warp_mask_to_grid, GridSpec, GroundAxes,
    MAX_PIXEL_FOOTPRINT_CELLS,
};
pub use homography::{apply_homography, homography_from_points, Homography, HomographyFit, HORIZON_EPS};
