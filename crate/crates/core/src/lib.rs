//! Top-view occupancy grids from calibrated RGB and depth cameras.
//!
//! Each view's foreground is reduced to motion-aligned edge areas and
//! reprojected onto a metric ground grid; views are fused by voting and the
//! fused occupancy feeds cumulative grids, top-view flow and saturation
//! queries.

pub mod analytics;
pub mod app;
pub mod error;
pub mod features;
pub mod geometry;
pub mod imaging;
pub mod io;
pub mod pipeline;
pub mod synthgen;

pub use error::{Error, Result};
