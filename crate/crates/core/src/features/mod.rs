//! Edge detection, component labelling, dense optical flow and the
//! motion-aligned edge selection used to pick the pixels that are
//! reprojected into the top view.

mod angular;
mod canny;
mod components;
mod flow;

pub use angular::{
    angular_threshold, line_angle, mean_flow_per_component, scanline_fill, ComponentFlow, STATIONARY_FLOW,
};
pub use canny::{canny, canny_with_gradients, CannyParams, EdgeMap, SOBEL_NORM};
pub use components::connected_components;
pub use flow::{dense_flow, FlowParams};
