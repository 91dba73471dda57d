//! File formats: netpbm rasters, calibration text, run configuration and
//! the per-frame metrics log.

pub mod calib;
pub mod config;
pub mod metrics;
pub mod pnm;

pub use calib::{parse_calibration, read_calibration, serialize_calibration, CalibError};
pub use config::{format_frame, AnalyticsSettings, BackgroundSetting, RunConfig, ViewSource};
pub use metrics::MetricsRecord;
pub use pnm::{decode, encode, PnmError, PnmImage};
