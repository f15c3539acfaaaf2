//! Rib shadow suppression for chest radiographs.
//!
//! Each rib is unrolled into contour-normal coordinates (`t` along the rib
//! outline, `s` inward), its intensity is differentiated along `s`, smoothed
//! along `t` to discard everything that does not follow the rib outline, and
//! integrated back into a bone-shadow estimate that is subtracted from the
//! radiograph.
//!
//! The crate also ships a phantom generator with exact ground truth, the
//! usual image-quality metrics and a seeded random grid search over the
//! suppression hyperparameters.

pub mod error;
pub mod imagery;
pub mod metrics;
pub mod phantom;
pub mod st_space;
pub mod suppression;
pub mod tuner;

pub use error::{Error, Result};
pub use imagery::{Image, RibMask, RibMaskSet};
pub use st_space::{Contour, Point, StField};
pub use suppression::{SuppressionParams, SuppressionResult};
