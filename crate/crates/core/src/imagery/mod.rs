//! Image and mask data model, PNG I/O and boundary tracing.

mod image;
pub mod io;
mod mask;
mod trace;

pub use image::Image;
pub use io::{load_image, save_image, BitDepthOut};
pub use mask::{
    load_mask_set, save_mask_set, ManifestRib, MaskManifest, RibMask, RibMaskSet,
    MIN_CONTOUR_AGREEMENT, MIN_MASK_PIXELS,
};
pub use trace::{components4, trace_contour};
