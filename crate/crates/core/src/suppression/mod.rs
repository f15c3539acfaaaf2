//! The suppression pipeline: sample each rib in ST space, differentiate
//! along `s`, smooth along `t`, reintegrate, clean the centerline seam, clamp,
//! splat back and subtract; finally blend each rib's border band.

mod pipeline;
mod stages;

pub use pipeline::{
    blend_border, suppress_all, suppress_rib, write_trace_dumps, BonePatch, PipelineOptions,
    Reintegration, RibFields, RibParams, RibSuppression, SuppressionParams, SuppressionResult,
};
pub use stages::{
    centerline_smooth, clamp_nonneg, derivative_s, gaussian_taps, reintegrate, reintegrate_paired,
    smooth_t, CenterlineGate, RATIO_EPS,
};
