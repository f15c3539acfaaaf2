//! Contour-normal ("ST") coordinates for a closed piecewise-linear contour:
//! `t` is arc length along the contour, `s` is depth along the inward normal.

mod contour;
mod field;
mod index;
mod transform;

pub use contour::{Contour, Point};
pub use field::{
    backproject, column_count, compute_depth, sample_field, sample_field_arc, Backprojection,
    FieldDump, StField, SENTINEL,
};
pub use index::{nearest_brute, Foot, SegmentIndex};
pub use transform::{forward_st, forward_st_indexed, inverse_st, StCoord};
