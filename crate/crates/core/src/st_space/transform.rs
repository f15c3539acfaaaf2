use super::contour::{Contour, Point};
use super::index::SegmentIndex;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StCoord {
    /// Inward depth from the contour.
    pub s: f64,
    /// Arc position along the contour.
    pub t: f64,
}

/// Image-space position of `(s, t)`: `gamma(t) + s * n(t)`.
pub fn inverse_st(c: &Contour, s: f64, t: f64) -> Point {
    let t = c.wrap(t);
    c.point_at(t).add(c.normal_at(t).scale(s))
}

/// ST coordinates of an interior point: `s` is the distance to the nearest
/// contour point and `t` its arc position. Along an edge the inverse uses
/// the edge's own normal, so the arc-length rescaling between the contour
/// edge and its inward offset is the identity.
pub fn forward_st(c: &Contour, p: Point) -> Result<StCoord> {
    forward_st_indexed(c, &SegmentIndex::new(c), p)
}

pub fn forward_st_indexed(c: &Contour, index: &SegmentIndex, p: Point) -> Result<StCoord> {
    if !c.contains(p) {
        return Err(Error::OutsideContour { x: p.x, y: p.y });
    }
    let foot = index.nearest(c, p);
    if foot.distance <= 1e-12 {
        return Err(Error::OutsideContour { x: p.x, y: p.y });
    }
    Ok(StCoord {
        s: foot.distance,
        t: foot.t,
    })
}
