use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    #[inline]
    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    #[inline]
    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    #[inline]
    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Left perpendicular `(-y, x)`.
    #[inline]
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn distance(self, o: Point) -> f64 {
        self.sub(o).norm()
    }
}

/// Closed, counterclockwise, piecewise-linear contour parametrised by arc
/// length `t` in `[0, total_length)`.
///
/// "Counterclockwise" means positive shoelace area in raw `(x, y)`
/// coordinates, so the interior lies to the left of every edge and the inward
/// unit normal of an edge is the left perpendicular of its direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    vertices: Vec<Point>,
    edge_lengths: Vec<f64>,
    cum_length: Vec<f64>,
    normals: Vec<Point>,
    total_length: f64,
}

impl Contour {
    /// Builds a contour from CCW vertices. A repeated closing vertex and
    /// zero-length edges are dropped.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let mut vs: Vec<Point> = Vec::with_capacity(vertices.len());
        for v in vertices {
            if !(v.x.is_finite() && v.y.is_finite()) {
                return Err(Error::InvalidContour("non-finite vertex".into()));
            }
            if vs.last() != Some(&v) {
                vs.push(v);
            }
        }
        while vs.len() > 1 && vs.first() == vs.last() {
            vs.pop();
        }
        if vs.len() < 3 {
            return Err(Error::InvalidContour(format!(
                "need at least 3 distinct vertices, got {}",
                vs.len()
            )));
        }
        let area = shoelace(&vs);
        if !(area > 0.0) {
            return Err(Error::InvalidContour(format!(
                "contour must be counterclockwise with positive area (shoelace {area})"
            )));
        }
        let n = vs.len();
        let mut edge_lengths = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        let mut cum_length = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        for i in 0..n {
            let d = vs[(i + 1) % n].sub(vs[i]);
            let len = d.norm();
            cum_length.push(acc);
            acc += len;
            edge_lengths.push(len);
            normals.push(d.perp().scale(1.0 / len));
        }
        cum_length.push(acc);
        Ok(Self {
            vertices: vs,
            edge_lengths,
            cum_length,
            normals,
            total_length: acc,
        })
    }

    /// Like [`Contour::new`] but accepts either orientation.
    pub fn new_any_orientation(mut vertices: Vec<Point>) -> Result<Self> {
        if shoelace(&vertices) < 0.0 {
            vertices.reverse();
        }
        Self::new(vertices)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edge_lengths(&self) -> &[f64] {
        &self.edge_lengths
    }

    /// Prefix sums of edge lengths; `cum_length()[i]` is the arc position of
    /// vertex `i`, and the final entry equals `total_length()`.
    pub fn cum_length(&self) -> &[f64] {
        &self.cum_length
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn signed_area(&self) -> f64 {
        shoelace(&self.vertices)
    }

    #[inline]
    pub fn edge(&self, i: usize) -> (Point, Point) {
        (
            self.vertices[i],
            self.vertices[(i + 1) % self.vertices.len()],
        )
    }

    #[inline]
    pub fn edge_normal(&self, i: usize) -> Point {
        self.normals[i]
    }

    /// Angular-bisector inward normal at vertex `i`.
    pub fn vertex_normal(&self, i: usize) -> Point {
        let n = self.vertices.len();
        let sum = self.normals[(i + n - 1) % n].add(self.normals[i]);
        let len = sum.norm();
        if len < 1e-12 {
            self.normals[i]
        } else {
            sum.scale(1.0 / len)
        }
    }

    pub fn wrap(&self, t: f64) -> f64 {
        let w = t.rem_euclid(self.total_length);
        if w >= self.total_length {
            0.0
        } else {
            w
        }
    }

    /// Edge index containing arc position `t` (already wrapped) and the
    /// offset along it.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let i = match self.cum_length.binary_search_by(|c| c.total_cmp(&t)) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
        .min(self.vertices.len() - 1);
        (i, t - self.cum_length[i])
    }

    pub fn point_at(&self, t: f64) -> Point {
        let (i, off) = self.locate(self.wrap(t));
        let (a, b) = self.edge(i);
        let len = self.edge_lengths[i];
        a.add(b.sub(a).scale(off / len))
    }

    /// Inward unit normal at `t`: the edge normal inside an edge, the angular
    /// bisector exactly on a vertex.
    pub fn normal_at(&self, t: f64) -> Point {
        let (i, off) = self.locate(self.wrap(t));
        if off == 0.0 {
            self.vertex_normal(i)
        } else {
            self.normals[i]
        }
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, p: Point) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// Pixel-center rasterisation of the interior: `true` where the center
    /// `(x + 0.5, y + 0.5)` is inside. Scanline crossings, so O(V) per row.
    pub fn rasterize(&self, width: usize, height: usize) -> Vec<bool> {
        let mut out = vec![false; width * height];
        let n = self.vertices.len();
        let mut xs: Vec<f64> = Vec::new();
        for y in 0..height {
            let py = y as f64 + 0.5;
            xs.clear();
            for i in 0..n {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                if (a.y > py) != (b.y > py) {
                    xs.push(a.x + (py - a.y) / (b.y - a.y) * (b.x - a.x));
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                // centers in [x0, x1), the same half-open rule as `contains`
                let start = (pair[0] - 0.5).ceil();
                let end = (pair[1] - 0.5).ceil() - 1.0;
                let start = start.max(0.0) as i64;
                let end = end.min(width as f64 - 1.0) as i64;
                for x in start..=end {
                    out[y * width + x as usize] = true;
                }
            }
        }
        out
    }
}

pub(crate) fn shoelace(vs: &[Point]) -> f64 {
    let n = vs.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = vs[i];
        let b = vs[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

/// Closest point parameter `u in [0, 1]` on segment `ab` and squared distance.
#[inline]
pub(crate) fn closest_on_segment(a: Point, b: Point, p: Point) -> (f64, f64) {
    let d = b.sub(a);
    let len2 = d.dot(d);
    let u = if len2 > 0.0 {
        (p.sub(a).dot(d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = a.add(d.scale(u));
    let e = p.sub(q);
    (u, e.dot(e))
}
