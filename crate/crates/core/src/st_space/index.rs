//! Uniform-grid acceleration for nearest-segment queries on a contour.

use super::contour::{closest_on_segment, Contour, Point};

/// Nearest contour point: edge index, parameter on the edge, distance and
/// arc position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Foot {
    pub edge: usize,
    pub u: f64,
    pub distance: f64,
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct SegmentIndex {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

/// Distances closer than this are considered equal when breaking ties.
const TIE_EPS: f64 = 1e-9;

impl SegmentIndex {
    pub fn new(contour: &Contour) -> Self {
        let (lo, hi) = contour.bounding_box();
        let mean_edge = contour.total_length() / contour.len() as f64;
        let cell = mean_edge.clamp(2.0, 16.0);
        let nx = (((hi.x - lo.x) / cell).floor() as usize + 1).max(1);
        let ny = (((hi.y - lo.y) / cell).floor() as usize + 1).max(1);
        let mut cells = vec![Vec::new(); nx * ny];
        let index = Self {
            origin: lo,
            cell,
            nx,
            ny,
            cells: Vec::new(),
        };
        for i in 0..contour.len() {
            let (a, b) = contour.edge(i);
            let (x0, y0) = index.cell_of(Point::new(a.x.min(b.x), a.y.min(b.y)));
            let (x1, y1) = index.cell_of(Point::new(a.x.max(b.x), a.y.max(b.y)));
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    cells[cy * nx + cx].push(i as u32);
                }
            }
        }
        Self { cells, ..index }
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let cx = ((p.x - self.origin.x) / self.cell).floor();
        let cy = ((p.y - self.origin.y) / self.cell).floor();
        (
            (cx.max(0.0) as usize).min(self.nx - 1),
            (cy.max(0.0) as usize).min(self.ny - 1),
        )
    }

    fn visit(&self, p: Point, r: f64, mut f: impl FnMut(usize)) {
        let (x0, y0) = self.cell_of(Point::new(p.x - r, p.y - r));
        let (x1, y1) = self.cell_of(Point::new(p.x + r, p.y + r));
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                for &e in &self.cells[cy * self.nx + cx] {
                    f(e as usize);
                }
            }
        }
    }

    /// `true` if some contour segment lies strictly closer than `r` to `p`.
    pub fn any_closer_than(&self, contour: &Contour, p: Point, r: f64) -> bool {
        if r <= 0.0 {
            return false;
        }
        let r2 = r * r;
        let mut hit = false;
        self.visit(p, r, |e| {
            if !hit {
                let (a, b) = contour.edge(e);
                if closest_on_segment(a, b, p).1 < r2 {
                    hit = true;
                }
            }
        });
        hit
    }

    /// Nearest point on the contour. Equidistant candidates (within 1e-9 px)
    /// resolve to the smallest arc position.
    pub fn nearest(&self, contour: &Contour, p: Point) -> Foot {
        let span = self.cell * (self.nx.max(self.ny) as f64 + 1.0);
        let mut r = self.cell;
        loop {
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            self.visit(p, r, |e| {
                let (a, b) = contour.edge(e);
                let (u, d2) = closest_on_segment(a, b, p);
                cands.push((e, u, d2.sqrt()));
            });
            let best = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            // the window covers every segment within distance r of p
            if best <= r || r > span + p.sub(self.origin).norm() {
                return pick(contour, &cands, best);
            }
            r *= 2.0;
        }
    }
}

fn pick(contour: &Contour, cands: &[(usize, f64, f64)], best: f64) -> Foot {
    let mut out: Option<Foot> = None;
    for &(e, u, d) in cands {
        if d > best + TIE_EPS {
            continue;
        }
        let t = contour.wrap(contour.cum_length()[e] + u * contour.edge_lengths()[e]);
        let better = match out {
            None => true,
            Some(f) => (t, d, e) < (f.t, f.distance, f.edge),
        };
        if better {
            out = Some(Foot {
                edge: e,
                u,
                distance: d,
                t,
            });
        }
    }
    out.expect("contour has at least one segment")
}

/// Brute-force nearest over every segment, same tie rule as [`SegmentIndex::nearest`].
pub fn nearest_brute(contour: &Contour, p: Point) -> Foot {
    let cands: Vec<(usize, f64, f64)> = (0..contour.len())
        .map(|e| {
            let (a, b) = contour.edge(e);
            let (u, d2) = closest_on_segment(a, b, p);
            (e, u, d2.sqrt())
        })
        .collect();
    let best = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    pick(contour, &cands, best)
}
