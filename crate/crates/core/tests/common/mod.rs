//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

use ribsupp::{Contour, Image, Point};

pub fn ngon(n: usize, r: f64, cx: f64, cy: f64) -> Contour {
    Contour::new(
        (0..n)
            .map(|i| {
                let a = TAU * i as f64 / n as f64;
                Point::new(cx + r * a.cos(), cy + r * a.sin())
            })
            .collect(),
    )
    .unwrap()
}

pub fn rect(x0: f64, y0: f64, w: f64, h: f64) -> Contour {
    Contour::new(vec![
        Point::new(x0, y0),
        Point::new(x0 + w, y0),
        Point::new(x0 + w, y0 + h),
        Point::new(x0, y0 + h),
    ])
    .unwrap()
}

// Independent geometry: nearest distance to the polygon, and the point at
// arc position t with its edge normal.
pub fn seg_dist(p: Point, a: Point, b: Point) -> f64 {
    let (ex, ey) = (b.x - a.x, b.y - a.y);
    let u = (((p.x - a.x) * ex + (p.y - a.y) * ey) / (ex * ex + ey * ey)).clamp(0.0, 1.0);
    ((p.x - a.x - u * ex).powi(2) + (p.y - a.y - u * ey).powi(2)).sqrt()
}

pub fn clearance(c: &Contour, p: Point) -> f64 {
    let v = c.vertices();
    (0..v.len())
        .map(|i| seg_dist(p, v[i], v[(i + 1) % v.len()]))
        .fold(f64::INFINITY, f64::min)
}

pub fn walk(c: &Contour, t: f64) -> (Point, Point) {
    let v = c.vertices();
    let mut rest = t;
    for i in 0..v.len() {
        let (a, b) = (v[i], v[(i + 1) % v.len()]);
        let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
        if rest < len || i == v.len() - 1 {
            let (dx, dy) = ((b.x - a.x) / len, (b.y - a.y) / len);
            return (
                Point::new(a.x + rest * dx, a.y + rest * dy),
                Point::new(-dy, dx),
            );
        }
        rest -= len;
    }
    unreachable!()
}

/// Medial depth along a column's normal: the last fine step at which the
/// probe is still at least as far from every other part of the polygon as
/// from its own foot point.
pub fn oracle_depth(c: &Contour, t: f64) -> f64 {
    let (o, n) = walk(c, t);
    let step = 0.01;
    let mut s = 0.0;
    loop {
        let next = s + step;
        let q = Point::new(o.x + next * n.x, o.y + next * n.y);
        if clearance(c, q) < next - 1e-9 {
            return s;
        }
        s = next;
    }
}

/// Direct 2-D evaluation: full 11x11 window, valid positions only.
pub fn reference_ms_ssim(x: &[f64], y: &[f64], w: usize, h: usize, max: f64) -> f64 {
    let sigmas = [0.5, 1.0, 2.0, 4.0, 8.0];
    let (c1, c2) = ((0.01 * max) * (0.01 * max), (0.03 * max) * (0.03 * max));
    let (mut x, mut y, mut w, mut h) = (x.to_vec(), y.to_vec(), w, h);
    let mut product = 1.0;
    let mut lum = 0.0;
    for (j, &sigma) in sigmas.iter().enumerate() {
        if j > 0 {
            let (nw, nh) = (w / 2, h / 2);
            let down = |v: &[f64]| -> Vec<f64> {
                let mut o = vec![0.0; nw * nh];
                for yy in 0..nh {
                    for xx in 0..nw {
                        let mut s = 0.0;
                        for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                            s += v[(2 * yy + dy) * w + 2 * xx + dx];
                        }
                        o[yy * nw + xx] = s / 4.0;
                    }
                }
                o
            };
            x = down(&x);
            y = down(&y);
            w = nw;
            h = nh;
        }
        let mut win = [[0.0; 11]; 11];
        let mut total = 0.0;
        for (i, row) in win.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                let r2 = (i as f64 - 5.0).powi(2) + (k as f64 - 5.0).powi(2);
                *v = (-r2 / (2.0 * sigma * sigma)).exp();
                total += *v;
            }
        }
        let (mut l_sum, mut cs_sum, mut n) = (0.0, 0.0, 0.0);
        for oy in 0..=h - 11 {
            for ox in 0..=w - 11 {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (i, row) in win.iter().enumerate() {
                    for (k, &g) in row.iter().enumerate() {
                        let g = g / total;
                        let idx = (oy + i) * w + ox + k;
                        mx += g * x[idx];
                        my += g * y[idx];
                        sxx += g * x[idx] * x[idx];
                        syy += g * y[idx] * y[idx];
                        sxy += g * x[idx] * y[idx];
                    }
                }
                let (vx, vy, cov) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
                l_sum += (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
                cs_sum += (2.0 * cov + c2) / (vx + vy + c2);
                n += 1.0;
            }
        }
        product *= cs_sum / n;
        lum = l_sum / n;
    }
    lum * product
}

pub fn textured(seed: u64, w: usize, h: usize, max: f64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b, c): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let noise: Vec<f64> = (0..w * h).map(|_| rng.random::<f64>()).collect();
    Image::from_fn(w, h, max, |x, y| {
        let v = 0.5
            + 0.2 * ((x as f64) * (0.05 + 0.1 * a) + 6.0 * b).sin()
            + 0.15 * ((y as f64) * (0.03 + 0.1 * c)).cos()
            + 0.1 * (noise[y * w + x] - 0.5);
        (v * max).clamp(0.0, max)
    })
}
