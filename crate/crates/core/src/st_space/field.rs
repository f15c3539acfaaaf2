//! Sampled ST fields: centerline depth, sampling, back-projection and the
//! binary debug dump.

use std::sync::Arc;

use rayon::prelude::*;

use super::contour::{Contour, Point};
use super::index::SegmentIndex;
use super::transform::inverse_st;
use crate::error::{Error, Result};
use crate::imagery::Image;

/// Marker stored in cells beyond a column's centerline.
pub const SENTINEL: f64 = f64::NAN;

/// Number of t-columns for a contour: the arc length divided by the
/// requested spacing, rounded, so the columns tile the closed contour with a
/// uniform effective spacing `total_length / count`.
pub fn column_count(c: &Contour, dt: f64) -> usize {
    ((c.total_length() / dt).round() as usize).max(3)
}

/// Centerline depth `c(t)` per column, a multiple of `ds`.
///
/// Marches the inward normal in steps of `ds` and stops at the first sample
/// that is no longer owned by its own foot point, i.e. some other part of
/// the contour is closer than `s - ds/2`. The half-step slack absorbs the
/// polygonisation of smooth contours (neighbouring edges of a fine polygon
/// are almost, but not exactly, parallel to the column's edge).
pub fn compute_depth(c: &Contour, dt: f64, ds: f64) -> Vec<f64> {
    let index = SegmentIndex::new(c);
    compute_depth_indexed(c, &index, dt, ds)
}

pub(crate) fn compute_depth_indexed(
    c: &Contour,
    index: &SegmentIndex,
    dt: f64,
    ds: f64,
) -> Vec<f64> {
    let n = column_count(c, dt);
    let step = c.total_length() / n as f64;
    let (lo, hi) = c.bounding_box();
    let max_steps = (hi.sub(lo).norm() / ds).ceil() as usize + 2;
    (0..n)
        .into_par_iter()
        .map(|j| {
            let t = j as f64 * step;
            let origin = c.point_at(t);
            let normal = c.normal_at(t);
            let mut k = 0usize;
            while k < max_steps {
                let s = (k + 1) as f64 * ds;
                let q = origin.add(normal.scale(s));
                if k == 0 && !c.contains(q) {
                    break;
                }
                if index.any_closer_than(c, q, s - 0.5 * ds) {
                    break;
                }
                k += 1;
            }
            k as f64 * ds
        })
        .collect()
}

/// Rectangular `(t, s)` sample grid attached to one contour. Cell `(t, s)`
/// sits at `inverse_st(s * ds, t * dt)`; cells past a column's depth hold
/// [`SENTINEL`].
#[derive(Debug, Clone)]
pub struct StField {
    contour: Arc<Contour>,
    dt: f64,
    ds: f64,
    depth: Vec<f64>,
    valid: Vec<usize>,
    s_count: usize,
    values: Vec<f64>,
}

impl StField {
    /// Builds a field on the standard column grid of `contour` from explicit
    /// depths and column-major values (`values[t * s_count + s]`).
    pub fn from_parts(
        contour: Arc<Contour>,
        dt: f64,
        ds: f64,
        depth: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let t_count = column_count(&contour, dt);
        if depth.len() != t_count {
            return Err(Error::InvalidContour(format!(
                "depth has {} columns, contour needs {t_count}",
                depth.len()
            )));
        }
        let valid: Vec<usize> = depth
            .iter()
            .map(|&d| (d.max(0.0) / ds + 1e-9).floor() as usize + 1)
            .collect();
        let s_count = valid.iter().copied().max().unwrap_or(1);
        if values.len() != t_count * s_count {
            return Err(Error::InvalidContour(format!(
                "values length {} does not match {t_count}x{s_count}",
                values.len()
            )));
        }
        let mut f = Self {
            contour,
            dt: 0.0,
            ds,
            depth,
            valid,
            s_count,
            values,
        };
        f.dt = f.contour.total_length() / t_count as f64;
        f.mask_invalid();
        Ok(f)
    }

    /// Field of geometry `depth` filled by `f(t_index, s_index)` on valid cells.
    pub fn from_fn(
        contour: Arc<Contour>,
        dt: f64,
        ds: f64,
        depth: Vec<f64>,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let t_count = column_count(&contour, dt);
        let s_count = depth
            .iter()
            .map(|&d| (d.max(0.0) / ds + 1e-9).floor() as usize + 1)
            .max()
            .unwrap_or(1);
        let mut values = vec![SENTINEL; t_count * s_count];
        for (t, d) in depth.iter().enumerate().take(t_count) {
            let n = (d.max(0.0) / ds + 1e-9).floor() as usize + 1;
            for s in 0..n {
                values[t * s_count + s] = f(t, s);
            }
        }
        Self::from_parts(contour, dt, ds, depth, values)
    }

    fn mask_invalid(&mut self) {
        let s_count = self.s_count;
        for (col, &n) in self.values.chunks_mut(s_count).zip(&self.valid) {
            for v in &mut col[n..] {
                *v = SENTINEL;
            }
        }
    }

    pub fn contour(&self) -> &Contour {
        &self.contour
    }

    pub fn contour_arc(&self) -> &Arc<Contour> {
        &self.contour
    }

    /// Effective arc spacing between columns.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    pub fn t_count(&self) -> usize {
        self.depth.len()
    }

    pub fn s_count(&self) -> usize {
        self.s_count
    }

    pub fn depth(&self) -> &[f64] {
        &self.depth
    }

    /// Valid cells per column (`s = 0 ..= depth / ds`).
    pub fn valid_len(&self, t: usize) -> usize {
        self.valid[t]
    }

    #[inline]
    pub fn is_valid(&self, t: usize, s: usize) -> bool {
        s < self.valid[t]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, t: usize) -> &[f64] {
        let start = t * self.s_count;
        &self.values[start..start + self.valid[t]]
    }

    pub fn get(&self, t: usize, s: usize) -> Option<f64> {
        self.is_valid(t, s)
            .then(|| self.values[t * self.s_count + s])
    }

    /// New field with the same geometry, each valid column rewritten by `f`.
    pub fn map_columns(&self, f: impl Fn(&[f64], &mut [f64]) + Sync) -> StField {
        let mut values = vec![SENTINEL; self.values.len()];
        values
            .par_chunks_mut(self.s_count)
            .enumerate()
            .for_each(|(t, out)| {
                let n = self.valid[t];
                f(self.column(t), &mut out[..n]);
            });
        self.with_values(values)
    }

    /// Same geometry, new values (column-major); invalid cells re-masked.
    pub fn with_values(&self, values: Vec<f64>) -> StField {
        assert_eq!(values.len(), self.values.len());
        let mut out = StField {
            contour: Arc::clone(&self.contour),
            dt: self.dt,
            ds: self.ds,
            depth: self.depth.clone(),
            valid: self.valid.clone(),
            s_count: self.s_count,
            values,
        };
        out.mask_invalid();
        out
    }

    /// Image-space position of cell `(t, s)`.
    pub fn position(&self, t: usize, s: usize) -> Point {
        inverse_st(&self.contour, s as f64 * self.ds, t as f64 * self.dt)
    }

    /// Flat little-endian dump: `T: u64, S: u64, dt: f64, ds: f64`, then `T`
    /// depths, then the `T x S` values column by column (NaN marks invalid
    /// cells).
    pub fn to_dump(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * (self.depth.len() + self.values.len()));
        out.extend_from_slice(&(self.t_count() as u64).to_le_bytes());
        out.extend_from_slice(&(self.s_count as u64).to_le_bytes());
        out.extend_from_slice(&self.dt.to_le_bytes());
        out.extend_from_slice(&self.ds.to_le_bytes());
        for d in &self.depth {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

/// Parsed contents of an [`StField::to_dump`] buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub t_count: usize,
    pub s_count: usize,
    pub dt: f64,
    pub ds: f64,
    pub depth: Vec<f64>,
    pub values: Vec<f64>,
}

impl FieldDump {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let word = |i: usize| -> Result<[u8; 8]> {
            bytes
                .get(i * 8..i * 8 + 8)
                .map(|b| b.try_into().expect("8 bytes"))
                .ok_or_else(|| Error::InvalidDump(format!("truncated at word {i}")))
        };
        let t_count = u64::from_le_bytes(word(0)?) as usize;
        let s_count = u64::from_le_bytes(word(1)?) as usize;
        let dt = f64::from_le_bytes(word(2)?);
        let ds = f64::from_le_bytes(word(3)?);
        let expected = 4 + t_count + t_count * s_count;
        if bytes.len() != expected * 8 {
            return Err(Error::InvalidDump(format!(
                "expected {} bytes for {t_count}x{s_count}, got {}",
                expected * 8,
                bytes.len()
            )));
        }
        let read = |range: std::ops::Range<usize>| -> Result<Vec<f64>> {
            range.map(|i| word(i).map(f64::from_le_bytes)).collect()
        };
        Ok(Self {
            t_count,
            s_count,
            dt,
            ds,
            depth: read(4..4 + t_count)?,
            values: read(4 + t_count..expected)?,
        })
    }

    pub fn into_field(self, contour: Arc<Contour>) -> Result<StField> {
        let requested_dt = self.dt;
        let f = StField::from_parts(contour, requested_dt, self.ds, self.depth, self.values)?;
        if f.s_count() != self.s_count {
            return Err(Error::InvalidDump("depth array inconsistent with S".into()));
        }
        Ok(f)
    }
}

fn check_bounds(c: &Contour, width: usize, height: usize) -> Result<()> {
    let (lo, hi) = c.bounding_box();
    if lo.x < 0.0 || lo.y < 0.0 || hi.x > width as f64 || hi.y > height as f64 {
        return Err(Error::ContourOutOfBounds {
            min_x: lo.x,
            max_x: hi.x,
            min_y: lo.y,
            max_y: hi.y,
            width,
            height,
        });
    }
    Ok(())
}

/// Samples `img` on the ST grid of `c` by bilinear interpolation.
pub fn sample_field(img: &Image, c: &Contour, dt: f64, ds: f64) -> Result<StField> {
    sample_field_arc(img, Arc::new(c.clone()), dt, ds)
}

pub fn sample_field_arc(img: &Image, c: Arc<Contour>, dt: f64, ds: f64) -> Result<StField> {
    check_bounds(&c, img.width(), img.height())?;
    let depth = compute_depth(&c, dt, ds);
    sample_with_depth(img, c, dt, ds, depth)
}

pub(crate) fn sample_with_depth(
    img: &Image,
    c: Arc<Contour>,
    dt: f64,
    ds: f64,
    depth: Vec<f64>,
) -> Result<StField> {
    check_bounds(&c, img.width(), img.height())?;
    let geometry = StField::from_parts(
        Arc::clone(&c),
        dt,
        ds,
        depth.clone(),
        vec![SENTINEL; column_count(&c, dt) * max_cells(&depth, ds)],
    )?;
    let step = geometry.dt();
    let s_count = geometry.s_count();
    let mut values = vec![SENTINEL; geometry.values().len()];
    values
        .par_chunks_mut(s_count)
        .enumerate()
        .for_each(|(t, col)| {
            let tt = t as f64 * step;
            let origin = c.point_at(tt);
            let normal = c.normal_at(tt);
            for (s, v) in col.iter_mut().take(geometry.valid_len(t)).enumerate() {
                let q = origin.add(normal.scale(s as f64 * ds));
                *v = img.bilinear(q.x, q.y);
            }
        });
    Ok(geometry.with_values(values))
}

fn max_cells(depth: &[f64], ds: f64) -> usize {
    depth
        .iter()
        .map(|&d| (d.max(0.0) / ds + 1e-9).floor() as usize + 1)
        .max()
        .unwrap_or(1)
}

/// Weighted splat of an ST field back onto the pixel grid, restricted to the
/// bounding box of touched pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Backprojection {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
    /// Weight-normalised values; 0 where no weight landed.
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Backprojection {
    fn empty() -> Self {
        Self {
            x0: 0,
            y0: 0,
            width: 0,
            height: 0,
            values: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Value at global pixel `(x, y)`, 0 outside the patch.
    pub fn value_at(&self, x: usize, y: usize) -> f64 {
        self.local(x, y).map_or(0.0, |i| self.values[i])
    }

    pub fn weight_at(&self, x: usize, y: usize) -> f64 {
        self.local(x, y).map_or(0.0, |i| self.weights[i])
    }

    fn local(&self, x: usize, y: usize) -> Option<usize> {
        if x >= self.x0 && y >= self.y0 && x < self.x0 + self.width && y < self.y0 + self.height {
            Some((y - self.y0) * self.width + (x - self.x0))
        } else {
            None
        }
    }
}

/// Splats every valid cell to its four surrounding pixel centers with
/// bilinear weights and normalises by the accumulated weight.
///
/// Accumulation runs in column-major cell order on one thread, so the result
/// does not depend on the thread pool.
pub fn backproject(f: &StField, width: usize, height: usize) -> Backprojection {
    let mut splats: Vec<(usize, usize, [f64; 4], f64)> = Vec::new();
    for t in 0..f.t_count() {
        for s in 0..f.valid_len(t) {
            let v = f.values()[t * f.s_count() + s];
            if !v.is_finite() {
                continue;
            }
            let q = f.position(t, s);
            let u = q.x - 0.5;
            let w = q.y - 0.5;
            let fx0 = u.floor();
            let fy0 = w.floor();
            let ax = u - fx0;
            let ay = w - fy0;
            if fx0 < -1.0 || fy0 < -1.0 || fx0 >= width as f64 || fy0 >= height as f64 {
                continue;
            }
            let ix = (fx0 + 1.0) as usize;
            let iy = (fy0 + 1.0) as usize;
            splats.push((
                ix,
                iy,
                [
                    (1.0 - ax) * (1.0 - ay),
                    ax * (1.0 - ay),
                    (1.0 - ax) * ay,
                    ax * ay,
                ],
                v,
            ));
        }
    }
    if splats.is_empty() {
        return Backprojection::empty();
    }
    // shifted by one so that pixel -1 maps to index 0
    let gx0 = splats.iter().map(|s| s.0).min().unwrap();
    let gy0 = splats.iter().map(|s| s.1).min().unwrap();
    let gx1 = splats.iter().map(|s| s.0 + 1).max().unwrap();
    let gy1 = splats.iter().map(|s| s.1 + 1).max().unwrap();
    let x0 = gx0.max(1) - 1;
    let y0 = gy0.max(1) - 1;
    let x1 = (gx1 - 1).min(width - 1);
    let y1 = (gy1 - 1).min(height - 1);
    let pw = x1 + 1 - x0;
    let ph = y1 + 1 - y0;
    let mut acc = vec![0.0; pw * ph];
    let mut wsum = vec![0.0; pw * ph];
    for (ix, iy, w, v) in splats {
        for (k, &wk) in w.iter().enumerate() {
            if wk == 0.0 {
                continue;
            }
            let gx = ix + (k & 1);
            let gy = iy + (k >> 1);
            if gx == 0 || gy == 0 {
                continue;
            }
            let (px, py) = (gx - 1, gy - 1);
            if px < x0 || py < y0 || px > x1 || py > y1 {
                continue;
            }
            let i = (py - y0) * pw + (px - x0);
            acc[i] += wk * v;
            wsum[i] += wk;
        }
    }
    let values = acc
        .iter()
        .zip(&wsum)
        .map(|(&a, &w)| if w > 0.0 { a / w } else { 0.0 })
        .collect();
    Backprojection {
        x0,
        y0,
        width: pw,
        height: ph,
        values,
        weights: wsum,
    }
}
