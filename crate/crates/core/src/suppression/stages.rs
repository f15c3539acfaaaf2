//! Per-stage operators on ST fields. Every stage is out-of-place and keeps
//! the input geometry; invalid cells stay [`SENTINEL`](crate::st_space::SENTINEL).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::st_space::StField;

/// Denominators at or below this magnitude send a cell down the averaging
/// branch of [`centerline_smooth`].
pub const RATIO_EPS: f64 = 1e-12;

/// First difference along `s`: `out(s) = f(s) - f(s-1)`, `out(0) = 0`.
pub fn derivative_s(f: &StField) -> StField {
    f.map_columns(|col, out| {
        if let Some(o) = out.first_mut() {
            *o = 0.0;
        }
        for s in 1..col.len() {
            out[s] = col[s] - col[s - 1];
        }
    })
}

/// Normalised Gaussian taps for offsets `-r..=r` (in columns).
pub fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let r = (4.0 * sigma).ceil() as i64;
    let denom = 2.0 * sigma * sigma;
    let raw: Vec<f64> = (-r..=r).map(|m| (-(m * m) as f64 / denom).exp()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// Cyclic Gaussian smoothing along `t` with standard deviation `kappa_t`
/// (arc-length pixels), truncated at four sigma.
///
/// For each depth row only the columns that reach that depth take part; the
/// kernel is renormalised over them.
pub fn smooth_t(f: &StField, kappa_t: f64) -> Result<StField> {
    if !(kappa_t > 0.0 && kappa_t.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "kappa_t must be > 0, got {kappa_t}"
        )));
    }
    let taps = gaussian_taps(kappa_t / f.dt());
    let radius = (taps.len() / 2) as i64;
    let t_count = f.t_count();
    let s_count = f.s_count();
    let tc = t_count as i64;

    let rows: Vec<Vec<f64>> = (0..s_count)
        .into_par_iter()
        .map(|s| {
            let row: Vec<Option<f64>> = (0..t_count).map(|t| f.get(t, s)).collect();
            (0..t_count)
                .map(|j| {
                    if row[j].is_none() {
                        return f64::NAN;
                    }
                    let mut acc = 0.0;
                    let mut wsum = 0.0;
                    for (k, &w) in taps.iter().enumerate() {
                        let idx = (j as i64 + k as i64 - radius).rem_euclid(tc) as usize;
                        if let Some(v) = row[idx] {
                            acc += w * v;
                            wsum += w;
                        }
                    }
                    acc / wsum
                })
                .collect()
        })
        .collect();

    let mut values = vec![f64::NAN; t_count * s_count];
    for (s, row) in rows.iter().enumerate() {
        for (t, &v) in row.iter().enumerate() {
            values[t * s_count + s] = v;
        }
    }
    Ok(f.with_values(values))
}

/// Trapezoidal cumulative sum along `s` with zero baseline:
/// `out(0) = 0`, `out(s) = out(s-1) + (g(s) + g(s-1)) / 2`.
pub fn reintegrate(g: &StField) -> StField {
    g.map_columns(|col, out| {
        let mut acc = 0.0;
        for s in 0..col.len() {
            if s > 0 {
                acc += 0.5 * (col[s] + col[s - 1]);
            }
            out[s] = acc;
        }
    })
}

/// Trapezoidal reintegration with the half-sample pairing at both ends:
/// `out(s) = trapezoid(s) + (g(s) - g(0)) / 2`, which telescopes to
/// `sum_{i=1..=s} g(i)`. Applied to [`derivative_s`] output it recovers
/// `f - f(0)` exactly, where the bare trapezoid returns the midpoint average
/// `(f(s) + f(s-1)) / 2 - f(0)`.
pub fn reintegrate_paired(g: &StField) -> StField {
    g.map_columns(|col, out| {
        let mut trap = 0.0;
        for s in 0..col.len() {
            if s > 0 {
                trap += 0.5 * (col[s] + col[s - 1]);
            }
            out[s] = trap + 0.5 * (col[s] - col[0]);
        }
    })
}

/// Which side of the ratio threshold keeps a cell unchanged in
/// [`centerline_smooth`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterlineGate {
    /// Keep when `f(s) / f(s-1) > tau`, average otherwise.
    #[default]
    KeepAbove,
    /// Keep when `f(s) / f(s-1) <= tau`, average otherwise.
    KeepBelow,
}

/// KNN smoothing along `s` that suppresses the seam at the centerline.
///
/// Reads the input only. A cell whose ratio to its predecessor fails the gate
/// becomes the mean of itself and up to `k - 1` preceding cells; `s = 0`
/// passes through and near-zero predecessors always average.
pub fn centerline_smooth(f: &StField, tau: f64, k: usize, gate: CenterlineGate) -> Result<StField> {
    if !(tau > 0.0) || k == 0 {
        return Err(Error::InvalidParams(format!(
            "centerline smoothing needs tau > 0 and k >= 1 (tau={tau}, k={k})"
        )));
    }
    Ok(f.map_columns(|col, out| {
        for i in 0..col.len() {
            if i == 0 {
                out[0] = col[0];
                continue;
            }
            let denom = col[i - 1];
            let keep = denom.abs() > RATIO_EPS && {
                let ratio = col[i] / denom;
                match gate {
                    CenterlineGate::KeepAbove => ratio > tau,
                    CenterlineGate::KeepBelow => ratio <= tau,
                }
            };
            out[i] = if keep {
                col[i]
            } else {
                let lo = (i + 1).saturating_sub(k);
                let window = &col[lo..=i];
                window.iter().sum::<f64>() / window.len() as f64
            };
        }
    }))
}

/// `max(f, 0)` on valid cells.
pub fn clamp_nonneg(f: &StField) -> StField {
    f.map_columns(|col, out| {
        for (o, &v) in out.iter_mut().zip(col) {
            *o = v.max(0.0);
        }
    })
}
