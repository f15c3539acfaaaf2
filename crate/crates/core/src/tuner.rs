//! Seeded random grid search over [`SuppressionParams`].

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagery::{Image, RibMaskSet};
use crate::metrics::rmse;
use crate::st_space::{Point, SegmentIndex};
use crate::suppression::{suppress_all, PipelineOptions, RibParams, SuppressionParams};

/// Width of the band around each contour scored by [`unsupervised_objective`].
pub const EDGE_BAND: f64 = 2.0;
/// Weight of the in-mask total variation in [`unsupervised_objective`].
pub const TV_WEIGHT: f64 = 0.1;

/// Finite candidate values for each parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamSpace {
    pub kappa_t: Vec<f64>,
    pub tau: Vec<f64>,
    pub k_center: Vec<usize>,
    pub s_b: Vec<f64>,
    pub k_border: Vec<usize>,
}

impl Default for ParamSpace {
    fn default() -> Self {
        Self {
            kappa_t: vec![3.75, 7.5, 15.0, 30.0, 60.0],
            tau: vec![0.25, 0.5, 0.75, 1.0],
            k_center: vec![1, 3, 5, 7],
            s_b: vec![0.0, 1.5, 3.0, 4.5],
            k_border: vec![1, 3, 5, 9],
        }
    }
}

impl ParamSpace {
    pub fn singleton(p: SuppressionParams) -> Self {
        Self {
            kappa_t: vec![p.kappa_t],
            tau: vec![p.tau],
            k_center: vec![p.k_center],
            s_b: vec![p.s_b],
            k_border: vec![p.k_border],
        }
    }

    fn radices(&self) -> [usize; 5] {
        [
            self.kappa_t.len(),
            self.tau.len(),
            self.k_center.len(),
            self.s_b.len(),
            self.k_border.len(),
        ]
    }

    pub fn size(&self) -> usize {
        self.radices().iter().product()
    }

    /// Grid point `i` in mixed radix, `kappa_t` varying slowest.
    pub fn point(&self, mut i: usize) -> SuppressionParams {
        let r = self.radices();
        let mut idx = [0usize; 5];
        for d in (0..5).rev() {
            idx[d] = i % r[d];
            i /= r[d];
        }
        SuppressionParams {
            kappa_t: self.kappa_t[idx[0]],
            tau: self.tau[idx[1]],
            k_center: self.k_center[idx[2]],
            s_b: self.s_b[idx[3]],
            k_border: self.k_border[idx[4]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let names = ["kappa_t", "tau", "k_center", "s_b", "k_border"];
        for (name, n) in names.iter().zip(self.radices()) {
            if n == 0 {
                return Err(Error::InvalidParams(format!("grid for {name} is empty")));
            }
        }
        let base = SuppressionParams::default();
        let checks = self
            .kappa_t
            .iter()
            .map(|&v| SuppressionParams { kappa_t: v, ..base })
            .chain(
                self.tau
                    .iter()
                    .map(|&v| SuppressionParams { tau: v, ..base }),
            )
            .chain(self.k_center.iter().map(|&v| SuppressionParams {
                k_center: v,
                ..base
            }))
            .chain(
                self.s_b
                    .iter()
                    .map(|&v| SuppressionParams { s_b: v, ..base }),
            )
            .chain(self.k_border.iter().map(|&v| SuppressionParams {
                k_border: v,
                ..base
            }));
        for p in checks {
            p.validate()?;
        }
        Ok(())
    }
}

/// Uniform draws without replacement from `0..n`, generated on demand.
pub struct LazyShuffle {
    n: usize,
    next: usize,
    swapped: HashMap<usize, usize>,
    rng: ChaCha8Rng,
}

impl LazyShuffle {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            next: 0,
            swapped: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Iterator for LazyShuffle {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.next >= self.n {
            return None;
        }
        let i = self.next;
        let j = self.rng.random_range(i..self.n);
        let at_j = *self.swapped.get(&j).unwrap_or(&j);
        let at_i = *self.swapped.get(&i).unwrap_or(&i);
        self.swapped.insert(j, at_i);
        self.next += 1;
        Some(at_j)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Position in draw order; 0 is the baseline.
    pub index: usize,
    pub params: SuppressionParams,
    /// `None` when the candidate failed or scored non-finite.
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneTrace {
    pub seed: u64,
    pub best: usize,
    pub entries: Vec<TraceEntry>,
}

impl TuneTrace {
    pub fn best_entry(&self) -> &TraceEntry {
        &self.entries[self.best]
    }

    /// Drops wall-clock times, leaving only reproducible content.
    pub fn without_timings(mut self) -> Self {
        for e in &mut self.entries {
            e.wall_secs = None;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub space: ParamSpace,
    pub budget: usize,
    pub seed: u64,
    /// Always evaluated first, as candidate 0.
    pub baseline: SuppressionParams,
    pub options: PipelineOptions,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            space: ParamSpace::default(),
            budget: 50,
            seed: 0,
            baseline: SuppressionParams::default(),
            options: PipelineOptions::default(),
        }
    }
}

/// Evaluates the baseline plus up to `budget` distinct grid points drawn
/// uniformly without replacement, in parallel, and returns the candidate with
/// the lowest objective (first in draw order on ties).
pub fn random_grid_search<F>(
    img: &Image,
    masks: &RibMaskSet,
    cfg: &SearchConfig,
    objective: F,
) -> Result<(SuppressionParams, TuneTrace)>
where
    F: Fn(&Image, &RibMaskSet) -> f64 + Sync,
{
    if cfg.budget == 0 {
        return Err(Error::InvalidParams("budget must be >= 1".into()));
    }
    cfg.space.validate()?;
    cfg.baseline.validate()?;
    let (space, opts, seed) = (&cfg.space, &cfg.options, cfg.seed);
    let mut candidates = vec![cfg.baseline];
    candidates.extend(
        LazyShuffle::new(space.size(), seed)
            .take(cfg.budget)
            .map(|i| space.point(i)),
    );

    let entries: Vec<TraceEntry> = candidates
        .par_iter()
        .enumerate()
        .map(|(index, p)| {
            let start = Instant::now();
            let outcome = suppress_all(img, masks, &RibParams::uniform(*p), opts)
                .map(|r| objective(&r.soft, masks));
            let wall_secs = Some(start.elapsed().as_secs_f64());
            let (objective, error) = match outcome {
                Ok(v) if v.is_finite() => (Some(v), None),
                Ok(v) => (None, Some(format!("non-finite objective {v}"))),
                Err(e) => (None, Some(e.to_string())),
            };
            TraceEntry {
                index,
                params: *p,
                objective,
                error,
                wall_secs,
            }
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for e in &entries {
        if let Some(v) = e.objective {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((e.index, v));
            }
        }
    }
    let Some((best, _)) = best else {
        let failures: Vec<String> = entries
            .iter()
            .map(|e| format!("#{}: {}", e.index, e.error.as_deref().unwrap_or("?")))
            .collect();
        return Err(Error::AllCandidatesFailed(failures.join("; ")));
    };
    let params = entries[best].params;
    Ok((
        params,
        TuneTrace {
            seed,
            best,
            entries,
        },
    ))
}

/// Supervised objective: RMSE against a known soft-tissue image.
pub fn supervised_objective(gt_soft: &Image) -> impl Fn(&Image, &RibMaskSet) -> f64 + Sync + '_ {
    move |soft, _| rmse(soft, gt_soft).unwrap_or(f64::NAN)
}

/// Forward differences, zero at the last row/column.
fn forward_diff(img: &Image, x: usize, y: usize) -> (f64, f64) {
    let v = img.get(x, y);
    let gx = if x + 1 < img.width() {
        img.get(x + 1, y) - v
    } else {
        0.0
    };
    let gy = if y + 1 < img.height() {
        img.get(x, y + 1) - v
    } else {
        0.0
    };
    (gx, gy)
}

/// Residual edge energy plus in-mask roughness; lower is better.
///
/// Mean gradient magnitude over pixels within [`EDGE_BAND`] of any rib
/// contour (either side), plus [`TV_WEIGHT`] times the mean anisotropic total
/// variation inside the union of the masks.
pub fn unsupervised_objective(soft: &Image, masks: &RibMaskSet) -> f64 {
    let (w, h) = soft.shape();
    let mut band = vec![false; w * h];
    for m in masks.masks() {
        let c = m.contour();
        let index = SegmentIndex::new(c);
        let (lo, hi) = c.bounding_box();
        let x0 = (lo.x - EDGE_BAND - 1.0).floor().max(0.0) as usize;
        let y0 = (lo.y - EDGE_BAND - 1.0).floor().max(0.0) as usize;
        let x1 = ((hi.x + EDGE_BAND + 1.0).ceil().max(0.0) as usize).min(w);
        let y1 = ((hi.y + EDGE_BAND + 1.0).ceil().max(0.0) as usize).min(h);
        for y in y0..y1 {
            for x in x0..x1 {
                let p = Point::new(x as f64 + 0.5, y as f64 + 0.5);
                if index.any_closer_than(c, p, EDGE_BAND + 1e-9) {
                    band[y * w + x] = true;
                }
            }
        }
    }
    let union = masks.union();
    let (mut edge, mut n_edge, mut tv, mut n_tv) = (0.0, 0usize, 0.0, 0usize);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !band[i] && !union[i] {
                continue;
            }
            let (gx, gy) = forward_diff(soft, x, y);
            if band[i] {
                edge += gx.hypot(gy);
                n_edge += 1;
            }
            if union[i] {
                tv += gx.abs() + gy.abs();
                n_tv += 1;
            }
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    mean(edge, n_edge) + TV_WEIGHT * mean(tv, n_tv)
}
