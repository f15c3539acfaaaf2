use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::stages::{
    centerline_smooth, clamp_nonneg, derivative_s, reintegrate, reintegrate_paired, smooth_t,
    CenterlineGate,
};
use crate::error::{Error, Result};
use crate::imagery::io::write_atomic;
use crate::imagery::{Image, RibMask, RibMaskSet};
use crate::st_space::{backproject, sample_field_arc, SegmentIndex, StField};

/// Per-rib hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuppressionParams {
    /// Gaussian sigma along the contour, in arc-length pixels.
    pub kappa_t: f64,
    /// Ratio threshold of the centerline gate.
    pub tau: f64,
    /// Neighbours averaged by the centerline gate.
    pub k_center: usize,
    /// Depth of the border blending band, in pixels.
    pub s_b: f64,
    /// Neighbours averaged in the border band.
    pub k_border: usize,
}

impl Default for SuppressionParams {
    fn default() -> Self {
        Self {
            kappa_t: 15.0,
            tau: 0.5,
            k_center: 5,
            s_b: 3.0,
            k_border: 5,
        }
    }
}

impl SuppressionParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.kappa_t.is_finite()
            && self.kappa_t > 0.0
            && self.tau.is_finite()
            && self.tau > 0.0
            && self.k_center >= 1
            && self.s_b.is_finite()
            && self.s_b >= 0.0
            && self.k_border >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("{self:?}")))
        }
    }
}

/// Default parameters plus per-label overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RibParams {
    #[serde(default)]
    pub default: SuppressionParams,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<u32, SuppressionParams>,
}

impl RibParams {
    pub fn uniform(p: SuppressionParams) -> Self {
        Self {
            default: p,
            overrides: BTreeMap::new(),
        }
    }

    pub fn for_label(&self, label: u32) -> SuppressionParams {
        self.overrides.get(&label).copied().unwrap_or(self.default)
    }
}

/// How the smoothed gradient is integrated back along `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reintegration {
    /// Trapezoid with half-sample pairing; exact inverse of the s-derivative.
    #[default]
    Paired,
    /// Bare trapezoid; reconstructs the profile half a sample too shallow.
    Trapezoid,
}

/// Settings that are not tuned per image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineOptions {
    /// Requested column spacing along the contour (pixels).
    pub dt: f64,
    /// Sample spacing along the inward normal (pixels).
    pub ds: f64,
    pub gate: CenterlineGate,
    pub reintegration: Reintegration,
    /// Keep every intermediate ST field in the result.
    pub keep_fields: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            dt: 1.0,
            ds: 1.0,
            gate: CenterlineGate::default(),
            reintegration: Reintegration::default(),
            keep_fields: false,
        }
    }
}

/// Bone-shadow estimate of one rib over its bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct BonePatch {
    pub label: u32,
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
    /// Non-negative bone intensity; 0 where `weights` is 0.
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BonePatch {
    pub fn value_at(&self, x: usize, y: usize) -> f64 {
        if x < self.x0 || y < self.y0 || x >= self.x0 + self.width || y >= self.y0 + self.height {
            return 0.0;
        }
        self.values[(y - self.y0) * self.width + (x - self.x0)]
    }

    /// Paints the patch into a full-size raster (adds to existing values).
    pub fn add_to(&self, img: &mut Image) {
        for py in 0..self.height {
            for px in 0..self.width {
                let (x, y) = (self.x0 + px, self.y0 + py);
                let v = img.get(x, y) + self.values[py * self.width + px];
                img.set(x, y, v);
            }
        }
    }
}

/// Intermediate ST fields of one rib, in pipeline order.
#[derive(Debug, Clone)]
pub struct RibFields {
    pub label: u32,
    pub sampled: StField,
    pub derivative: StField,
    pub smoothed: StField,
    pub reintegrated: StField,
    pub centerline: StField,
    pub bone: StField,
}

impl RibFields {
    pub fn stages(&self) -> [(&'static str, &StField); 6] {
        [
            ("sampled", &self.sampled),
            ("derivative", &self.derivative),
            ("smoothed", &self.smoothed),
            ("reintegrated", &self.reintegrated),
            ("centerline", &self.centerline),
            ("bone", &self.bone),
        ]
    }
}

/// Writes every stage of every rib as `rib{label:03}_{stage}.stf`.
pub fn write_trace_dumps(fields: &[RibFields], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for f in fields {
        for (stage, field) in f.stages() {
            let path = dir.join(format!("rib{:03}_{stage}.stf", f.label));
            write_atomic(&path, &field.to_dump())?;
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Debug, Clone)]
pub struct RibSuppression {
    pub soft: Image,
    pub bone: BonePatch,
    pub fields: Option<RibFields>,
}

/// Estimates and removes one rib's shadow.
pub fn suppress_rib(
    img: &Image,
    mask: &RibMask,
    params: &SuppressionParams,
    opts: &PipelineOptions,
) -> Result<RibSuppression> {
    params.validate()?;
    if mask.shape() != img.shape() {
        let (w, h) = mask.shape();
        return Err(Error::ShapeMismatch {
            left_w: img.width(),
            left_h: img.height(),
            right_w: w,
            right_h: h,
        });
    }
    let sampled = sample_field_arc(img, mask.contour_arc().clone(), opts.dt, opts.ds)?;
    let derivative = derivative_s(&sampled);
    let smoothed = smooth_t(&derivative, params.kappa_t)?;
    let reintegrated = match opts.reintegration {
        Reintegration::Paired => reintegrate_paired(&smoothed),
        Reintegration::Trapezoid => reintegrate(&smoothed),
    };
    let centerline = centerline_smooth(&reintegrated, params.tau, params.k_center, opts.gate)?;
    let bone_field = clamp_nonneg(&centerline);

    let bp = backproject(&bone_field, img.width(), img.height());
    let mut soft = img.clone();
    for py in 0..bp.height {
        for px in 0..bp.width {
            let i = py * bp.width + px;
            if bp.weights[i] > 0.0 {
                let (x, y) = (bp.x0 + px, bp.y0 + py);
                soft.set(x, y, img.get(x, y) - bp.values[i]);
            }
        }
    }
    let bone = BonePatch {
        label: mask.label(),
        x0: bp.x0,
        y0: bp.y0,
        width: bp.width,
        height: bp.height,
        values: bp.values,
        weights: bp.weights,
    };
    let fields = opts.keep_fields.then(|| RibFields {
        label: mask.label(),
        sampled,
        derivative,
        smoothed,
        reintegrated,
        centerline,
        bone: bone_field,
    });
    Ok(RibSuppression { soft, bone, fields })
}

/// Pixel offsets ordered by distance, ties in scanline order.
fn neighbour_offsets(k: usize) -> Vec<(i64, i64)> {
    let r = (2.0 * (k as f64).sqrt()).ceil() as i64 + 2;
    let mut offs: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dy, dx)))
        .filter(|&(dy, dx)| dy * dy + dx * dx <= r * r)
        .collect();
    offs.sort_by_key(|&(dy, dx)| (dy * dy + dx * dx, dy, dx));
    offs
}

/// KNN blending of the band of pixels within `s_b` of the rib contour
/// (inside the rib). Neighbours are read from `soft` as given, so the result
/// does not depend on visiting order.
pub fn blend_border(soft: &Image, mask: &RibMask, s_b: f64, k_border: usize) -> Image {
    let mut out = soft.clone();
    if !(s_b > 0.0) || k_border <= 1 {
        return out;
    }
    let contour = mask.contour();
    let index = SegmentIndex::new(contour);
    let inside = contour.rasterize(soft.width(), soft.height());
    let offsets = neighbour_offsets(k_border);
    let (w, h) = (soft.width() as i64, soft.height() as i64);
    let (lo, hi) = contour.bounding_box();
    let x0 = lo.x.floor().max(0.0) as usize;
    let y0 = lo.y.floor().max(0.0) as usize;
    let x1 = (hi.x.ceil() as usize).min(soft.width());
    let y1 = (hi.y.ceil() as usize).min(soft.height());
    for y in y0..y1 {
        for x in x0..x1 {
            if !inside[y * soft.width() + x] {
                continue;
            }
            let p = crate::st_space::Point::new(x as f64 + 0.5, y as f64 + 0.5);
            // in band iff the nearest contour point is within s_b
            if !index.any_closer_than(contour, p, s_b * (1.0 + 1e-12) + 1e-12) {
                continue;
            }
            let mut sum = 0.0;
            let mut n = 0usize;
            for &(dy, dx) in &offsets {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                sum += soft.get(nx as usize, ny as usize);
                n += 1;
                if n == k_border {
                    break;
                }
            }
            out.set(x, y, sum / n as f64);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct SuppressionResult {
    /// Final soft-tissue image, blended and clamped to `[0, max_value]`.
    pub soft: Image,
    /// Soft-tissue image right after the last subtraction.
    pub soft_pre_blend: Image,
    pub bones: Vec<BonePatch>,
    pub fields: Vec<RibFields>,
}

impl SuppressionResult {
    /// Sum of all bone patches as a full-size image.
    pub fn bone_image(&self) -> Image {
        let mut img = Image::filled(
            self.soft.width(),
            self.soft.height(),
            0.0,
            self.soft.max_value(),
        );
        for b in &self.bones {
            b.add_to(&mut img);
        }
        img
    }
}

/// Suppresses every rib in set order, each on the running soft estimate,
/// then blends each rib's border band in the same order.
pub fn suppress_all(
    img: &Image,
    masks: &RibMaskSet,
    params: &RibParams,
    opts: &PipelineOptions,
) -> Result<SuppressionResult> {
    if masks.shape() != img.shape() {
        let (w, h) = masks.shape();
        return Err(Error::ShapeMismatch {
            left_w: img.width(),
            left_h: img.height(),
            right_w: w,
            right_h: h,
        });
    }
    let mut current = img.clone();
    let mut bones = Vec::with_capacity(masks.len());
    let mut fields = Vec::new();
    for mask in masks.masks() {
        let p = params.for_label(mask.label());
        let rib = suppress_rib(&current, mask, &p, opts).map_err(|e| Error::Rib {
            label: mask.label(),
            source: Box::new(e),
        })?;
        current = rib.soft;
        bones.push(rib.bone);
        fields.extend(rib.fields);
    }
    let soft_pre_blend = current.clone();
    for mask in masks.masks() {
        let p = params.for_label(mask.label());
        current = blend_border(&current, mask, p.s_b, p.k_border);
    }
    current.clamp_to_range();
    Ok(SuppressionResult {
        soft: current,
        soft_pre_blend,
        bones,
        fields,
    })
}
