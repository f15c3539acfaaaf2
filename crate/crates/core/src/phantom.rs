//! Synthetic radiographs with exact ground truth.
//!
//! Each rib is an annular-sector strip. Its shadow is a function of the exact
//! distance to the strip's polygon outline only, so it is constant along
//! every contour-parallel curve. Background, vessels and nodules form the
//! soft-tissue image.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagery::{Image, RibMask, RibMaskSet};
use crate::st_space::{Contour, Point};

/// Minimum vertical clearance between neighbouring rib strips (pixels).
const RIB_GAP: f64 = 4.0;
/// Smallest sag of a rib arc (pixels).
const MIN_SAG: f64 = 2.0;
/// Target polygon edge length along rib arcs (pixels).
const ARC_STEP: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Background {
    Constant {
        value: f64,
    },
    /// Seeded value noise on a lattice of spacing `wavelength`, smoothly
    /// interpolated: `mean + amplitude * n(x, y)` with `n` in `[-1, 1]`.
    LowFrequency {
        mean: f64,
        amplitude: f64,
        wavelength: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub max_value: f64,
    pub n_ribs: usize,
    /// Peak bone intensity `A`.
    pub rib_amplitude: f64,
    /// Full strip width; the profile reaches `A` at half this distance.
    pub rib_width: f64,
    pub background: Background,
    pub vessel_count: usize,
    pub vessel_contrast: f64,
    pub vessel_width: f64,
    pub nodule_count: usize,
    pub nodule_diameter: f64,
    pub nodule_contrast: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            max_value: 4095.0,
            n_ribs: 20,
            rib_amplitude: 409.5,
            rib_width: 20.0,
            background: Background::Constant { value: 1000.0 },
            vessel_count: 0,
            vessel_contrast: 120.0,
            vessel_width: 2.0,
            nodule_count: 0,
            nodule_diameter: 12.0,
            nodule_contrast: 200.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhantomCase {
    pub raw: Image,
    pub gt_soft: Image,
    pub gt_bone: Image,
    pub masks: RibMaskSet,
    pub spec: PhantomSpec,
}

/// Rib profile `b(u) = (1 - cos(pi * min(u, 1))) / 2`.
pub fn bone_profile(u: f64) -> f64 {
    (1.0 - (std::f64::consts::PI * u.clamp(0.0, 1.0)).cos()) / 2.0
}

/// Exact distance from `p` to the closest segment of `c`, by brute force.
pub fn distance_to_contour(p: Point, c: &Contour) -> f64 {
    let v = c.vertices();
    let n = v.len();
    (0..n)
        .map(|i| segment_distance(p, v[i], v[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (abx, aby) = (b.x - a.x, b.y - a.y);
    let (apx, apy) = (p.x - a.x, p.y - a.y);
    let len2 = abx * abx + aby * aby;
    let u = if len2 > 0.0 {
        ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dy) = (apx - u * abx, apy - u * aby);
    (dx * dx + dy * dy).sqrt()
}

/// Geometry of one annular-sector rib strip.
#[derive(Debug, Clone, Copy)]
struct RibArc {
    cx: f64,
    cy: f64,
    r_outer: f64,
    r_inner: f64,
    half_angle: f64,
}

impl RibArc {
    fn polygon(&self) -> Vec<Point> {
        let arc_len = self.r_outer * 2.0 * self.half_angle;
        let n = ((arc_len / ARC_STEP).ceil() as usize).max(4);
        let at = |r: f64, a: f64| Point::new(self.cx + r * a.sin(), self.cy - r * a.cos());
        let angle = |i: usize| -self.half_angle + 2.0 * self.half_angle * i as f64 / n as f64;
        let mut pts: Vec<Point> = (0..=n).map(|i| at(self.r_outer, angle(i))).collect();
        pts.extend((0..=n).rev().map(|i| at(self.r_inner, angle(i))));
        pts
    }
}

fn layout(spec: &PhantomSpec, rng: &mut ChaCha8Rng) -> Result<Vec<RibArc>> {
    let (w, h) = (spec.width as f64, spec.height as f64);
    let rw = spec.rib_width;
    let margin = rw.max(8.0);
    let levels = spec.n_ribs.div_ceil(2);
    let usable = h - 2.0 * margin;
    let per_level = rw + MIN_SAG + RIB_GAP;
    let max_ribs = 2 * (usable / per_level).floor().max(0.0) as usize;
    if spec.n_ribs > max_ribs {
        return Err(Error::PhantomOverlap {
            requested: spec.n_ribs,
            max: max_ribs,
        });
    }
    let slot_h = usable / levels.max(1) as f64;
    let spine = (w / 8.0).max(RIB_GAP);
    let side_w = (w - spine) / 2.0 - margin;
    if side_w < 4.0 * rw {
        return Err(Error::InvalidPhantom(format!(
            "image width {} leaves {side_w:.1} px per side, need at least {:.1}",
            spec.width,
            4.0 * rw
        )));
    }

    let mut ribs = Vec::with_capacity(spec.n_ribs);
    for i in 0..spec.n_ribs {
        let level = i / 2;
        let right = i % 2 == 1;
        let chord = side_w * rng.random_range(0.75..=1.0);
        let slack = side_w - chord;
        let x_left = if right {
            w / 2.0 + spine / 2.0 + rng.random_range(0.0..=slack)
        } else {
            margin + rng.random_range(0.0..=slack)
        };
        let sag_max = (slot_h - rw - RIB_GAP).min(0.45 * chord).max(MIN_SAG);
        let sag = rng.random_range(MIN_SAG..=sag_max);
        let r_outer = (chord * chord / 4.0 + sag * sag) / (2.0 * sag);
        let slot_top = margin + level as f64 * slot_h;
        let top = slot_top + rng.random_range(0.0..=(slot_h - rw - RIB_GAP - sag).max(0.0));
        ribs.push(RibArc {
            cx: x_left + chord / 2.0,
            cy: top + r_outer,
            r_outer,
            r_inner: r_outer - rw,
            half_angle: (chord / 2.0 / r_outer).asin(),
        });
    }
    Ok(ribs)
}

/// Smooth value noise in `[-1, 1]` on a lattice of spacing `wavelength`.
struct ValueNoise {
    nx: usize,
    lattice: Vec<f64>,
    wavelength: f64,
}

impl ValueNoise {
    fn new(width: usize, height: usize, wavelength: f64, rng: &mut ChaCha8Rng) -> Self {
        let nx = (width as f64 / wavelength).ceil() as usize + 2;
        let ny = (height as f64 / wavelength).ceil() as usize + 2;
        let lattice = (0..nx * ny).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self {
            nx,
            lattice,
            wavelength,
        }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let (gx, gy) = (x / self.wavelength, y / self.wavelength);
        let (ix, iy) = (gx.floor() as usize, gy.floor() as usize);
        let fade = |t: f64| t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
        let (fx, fy) = (fade(gx - ix as f64), fade(gy - iy as f64));
        let v = |i: usize, j: usize| self.lattice[j * self.nx + i];
        let top = v(ix, iy) + (v(ix + 1, iy) - v(ix, iy)) * fx;
        let bot = v(ix, iy + 1) + (v(ix + 1, iy + 1) - v(ix, iy + 1)) * fx;
        top + (bot - top) * fy
    }
}

fn validate(spec: &PhantomSpec) -> Result<()> {
    let bad = |m: String| Err(Error::InvalidPhantom(m));
    if spec.width < 16 || spec.height < 16 {
        return bad(format!(
            "image must be at least 16x16, got {}x{}",
            spec.width, spec.height
        ));
    }
    if !(spec.max_value > 0.0 && spec.max_value.is_finite()) {
        return bad(format!(
            "max_value must be positive, got {}",
            spec.max_value
        ));
    }
    if !(spec.rib_width >= 3.0 && spec.rib_width.is_finite()) {
        return bad(format!("rib_width must be >= 3, got {}", spec.rib_width));
    }
    let finite_nonneg = [
        ("rib_amplitude", spec.rib_amplitude),
        ("vessel_contrast", spec.vessel_contrast),
        ("vessel_width", spec.vessel_width),
        ("nodule_diameter", spec.nodule_diameter),
        ("nodule_contrast", spec.nodule_contrast),
    ];
    for (name, v) in finite_nonneg {
        if !(v >= 0.0 && v.is_finite()) {
            return bad(format!("{name} must be finite and >= 0, got {v}"));
        }
    }
    let (lo, hi) = match spec.background {
        Background::Constant { value } => (value, value),
        Background::LowFrequency {
            mean,
            amplitude,
            wavelength,
        } => {
            if !(wavelength >= 1.0 && wavelength.is_finite()) || !(amplitude >= 0.0) {
                return bad(format!(
                    "low-frequency background needs wavelength >= 1 and amplitude >= 0 (got {wavelength}, {amplitude})"
                ));
            }
            (mean - amplitude, mean + amplitude)
        }
    };
    let peak = hi
        + spec.rib_amplitude
        + if spec.vessel_count > 0 {
            spec.vessel_contrast
        } else {
            0.0
        }
        + if spec.nodule_count > 0 {
            spec.nodule_contrast
        } else {
            0.0
        };
    if !(lo >= 0.0) || !(peak <= spec.max_value) {
        return bad(format!(
            "intensities span [{lo}, {peak}], outside [0, {}]",
            spec.max_value
        ));
    }
    Ok(())
}

/// Builds a phantom. Deterministic in `spec.seed`.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<PhantomCase> {
    validate(spec)?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let arcs = layout(spec, &mut rng)?;
    let mut masks = Vec::with_capacity(arcs.len());
    let mut bone = vec![0.0; w * h];
    let half = spec.rib_width / 2.0;
    for (i, arc) in arcs.iter().enumerate() {
        let contour = Contour::new_any_orientation(arc.polygon())?;
        let mask = RibMask::from_contour(i as u32 + 1, w, h, contour)?;
        let c = mask.contour();
        for y in 0..h {
            for x in 0..w {
                if mask.contains_pixel(x, y) {
                    let d = distance_to_contour(Point::new(x as f64 + 0.5, y as f64 + 0.5), c);
                    bone[y * w + x] += spec.rib_amplitude * bone_profile(d / half);
                }
            }
        }
        masks.push(mask);
    }
    let masks = RibMaskSet::new(w, h, masks)?;

    let mut soft = match spec.background {
        Background::Constant { value } => vec![value; w * h],
        Background::LowFrequency {
            mean,
            amplitude,
            wavelength,
        } => {
            let noise = ValueNoise::new(w, h, wavelength, &mut rng);
            let mut v = Vec::with_capacity(w * h);
            for y in 0..h {
                for x in 0..w {
                    v.push(mean + amplitude * noise.at(x as f64 + 0.5, y as f64 + 0.5));
                }
            }
            v
        }
    };

    let mut extra = vec![0.0; w * h];
    for _ in 0..spec.vessel_count {
        draw_vessel(&mut extra, w, h, spec, &mut rng);
    }
    for _ in 0..spec.nodule_count {
        draw_nodule(&mut extra, w, h, spec, &mut rng);
    }
    for (s, e) in soft.iter_mut().zip(&extra) {
        *s += e;
    }

    let raw: Vec<f64> = soft.iter().zip(&bone).map(|(s, b)| s + b).collect();
    Ok(PhantomCase {
        raw: Image::new(w, h, raw, spec.max_value)?,
        gt_soft: Image::new(w, h, soft, spec.max_value)?,
        gt_bone: Image::new(w, h, bone, spec.max_value)?,
        masks,
        spec: spec.clone(),
    })
}

/// Thin bright wavy line with a Gaussian cross-section; each pixel takes the
/// maximum over overlapping vessels.
fn draw_vessel(out: &mut [f64], w: usize, h: usize, spec: &PhantomSpec, rng: &mut ChaCha8Rng) {
    let (wf, hf) = (w as f64, h as f64);
    let start = Point::new(rng.random_range(0.0..wf), rng.random_range(0.0..hf));
    let heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let length = rng.random_range(0.25..0.5) * wf.min(hf);
    let wiggle = rng.random_range(2.0..12.0);
    let period = rng.random_range(40.0..120.0);
    let (dir, nrm) = (
        Point::new(heading.cos(), heading.sin()),
        Point::new(-heading.sin(), heading.cos()),
    );
    let steps = (length / 2.0).ceil() as usize;
    let pts: Vec<Point> = (0..=steps)
        .map(|i| {
            let u = length * i as f64 / steps as f64;
            let off = wiggle * (std::f64::consts::TAU * u / period).sin();
            start.add(dir.scale(u)).add(nrm.scale(off))
        })
        .collect();
    let sigma = (spec.vessel_width / 2.0).max(0.5);
    let reach = 4.0 * sigma;
    let (mut x0, mut y0, mut x1, mut y1) = (
        f64::INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
    );
    for p in &pts {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let xr =
        ((x0 - reach).floor().max(0.0) as usize)..((x1 + reach).ceil().clamp(0.0, wf) as usize);
    let yr =
        ((y0 - reach).floor().max(0.0) as usize)..((y1 + reach).ceil().clamp(0.0, hf) as usize);
    for y in yr {
        for x in xr.clone() {
            let p = Point::new(x as f64 + 0.5, y as f64 + 0.5);
            let d = pts
                .windows(2)
                .map(|s| segment_distance(p, s[0], s[1]))
                .fold(f64::INFINITY, f64::min);
            if d <= reach {
                let v = spec.vessel_contrast * (-d * d / (2.0 * sigma * sigma)).exp();
                let o = &mut out[y * w + x];
                *o = o.max(v);
            }
        }
    }
}

fn draw_nodule(out: &mut [f64], w: usize, h: usize, spec: &PhantomSpec, rng: &mut ChaCha8Rng) {
    let c = Point::new(
        rng.random_range(0.0..w as f64),
        rng.random_range(0.0..h as f64),
    );
    let sigma = (spec.nodule_diameter / 4.0).max(0.5);
    let reach = 4.0 * sigma;
    let y0 = (c.y - reach).floor().max(0.0) as usize;
    let y1 = ((c.y + reach).ceil() as usize).min(h);
    let x0 = (c.x - reach).floor().max(0.0) as usize;
    let x1 = ((c.x + reach).ceil() as usize).min(w);
    for y in y0..y1 {
        for x in x0..x1 {
            let d = Point::new(x as f64 + 0.5, y as f64 + 0.5).sub(c);
            let d2 = d.dot(d);
            let v = spec.nodule_contrast * (-d2 / (2.0 * sigma * sigma)).exp();
            let o = &mut out[y * w + x];
            *o = o.max(v);
        }
    }
}
