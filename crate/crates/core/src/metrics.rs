//! Image-quality measures and the combined loss.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::imagery::Image;

/// Window standard deviations, one per scale, finest first.
pub const MS_SSIM_SIGMAS: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];
pub const MS_SSIM_WINDOW: usize = 11;
/// Smallest side length that survives four 2x downsamplings with an
/// 11-pixel window.
pub const MS_SSIM_MIN_SIZE: usize = 16 * MS_SSIM_WINDOW;
pub const K1: f64 = 0.01;
pub const K2: f64 = 0.03;
pub const DEFAULT_ALPHA: f64 = 0.75;
pub const DEFAULT_BETA: f64 = 0.25;

fn mse(x: &Image, y: &Image) -> Result<f64> {
    x.same_shape(y)?;
    let n = x.data().len() as f64;
    Ok(x.data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

pub fn rmse(x: &Image, y: &Image) -> Result<f64> {
    Ok(mse(x, y)?.sqrt())
}

/// Mean absolute difference.
pub fn l1(x: &Image, y: &Image) -> Result<f64> {
    x.same_shape(y)?;
    let n = x.data().len() as f64;
    Ok(x.data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n)
}

/// `log10(max^2 / MSE)`, or infinite when the images are identical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    pub fn value(self) -> f64 {
        match self {
            Psnr::Finite(v) => v,
            Psnr::Infinite => f64::INFINITY,
        }
    }

    pub fn db(self) -> Psnr {
        match self {
            Psnr::Finite(v) => Psnr::Finite(10.0 * v),
            Psnr::Infinite => Psnr::Infinite,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == Psnr::Infinite
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v}"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Psnr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Psnr::Finite(v) => s.serialize_f64(*v),
            Psnr::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Psnr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Psnr::Finite(v)),
            Raw::Text(t) if t == "inf" => Ok(Psnr::Infinite),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected number or \"inf\", got {t:?}"
            ))),
        }
    }
}

pub fn psnr(x: &Image, y: &Image, max_x: f64) -> Result<Psnr> {
    let m = mse(x, y)?;
    if m == 0.0 {
        Ok(Psnr::Infinite)
    } else {
        Ok(Psnr::Finite((max_x * max_x / m).log10()))
    }
}

/// Plain row-major buffer used inside MS-SSIM.
#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

impl Plane {
    fn downsample(&self) -> Plane {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut v = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let i = 2 * y * self.w + 2 * x;
                v.push(
                    0.25 * (self.v[i]
                        + self.v[i + 1]
                        + self.v[i + self.w]
                        + self.v[i + self.w + 1]),
                );
            }
        }
        Plane { w, h, v }
    }

    fn mul(&self, o: &Plane) -> Plane {
        Plane {
            w: self.w,
            h: self.h,
            v: self.v.iter().zip(&o.v).map(|(a, b)| a * b).collect(),
        }
    }

    /// Separable valid-mode filtering.
    fn filter(&self, taps: &[f64]) -> Plane {
        let n = taps.len();
        let ow = self.w + 1 - n;
        let oh = self.h + 1 - n;
        let mut rows = vec![0.0; ow * self.h];
        for y in 0..self.h {
            let src = &self.v[y * self.w..(y + 1) * self.w];
            for x in 0..ow {
                rows[y * ow + x] = taps.iter().zip(&src[x..x + n]).map(|(t, s)| t * s).sum();
            }
        }
        let mut v = vec![0.0; ow * oh];
        for y in 0..oh {
            for x in 0..ow {
                v[y * ow + x] = (0..n).map(|k| taps[k] * rows[(y + k) * ow + x]).sum();
            }
        }
        Plane { w: ow, h: oh, v }
    }
}

/// Normalised 1-D Gaussian of `len` taps centred on the middle tap.
pub fn gaussian_window(sigma: f64, len: usize) -> Vec<f64> {
    let c = (len as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..len)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Mean luminance and contrast-structure terms at one scale.
fn ssim_terms(x: &Plane, y: &Plane, sigma: f64, c1: f64, c2: f64) -> (f64, f64) {
    let taps = gaussian_window(sigma, MS_SSIM_WINDOW);
    let mx = x.filter(&taps);
    let my = y.filter(&taps);
    let sxx = x.mul(x).filter(&taps);
    let syy = y.mul(y).filter(&taps);
    let sxy = x.mul(y).filter(&taps);
    let n = mx.v.len() as f64;
    let (mut l, mut cs) = (0.0, 0.0);
    for i in 0..mx.v.len() {
        let (a, b) = (mx.v[i], my.v[i]);
        let vx = sxx.v[i] - a * a;
        let vy = syy.v[i] - b * b;
        let cov = sxy.v[i] - a * b;
        l += (2.0 * a * b + c1) / (a * a + b * b + c1);
        cs += (2.0 * cov + c2) / (vx + vy + c2);
    }
    (l / n, cs / n)
}

/// Five-scale MS-SSIM: luminance at the coarsest scale times the product of
/// the contrast-structure terms of every scale.
pub fn ms_ssim(x: &Image, y: &Image, max_x: f64) -> Result<f64> {
    x.same_shape(y)?;
    let (w, h) = x.shape();
    if w < MS_SSIM_MIN_SIZE || h < MS_SSIM_MIN_SIZE {
        return Err(Error::TooSmallForMsSsim {
            width: w,
            height: h,
            min: MS_SSIM_MIN_SIZE,
        });
    }
    let c1 = (K1 * max_x).powi(2);
    let c2 = (K2 * max_x).powi(2);
    let mut px = Plane {
        w,
        h,
        v: x.data().to_vec(),
    };
    let mut py = Plane {
        w,
        h,
        v: y.data().to_vec(),
    };
    let mut product = 1.0;
    let mut lum = 1.0;
    for (j, &sigma) in MS_SSIM_SIGMAS.iter().enumerate() {
        if j > 0 {
            px = px.downsample();
            py = py.downsample();
        }
        let (l, cs) = ssim_terms(&px, &py, sigma, c1, c2);
        product *= cs;
        lum = l;
    }
    Ok(lum * product)
}

/// Value of the combined loss; `NegInfinite` when the PSNR term is infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    Finite(f64),
    NegInfinite,
}

impl Loss {
    pub fn value(self) -> f64 {
        match self {
            Loss::Finite(v) => v,
            Loss::NegInfinite => f64::NEG_INFINITY,
        }
    }
}

impl Serialize for Loss {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Loss::Finite(v) => s.serialize_f64(*v),
            Loss::NegInfinite => s.serialize_str("-inf"),
        }
    }
}

/// `-alpha * psnr + (1 - alpha) * (beta * (1 - ms_ssim) + (1 - beta) * l1)`.
/// Terms with zero weight are not evaluated.
pub fn combined_loss(x: &Image, y: &Image, alpha: f64, beta: f64, max_x: f64) -> Result<Loss> {
    x.same_shape(y)?;
    let mut total = 0.0;
    if alpha != 0.0 {
        match psnr(x, y, max_x)? {
            Psnr::Finite(p) => total -= alpha * p,
            Psnr::Infinite => return Ok(Loss::NegInfinite),
        }
    }
    let rest = 1.0 - alpha;
    if rest != 0.0 {
        let mut inner = 0.0;
        if beta != 0.0 {
            inner += beta * (1.0 - ms_ssim(x, y, max_x)?);
        }
        if beta != 1.0 {
            inner += (1.0 - beta) * l1(x, y)?;
        }
        total += rest * inner;
    }
    Ok(Loss::Finite(total))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub rmse: f64,
    pub psnr_log: Psnr,
    pub psnr_db: Psnr,
    /// `None` when the images are below the 5-scale minimum size.
    pub ms_ssim: Option<f64>,
    pub l1: f64,
    pub combined: Option<Loss>,
    pub alpha: f64,
    pub beta: f64,
    pub max_value: f64,
}

impl MetricsReport {
    pub fn compute(x: &Image, y: &Image, alpha: f64, beta: f64) -> Result<Self> {
        x.same_shape(y)?;
        let max = x.max_value();
        let p = psnr(x, y, max)?;
        let ms = match ms_ssim(x, y, max) {
            Ok(v) => Some(v),
            Err(Error::TooSmallForMsSsim { .. }) => None,
            Err(e) => return Err(e),
        };
        let combined = match combined_loss(x, y, alpha, beta, max) {
            Ok(v) => Some(v),
            Err(Error::TooSmallForMsSsim { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            rmse: rmse(x, y)?,
            psnr_log: p,
            psnr_db: p.db(),
            ms_ssim: ms,
            l1: l1(x, y)?,
            combined,
            alpha,
            beta,
            max_value: max,
        })
    }
}
