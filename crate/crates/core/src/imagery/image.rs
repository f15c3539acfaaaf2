use crate::error::{Error, Result};

/// A 2-D grayscale raster held in `f64`.
///
/// Pixel `(x, y)` covers the unit square `[x, x+1] x [y, y+1]` and its value
/// sits at the pixel center `(x + 0.5, y + 0.5)`. Row-major, `(0, 0)` is the
/// top-left pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
    max_value: f64,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>, max_value: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("empty image {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if !(max_value.is_finite() && max_value > 0.0) {
            return Err(Error::InvalidImage(format!(
                "max_value {max_value} must be positive"
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!(
                "non-finite value at pixel ({}, {})",
                i % width,
                i / width
            )));
        }
        Ok(Self {
            width,
            height,
            data,
            max_value,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64, max_value: f64) -> Self {
        Self::new(width, height, vec![value; width * height], max_value)
            .expect("filled image with finite value")
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        max_value: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data, max_value).expect("from_fn produced invalid image")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn max_value(&self) -> f64 {
        self.max_value
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Bilinear interpolation at a continuous position. Pixel centers sit at
    /// half-integer coordinates; positions beyond the outermost centers are
    /// clamped to the border.
    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        let u = (x - 0.5).clamp(0.0, (self.width - 1) as f64);
        let v = (y - 0.5).clamp(0.0, (self.height - 1) as f64);
        let x0 = (u.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (v.floor() as usize).min(self.height.saturating_sub(2));
        let fx = u - x0 as f64;
        let fy = v - y0 as f64;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    pub fn same_shape(&self, other: &Image) -> Result<()> {
        self.same_shape_as(other.shape())
    }

    pub fn same_shape_as(&self, (width, height): (usize, usize)) -> Result<()> {
        if self.shape() != (width, height) {
            return Err(Error::ShapeMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: width,
                right_h: height,
            });
        }
        Ok(())
    }

    pub fn clamp_to_range(&mut self) {
        let max = self.max_value;
        for v in &mut self.data {
            *v = v.clamp(0.0, max);
        }
    }
}
