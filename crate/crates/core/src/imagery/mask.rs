//! Per-rib masks and their on-disk formats.
//!
//! A mask set is read either from an indexed raster (pixel value = rib
//! label, 0 = background) or from a JSON manifest
//! `{ "ribs": [ { "label": 1, "file": "rib1.png" }, ... ] }`. Manifest entries
//! may carry an explicit polygon `"contour": [[x, y], ...]` in pixel-corner
//! coordinates instead of, or in addition to, a raster file; a contour-only
//! entry is rasterised by pixel-center inclusion.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::io::{encode_gray, read_raster, write_atomic, BitDepthOut};
use super::trace::{components4, trace_labeled};
use crate::error::{Error, Result};
use crate::st_space::{Contour, Point};

/// Minimum number of foreground pixels for a usable rib mask.
pub const MIN_MASK_PIXELS: usize = 8;

/// Required fraction of pixels on which an explicit contour and the bitmap
/// agree.
pub const MIN_CONTOUR_AGREEMENT: f64 = 0.99;

#[derive(Debug, Clone)]
pub struct RibMask {
    label: u32,
    width: usize,
    height: usize,
    bitmap: Vec<bool>,
    contour: Arc<Contour>,
}

impl RibMask {
    /// Validates the bitmap and traces its contour.
    pub fn from_bitmap(label: u32, width: usize, height: usize, bitmap: Vec<bool>) -> Result<Self> {
        validate_bitmap(label, width, height, &bitmap)?;
        let contour = trace_labeled(&bitmap, width, height, label)?;
        Ok(Self {
            label,
            width,
            height,
            bitmap,
            contour: Arc::new(contour),
        })
    }

    /// Pairs a bitmap with a known polygon (e.g. an annotation or a phantom's
    /// exact rib outline) instead of the traced staircase.
    pub fn with_contour(
        label: u32,
        width: usize,
        height: usize,
        bitmap: Vec<bool>,
        contour: Contour,
    ) -> Result<Self> {
        validate_bitmap(label, width, height, &bitmap)?;
        let raster = contour.rasterize(width, height);
        let (lo, hi) = contour.bounding_box();
        // agreement counted over the union's bounding box
        let x0 = (lo.x.floor().max(0.0) as usize).min(width);
        let y0 = (lo.y.floor().max(0.0) as usize).min(height);
        let x1 = (hi.x.ceil().max(0.0) as usize).min(width);
        let y1 = (hi.y.ceil().max(0.0) as usize).min(height);
        let mut total = 0usize;
        let mut agree = 0usize;
        for y in 0..height {
            for x in 0..width {
                let i = y * width + x;
                let in_box = x >= x0 && x < x1 && y >= y0 && y < y1;
                if in_box || bitmap[i] {
                    total += 1;
                    if raster[i] == bitmap[i] {
                        agree += 1;
                    }
                }
            }
        }
        let agreement = agree as f64 / total.max(1) as f64;
        if agreement < MIN_CONTOUR_AGREEMENT {
            return Err(Error::ContourMismatch { label, agreement });
        }
        Ok(Self {
            label,
            width,
            height,
            bitmap,
            contour: Arc::new(contour),
        })
    }

    /// Mask whose bitmap is the pixel-center rasterisation of `contour`.
    pub fn from_contour(label: u32, width: usize, height: usize, contour: Contour) -> Result<Self> {
        let bitmap = contour.rasterize(width, height);
        Self::with_contour(label, width, height, bitmap, contour)
    }

    pub fn label(&self) -> u32 {
        self.label
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bitmap(&self) -> &[bool] {
        &self.bitmap
    }

    #[inline]
    pub fn contains_pixel(&self, x: usize, y: usize) -> bool {
        self.bitmap[y * self.width + x]
    }

    pub fn pixel_count(&self) -> usize {
        self.bitmap.iter().filter(|&&b| b).count()
    }

    pub fn contour(&self) -> &Contour {
        &self.contour
    }

    pub fn contour_arc(&self) -> &Arc<Contour> {
        &self.contour
    }
}

fn validate_bitmap(label: u32, width: usize, height: usize, bitmap: &[bool]) -> Result<()> {
    if bitmap.len() != width * height {
        return Err(Error::InvalidImage(format!(
            "rib {label}: bitmap length {} does not match {width}x{height}",
            bitmap.len()
        )));
    }
    let pixels = bitmap.iter().filter(|&&b| b).count();
    if pixels < MIN_MASK_PIXELS {
        return Err(Error::DegenerateMask {
            label,
            pixels,
            width: 0,
            height: 0,
        });
    }
    let (components, _) = components4(bitmap, width, height);
    if components != 1 {
        return Err(Error::DisconnectedMask { label, components });
    }
    Ok(())
}

/// Rib masks of one radiograph, ordered by label (superior to inferior,
/// left before right at the same level).
#[derive(Debug, Clone)]
pub struct RibMaskSet {
    width: usize,
    height: usize,
    masks: Vec<RibMask>,
}

impl RibMaskSet {
    pub fn new(width: usize, height: usize, mut masks: Vec<RibMask>) -> Result<Self> {
        masks.sort_by_key(|m| m.label);
        let mut seen = BTreeSet::new();
        for m in &masks {
            if !seen.insert(m.label) {
                return Err(Error::DuplicateLabel(m.label));
            }
            if m.shape() != (width, height) {
                return Err(Error::ShapeMismatch {
                    left_w: m.width,
                    left_h: m.height,
                    right_w: width,
                    right_h: height,
                });
            }
        }
        Ok(Self {
            width,
            height,
            masks,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            masks: Vec::new(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn masks(&self) -> &[RibMask] {
        &self.masks
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn labels(&self) -> Vec<u32> {
        self.masks.iter().map(|m| m.label).collect()
    }

    /// Union of all rib bitmaps.
    pub fn union(&self) -> Vec<bool> {
        let mut u = vec![false; self.width * self.height];
        for m in &self.masks {
            for (o, &b) in u.iter_mut().zip(&m.bitmap) {
                *o |= b;
            }
        }
        u
    }

    /// Indexed label raster (0 = background). Later labels win on overlap.
    pub fn label_raster(&self) -> Vec<u16> {
        let mut r = vec![0u16; self.width * self.height];
        for m in &self.masks {
            for (o, &b) in r.iter_mut().zip(&m.bitmap) {
                if b {
                    *o = m.label as u16;
                }
            }
        }
        r
    }

    /// Builds a set from an indexed label raster held in memory.
    pub fn from_label_raster(width: usize, height: usize, labels: &[u16]) -> Result<Self> {
        let present: BTreeSet<u16> = labels.iter().copied().filter(|&l| l != 0).collect();
        let masks = present
            .into_iter()
            .map(|l| {
                let bitmap = labels.iter().map(|&v| v == l).collect();
                RibMask::from_bitmap(l as u32, width, height, bitmap)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(width, height, masks)
    }
}

/// JSON manifest of per-rib masks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskManifest {
    /// Raster shape; required when every entry is contour-only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    pub ribs: Vec<ManifestRib>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRib {
    pub label: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour: Option<Vec<[f64; 2]>>,
}

impl MaskManifest {
    pub fn from_set(set: &RibMaskSet) -> Self {
        Self {
            width: Some(set.width),
            height: Some(set.height),
            ribs: set
                .masks
                .iter()
                .map(|m| ManifestRib {
                    label: m.label,
                    file: None,
                    contour: Some(m.contour.vertices().iter().map(|p| [p.x, p.y]).collect()),
                })
                .collect(),
        }
    }
}

/// Writes the label raster as a grayscale PNG (8-bit when every label fits).
pub fn save_mask_set(set: &RibMaskSet, path: impl AsRef<Path>) -> Result<()> {
    let depth = if set.masks.iter().all(|m| m.label <= 255) {
        BitDepthOut::Eight
    } else {
        BitDepthOut::Sixteen
    };
    let bytes = encode_gray(set.width, set.height, depth, &set.label_raster())?;
    write_atomic(path.as_ref(), &bytes)
}

/// Loads a mask set from an indexed PNG or a `.json` manifest.
pub fn load_mask_set(path: impl AsRef<Path>) -> Result<RibMaskSet> {
    let path = path.as_ref();
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        load_manifest(path)
    } else {
        let raster = read_raster(path, true)?;
        RibMaskSet::from_label_raster(raster.width, raster.height, &raster.values)
    }
}

fn load_manifest(path: &Path) -> Result<RibMaskSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: MaskManifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let bad = |message: String| Error::Manifest {
        path: path.to_path_buf(),
        message,
    };
    let mut shape = manifest.width.zip(manifest.height);
    let mut masks = Vec::with_capacity(manifest.ribs.len());
    for rib in &manifest.ribs {
        let bitmap = match &rib.file {
            Some(f) => {
                let raster = read_raster(&base.join(f), true)?;
                match shape {
                    None => shape = Some((raster.width, raster.height)),
                    Some((w, h)) if (w, h) != (raster.width, raster.height) => {
                        return Err(Error::ShapeMismatch {
                            left_w: raster.width,
                            left_h: raster.height,
                            right_w: w,
                            right_h: h,
                        })
                    }
                    Some(_) => {}
                }
                Some(raster.values.iter().map(|&v| v != 0).collect::<Vec<bool>>())
            }
            None => None,
        };
        let (w, h) = shape.ok_or_else(|| {
            bad(format!(
                "rib {}: contour-only entries need top-level width and height",
                rib.label
            ))
        })?;
        let contour = rib
            .contour
            .as_ref()
            .map(|pts| {
                Contour::new_any_orientation(pts.iter().map(|p| Point::new(p[0], p[1])).collect())
            })
            .transpose()
            .map_err(|e| Error::Rib {
                label: rib.label,
                source: Box::new(e),
            })?;
        let mask = match (bitmap, contour) {
            (Some(b), Some(c)) => RibMask::with_contour(rib.label, w, h, b, c)?,
            (Some(b), None) => RibMask::from_bitmap(rib.label, w, h, b)?,
            (None, Some(c)) => RibMask::from_contour(rib.label, w, h, c)?,
            (None, None) => {
                return Err(bad(format!(
                    "rib {} has neither file nor contour",
                    rib.label
                )))
            }
        };
        masks.push(mask);
    }
    let (w, h) = shape.ok_or_else(|| bad("manifest lists no ribs and no shape".into()))?;
    RibMaskSet::new(w, h, masks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagery::io::{encode_gray, BitDepthOut};

    #[test]
    fn single_block_label() {
        let (w, h) = (16, 8);
        let mut labels = vec![0u16; w * h];
        for y in 2..6 {
            for x in 3..13 {
                labels[y * w + x] = 1;
            }
        }
        let set = RibMaskSet::from_label_raster(w, h, &labels).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.masks()[0].pixel_count(), 40);
    }

    #[test]
    fn labels_ordered() {
        let (w, h) = (20, 10);
        let mut labels = vec![0u16; w * h];
        for y in 1..4 {
            for x in 1..5 {
                labels[y * w + x] = 3;
                labels[(y + 5) * w + x + 10] = 1;
            }
        }
        let set = RibMaskSet::from_label_raster(w, h, &labels).unwrap();
        assert_eq!(set.labels(), vec![1, 3]);
    }

    #[test]
    fn diagonal_blobs_are_disconnected() {
        let (w, h) = (10, 10);
        let mut labels = vec![0u16; w * h];
        for y in 0..3 {
            for x in 0..3 {
                labels[y * w + x] = 1;
                labels[(y + 3) * w + x + 3] = 1;
            }
        }
        let err = RibMaskSet::from_label_raster(w, h, &labels).unwrap_err();
        assert!(matches!(
            err,
            Error::DisconnectedMask {
                label: 1,
                components: 2
            }
        ));
        assert!(err.to_string().contains("disconnected"));
    }

    #[test]
    fn tiny_label_rejected_with_id() {
        let (w, h) = (10, 10);
        let mut labels = vec![0u16; w * h];
        labels[11] = 4;
        labels[12] = 4;
        let err = RibMaskSet::from_label_raster(w, h, &labels).unwrap_err();
        assert!(matches!(err, Error::DegenerateMask { label: 4, .. }));
    }

    #[test]
    fn manifest_with_files_and_contours() {
        let dir = tempfile::tempdir().unwrap();
        let (w, h) = (20, 20);
        let mut rib = vec![0u16; w * h];
        for y in 2..8 {
            for x in 2..12 {
                rib[y * w + x] = 255;
            }
        }
        std::fs::write(
            dir.path().join("r1.png"),
            encode_gray(w, h, BitDepthOut::Eight, &rib).unwrap(),
        )
        .unwrap();
        let manifest = r#"{ "ribs": [
            {"label": 1, "file": "r1.png"},
            {"label": 2, "contour": [[3,11],[15,11],[15,17],[3,17]]}
        ] }"#;
        let path = dir.path().join("ribs.json");
        std::fs::write(&path, manifest).unwrap();
        let set = load_mask_set(&path).unwrap();
        assert_eq!(set.labels(), vec![1, 2]);
        assert_eq!(set.masks()[0].pixel_count(), 60);
        assert_eq!(set.masks()[1].pixel_count(), 72);
        assert_eq!(set.masks()[1].contour().len(), 4);
    }
}
