//! PNG raster I/O.
//!
//! Images are single-channel 8- or 16-bit grayscale. Mask rasters may also be
//! 8-bit palette images, in which case the palette index is the label.

use std::fs;
use std::io::{BufReader, Cursor};
use std::path::{Path, PathBuf};

use png::{BitDepth, ColorType, Transformations};

use super::image::Image;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepthOut {
    Eight,
    Sixteen,
}

impl BitDepthOut {
    pub fn from_bits(bits: u8) -> Option<Self> {
        match bits {
            8 => Some(Self::Eight),
            16 => Some(Self::Sixteen),
            _ => None,
        }
    }

    pub fn bits(self) -> u8 {
        match self {
            Self::Eight => 8,
            Self::Sixteen => 16,
        }
    }

    pub fn max_value(self) -> f64 {
        match self {
            Self::Eight => 255.0,
            Self::Sixteen => 65535.0,
        }
    }
}

/// Integer raster as stored on disk.
#[derive(Debug, Clone)]
pub(crate) struct RawRaster {
    pub width: usize,
    pub height: usize,
    pub bits: u8,
    pub values: Vec<u16>,
}

pub(crate) fn read_raster(path: &Path, allow_indexed: bool) -> Result<RawRaster> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(Transformations::IDENTITY);
    let decode_err = |e: png::DecodingError| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = decoder.read_info().map_err(decode_err)?;
    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    let indexed = match color {
        ColorType::Grayscale => false,
        ColorType::Indexed if allow_indexed => true,
        other => {
            return Err(Error::MultiChannel {
                path: path.to_path_buf(),
                color: format!("{other:?}"),
            })
        }
    };
    let bits = match depth {
        BitDepth::Eight => 8,
        BitDepth::Sixteen if !indexed => 16,
        other => {
            return Err(Error::UnsupportedBitDepth {
                path: path.to_path_buf(),
                bits: other as u8,
            })
        }
    };
    let size = reader.output_buffer_size().ok_or_else(|| Error::Decode {
        path: path.to_path_buf(),
        message: "image too large".into(),
    })?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(decode_err)?;
    let width = frame.width as usize;
    let height = frame.height as usize;
    let line = frame.line_size;
    let mut values = Vec::with_capacity(width * height);
    for row in buf.chunks(line).take(height) {
        if bits == 8 {
            values.extend(row[..width].iter().map(|&b| b as u16));
        } else {
            values.extend(
                row[..2 * width]
                    .chunks_exact(2)
                    .map(|p| u16::from_be_bytes([p[0], p[1]])),
            );
        }
    }
    Ok(RawRaster {
        width,
        height,
        bits,
        values,
    })
}

pub(crate) fn encode_gray(
    width: usize,
    height: usize,
    depth: BitDepthOut,
    values: &[u16],
) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let to_err = |e: png::EncodingError| Error::Write {
        path: PathBuf::from("<memory>"),
        message: e.to_string(),
    };
    {
        let mut encoder = png::Encoder::new(Cursor::new(&mut out), width as u32, height as u32);
        encoder.set_color(ColorType::Grayscale);
        encoder.set_depth(match depth {
            BitDepthOut::Eight => BitDepth::Eight,
            BitDepthOut::Sixteen => BitDepth::Sixteen,
        });
        let mut writer = encoder.write_header().map_err(to_err)?;
        let bytes: Vec<u8> = match depth {
            BitDepthOut::Eight => values.iter().map(|&v| v as u8).collect(),
            BitDepthOut::Sixteen => values.iter().flat_map(|v| v.to_be_bytes()).collect(),
        };
        writer.write_image_data(&bytes).map_err(to_err)?;
        writer.finish().map_err(to_err)?;
    }
    Ok(out)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`, so a
/// reader never observes a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Write {
            path: path.to_path_buf(),
            message: "path has no file name".into(),
        })?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let write_err = |e: std::io::Error| Error::Write {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    fs::write(&tmp, bytes).map_err(write_err)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        write_err(e)
    })
}

/// Loads an 8- or 16-bit grayscale PNG without rescaling.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let raster = read_raster(path, false)?;
    let max = (1u32 << raster.bits) as f64 - 1.0;
    let data = raster.values.iter().map(|&v| v as f64).collect();
    Image::new(raster.width, raster.height, data, max)
}

/// Bit depth a file was stored with, inferred from the image's `max_value`.
pub fn native_depth(img: &Image) -> BitDepthOut {
    if img.max_value() <= 255.0 {
        BitDepthOut::Eight
    } else {
        BitDepthOut::Sixteen
    }
}

/// Quantizes to integers (clamp, then round half to even).
pub fn quantize(img: &Image, depth: BitDepthOut) -> Vec<u16> {
    let max = depth.max_value();
    img.data()
        .iter()
        .map(|&v| v.clamp(0.0, max).round_ties_even() as u16)
        .collect()
}

pub fn encode_image(img: &Image, depth: BitDepthOut) -> Result<Vec<u8>> {
    encode_gray(img.width(), img.height(), depth, &quantize(img, depth))
}

pub fn save_image(img: &Image, path: impl AsRef<Path>, depth: BitDepthOut) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_image(img, depth).map_err(|e| match e {
        Error::Write { message, .. } => Error::Write {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })?;
    write_atomic(path, &bytes)
}
