//! Raster and ROI file IO.
//!
//! Images are single-channel 8- or 16-bit PNG or binary PGM. Masks are 8-bit
//! with 0 for background; any nonzero value reads as foreground.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, ImageReader, Luma};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, GrayImage, RegionOfInterest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    fn max_value(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn open_raster(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        Some(other) => {
            return Err(format_err(
                path,
                format!("unsupported format {other:?}; expected PNG or PGM"),
            ))
        }
        None => return Err(format_err(path, "unrecognized image format")),
    }
    reader.decode().map_err(|e| format_err(path, e.to_string()))
}

fn output_format(path: &Path) -> Result<ImageFormat> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("png") => Ok(ImageFormat::Png),
        Some("pgm") => Ok(ImageFormat::Pnm),
        _ => Err(format_err(
            path,
            "output must have a .png or .pgm extension",
        )),
    }
}

/// Load a grayscale image, returning it together with its source bit depth.
pub fn load_image_with_depth(path: impl AsRef<Path>) -> Result<(GrayImage, BitDepth)> {
    let path = path.as_ref();
    let raster = open_raster(path)?;
    let (w, h) = (raster.width() as usize, raster.height() as usize);
    match raster {
        DynamicImage::ImageLuma8(buf) => {
            let px = buf
                .into_raw()
                .into_iter()
                .map(|v| v as f64 / 255.0)
                .collect();
            Ok((GrayImage::new(w, h, px)?, BitDepth::Eight))
        }
        DynamicImage::ImageLuma16(buf) => {
            let px = buf
                .into_raw()
                .into_iter()
                .map(|v| v as f64 / 65535.0)
                .collect();
            Ok((GrayImage::new(w, h, px)?, BitDepth::Sixteen))
        }
        other => Err(format_err(
            path,
            format!("expected a single-channel image, found {:?}", other.color()),
        )),
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    load_image_with_depth(path).map(|(img, _)| img)
}

/// Write an image quantized to `depth`. Format follows the file extension.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let format = output_format(path)?;
    let (w, h) = (img.width() as u32, img.height() as u32);
    let scale = depth.max_value();
    let raster = match depth {
        BitDepth::Eight => DynamicImage::ImageLuma8(
            ImageBuffer::from_raw(
                w,
                h,
                img.pixels()
                    .iter()
                    .map(|v| (v * scale).round() as u8)
                    .collect(),
            )
            .expect("buffer sized to image"),
        ),
        BitDepth::Sixteen => DynamicImage::ImageLuma16(
            ImageBuffer::from_raw(
                w,
                h,
                img.pixels()
                    .iter()
                    .map(|v| (v * scale).round() as u16)
                    .collect(),
            )
            .expect("buffer sized to image"),
        ),
    };
    raster
        .save_with_format(path, format)
        .map_err(|e| format_err(path, e.to_string()))
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let raster = open_raster(path)?;
    let (w, h) = (raster.width() as usize, raster.height() as usize);
    let bits = match raster {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(|v| v != 0).collect(),
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(|v| v != 0).collect(),
        other => {
            return Err(format_err(
                path,
                format!("expected a single-channel mask, found {:?}", other.color()),
            ))
        }
    };
    BinaryMask::new(w, h, bits)
}

/// Write a mask as 8-bit 0/255.
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = output_format(path)?;
    let bytes = mask
        .bits()
        .iter()
        .map(|&b| if b { 255u8 } else { 0 })
        .collect();
    save_luma8(mask.width(), mask.height(), bytes, path, format)
}

/// Write raw 8-bit gray values (used for overlays).
pub fn save_gray8(
    width: usize,
    height: usize,
    bytes: Vec<u8>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let format = output_format(path)?;
    save_luma8(width, height, bytes, path, format)
}

fn save_luma8(
    width: usize,
    height: usize,
    bytes: Vec<u8>,
    path: &Path,
    format: ImageFormat,
) -> Result<()> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(width as u32, height as u32, bytes).expect("buffer sized to mask");
    buf.save_with_format(path, format)
        .map_err(|e| format_err(path, e.to_string()))
}

/// Read a ROI file: one JSON object `{"x":..,"y":..,"w":..,"h":..}`.
pub fn load_roi(path: impl AsRef<Path>) -> Result<RegionOfInterest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e.to_string()))
}
