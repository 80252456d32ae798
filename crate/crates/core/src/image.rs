//! Raster containers shared by every segmentation method.
//!
//! All rasters are row-major; pixel `(i, j)` is column `i`, row `j`, stored at
//! `j * width + i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grayscale image with intensities normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        check_shape(width, height, pixels.len())?;
        if let Some(p) = pixels
            .iter()
            .position(|v| !(v.is_finite() && (0.0..=1.0).contains(v)))
        {
            return Err(Error::InvalidImage(format!(
                "pixel {} has value {} outside [0,1]",
                p, pixels[p]
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Build from a closure over `(column, row)`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                pixels.push(f(i, j));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pixels[j * self.width + i]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }
}

/// Foreground/background mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_shape(width, height, bits.len())?;
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let mut bits = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                bits.push(f(i, j));
            }
        }
        Self::new(width, height, bits)
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[j * self.width + i]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_blank(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Foreground pixels with at least one background 4-neighbor, or lying
    /// on the image edge, as `(column, row)` pairs in row-major order.
    pub fn boundary(&self) -> Vec<(usize, usize)> {
        let (w, h) = (self.width, self.height);
        let mut out = Vec::new();
        for j in 0..h {
            for i in 0..w {
                if !self.get(i, j) {
                    continue;
                }
                let edge = i == 0 || j == 0 || i + 1 == w || j + 1 == h;
                if edge
                    || !self.get(i - 1, j)
                    || !self.get(i + 1, j)
                    || !self.get(i, j - 1)
                    || !self.get(i, j + 1)
                {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Place this mask into a larger blank canvas at `roi`'s offset.
    pub fn paste_into(&self, width: usize, height: usize, roi: &RegionOfInterest) -> Result<Self> {
        roi.check(width, height)?;
        if (roi.w, roi.h) != self.dims() {
            return Err(Error::shape((roi.w, roi.h), self.dims()));
        }
        let mut bits = vec![false; width * height];
        for j in 0..self.height {
            let dst = (roi.y + j) * width + roi.x;
            bits[dst..dst + self.width]
                .copy_from_slice(&self.bits[j * self.width..(j + 1) * self.width]);
        }
        Self::new(width, height, bits)
    }
}

/// Per-pixel cluster or region assignment. Labels are `0..k` and every label
/// occurs at least once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<usize>,
    k: usize,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<usize>) -> Result<Self> {
        check_shape(width, height, labels.len())?;
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; k];
        for &l in &labels {
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidImage(format!(
                "label {missing} is unused in a label map with k = {k}"
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
            k,
        })
    }

    /// Renumber arbitrary labels to `0..k` preserving their relative order.
    /// Returns the map and, for each new label, the original label it came from.
    pub fn compacted(width: usize, height: usize, raw: &[usize]) -> Result<(Self, Vec<usize>)> {
        let mut used: Vec<usize> = raw.to_vec();
        used.sort_unstable();
        used.dedup();
        let labels = raw
            .iter()
            .map(|l| used.binary_search(l).expect("label present"))
            .collect();
        Ok((Self::new(width, height, labels)?, used))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> usize {
        self.labels[j * self.width + i]
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    pub fn mask_of(&self, label: usize) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.labels.iter().map(|&l| l == label).collect(),
        }
    }
}

/// Rectangular crop window, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionOfInterest {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl RegionOfInterest {
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            x: 0,
            y: 0,
            w: width,
            h: height,
        }
    }

    pub fn check(&self, width: usize, height: usize) -> Result<()> {
        let fits = self.w >= 1
            && self.h >= 1
            && self.x.checked_add(self.w).is_some_and(|e| e <= width)
            && self.y.checked_add(self.h).is_some_and(|e| e <= height);
        if fits {
            Ok(())
        } else {
            Err(Error::RoiOutOfBounds {
                x: self.x,
                y: self.y,
                w: self.w,
                h: self.h,
                width,
                height,
            })
        }
    }
}

/// Millimeters per pixel along columns (`dx`) and rows (`dy`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelSpacing {
    pub dx: f64,
    pub dy: f64,
}

impl PixelSpacing {
    pub fn new(dx: f64, dy: f64) -> Result<Self> {
        if dx.is_finite() && dy.is_finite() && dx > 0.0 && dy > 0.0 {
            Ok(Self { dx, dy })
        } else {
            Err(Error::Config(format!(
                "pixel spacing {dx}x{dy} must be finite and positive"
            )))
        }
    }
}

impl Default for PixelSpacing {
    fn default() -> Self {
        Self { dx: 1.0, dy: 1.0 }
    }
}

fn check_shape(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage(format!(
            "empty extent {width}x{height}"
        )));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::InvalidImage(format!(
            "{len} values do not fill a {width}x{height} raster"
        )));
    }
    Ok(())
}

pub fn crop_roi(img: &GrayImage, roi: &RegionOfInterest) -> Result<GrayImage> {
    roi.check(img.width, img.height)?;
    let mut pixels = Vec::with_capacity(roi.w * roi.h);
    for j in roi.y..roi.y + roi.h {
        let start = j * img.width + roi.x;
        pixels.extend_from_slice(&img.pixels[start..start + roi.w]);
    }
    Ok(GrayImage {
        width: roi.w,
        height: roi.h,
        pixels,
    })
}

pub fn crop_mask(mask: &BinaryMask, roi: &RegionOfInterest) -> Result<BinaryMask> {
    roi.check(mask.width, mask.height)?;
    let mut bits = Vec::with_capacity(roi.w * roi.h);
    for j in roi.y..roi.y + roi.h {
        let start = j * mask.width + roi.x;
        bits.extend_from_slice(&mask.bits[start..start + roi.w]);
    }
    Ok(BinaryMask {
        width: roi.w,
        height: roi.h,
        bits,
    })
}

/// Mean intensity of each label, in label order.
pub fn label_means(labels: &LabelMap, img: &GrayImage) -> Result<Vec<f64>> {
    if labels.dims() != img.dims() {
        return Err(Error::shape(labels.dims(), img.dims()));
    }
    let mut sums = vec![0.0; labels.k];
    let mut counts = vec![0usize; labels.k];
    for (&l, &v) in labels.labels.iter().zip(&img.pixels) {
        sums[l] += v;
        counts[l] += 1;
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect())
}

/// The lesion is the brightest cluster: foreground is every pixel whose label
/// has the highest mean intensity, with ties going to the lower label.
pub fn select_lesion_cluster(labels: &LabelMap, img: &GrayImage) -> Result<BinaryMask> {
    let means = label_means(labels, img)?;
    let mut best = 0;
    for (l, &m) in means.iter().enumerate().skip(1) {
        if m > means[best] {
            best = l;
        }
    }
    Ok(labels.mask_of(best))
}
