//! Flat grayscale morphology with square structuring elements.
//!
//! Neighborhoods are clipped at the image border rather than padded, so
//! border pixels only see the pixels that exist.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::par;

/// Square structuring element of side `2 * radius + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuringElement {
    radius: usize,
}

impl StructuringElement {
    pub fn square(radius: usize) -> Result<Self> {
        if radius < 1 {
            return Err(Error::Config(
                "structuring element radius must be >= 1".into(),
            ));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }
}

impl Default for StructuringElement {
    fn default() -> Self {
        Self { radius: 1 }
    }
}

/// Running extremum along rows then columns. A clipped square window is the
/// product of two clipped intervals, so the two passes compose exactly.
fn separable(img: &GrayImage, r: usize, pick: fn(f64, f64) -> f64) -> Vec<f64> {
    let (w, h) = img.dims();
    let src = img.pixels();
    let mut rows = vec![0.0; w * h];
    par::for_each_chunk_mut(&mut rows, w, |j, out| {
        let line = &src[j * w..(j + 1) * w];
        for (i, o) in out.iter_mut().enumerate() {
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(w - 1);
            *o = line[lo..=hi]
                .iter()
                .copied()
                .reduce(pick)
                .expect("non-empty window");
        }
    });
    let mut out = vec![0.0; w * h];
    par::for_each_chunk_mut(&mut out, w, |j, line| {
        let lo = j.saturating_sub(r);
        let hi = (j + r).min(h - 1);
        for (i, o) in line.iter_mut().enumerate() {
            *o = (lo..=hi)
                .map(|y| rows[y * w + i])
                .reduce(pick)
                .expect("non-empty window");
        }
    });
    out
}

pub fn dilate(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    let px = separable(img, se.radius, f64::max);
    GrayImage::new(img.width(), img.height(), px).expect("same shape")
}

pub fn erode(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    let px = separable(img, se.radius, f64::min);
    GrayImage::new(img.width(), img.height(), px).expect("same shape")
}

/// Dilation minus erosion.
pub fn morphological_gradient(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    let hi = separable(img, se.radius, f64::max);
    let lo = separable(img, se.radius, f64::min);
    let px = hi.iter().zip(&lo).map(|(a, b)| a - b).collect();
    GrayImage::new(img.width(), img.height(), px).expect("same shape")
}
