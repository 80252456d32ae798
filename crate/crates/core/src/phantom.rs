//! Synthetic bright-disk phantoms with exact ground truth.
//!
//! Noise comes from ChaCha20 seeded through `seed_from_u64`, converted to
//! normals with the Box-Muller transform and applied in row-major order, so
//! an image is reproducible from its spec alone.

use std::f64::consts::PI;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, GrayImage, RegionOfInterest};

/// Recorded in manifests next to the seed.
pub const NOISE_ALGORITHM: &str =
    "ChaCha20 (rand_chacha seed_from_u64, stream 0), 53-bit uniforms, Box-Muller pairs, row-major";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Disk {
    /// Pixel `(i, j)` is inside when its center `(i, j)` lies within the radius.
    pub fn contains(&self, i: usize, j: usize) -> bool {
        (i as f64 - self.cx).powi(2) + (j as f64 - self.cy).powi(2) <= self.r * self.r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub lesions: Vec<Disk>,
    pub lesion_intensity: f64,
    pub background_intensity: f64,
    /// Gaussian blur sigma in pixels applied to the clean image.
    #[serde(default)]
    pub softness: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!(
                "phantom size {}x{} is empty",
                self.width, self.height
            ));
        }
        if self.lesions.is_empty() {
            return bad("phantom needs at least one lesion".into());
        }
        let unit = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        if !unit(self.lesion_intensity) || !unit(self.background_intensity) {
            return bad("phantom intensities must lie in [0,1]".into());
        }
        if self.lesion_intensity <= self.background_intensity {
            return bad("lesions must be brighter than the background".into());
        }
        if !(self.softness >= 0.0 && self.softness.is_finite()) {
            return bad(format!("softness {} must be >= 0", self.softness));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise sigma {} must be >= 0", self.noise_sigma));
        }
        for d in &self.lesions {
            let inside = d.r > 0.0
                && d.cx - d.r >= 0.0
                && d.cy - d.r >= 0.0
                && d.cx + d.r <= (self.width - 1) as f64
                && d.cy + d.r <= (self.height - 1) as f64;
            if !inside {
                return bad(format!(
                    "disk at ({}, {}) radius {} does not fit a {}x{} image",
                    d.cx, d.cy, d.r, self.width, self.height
                ));
            }
        }
        Ok(())
    }

    /// A single-disk phantom whose geometry is drawn from `seed` (on a
    /// stream separate from the noise).
    pub fn random_lesion(
        seed: u64,
        width: usize,
        height: usize,
        noise_sigma: f64,
        softness: f64,
    ) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let short = width.min(height) as f64;
        let r = (short * 0.1).max(2.0) + unit_uniform(&mut rng) * short * 0.12;
        let place = |extent: usize, u: f64| {
            let lo = r + 1.0;
            let hi = extent as f64 - 2.0 - r;
            (lo + u * (hi - lo).max(0.0)).round()
        };
        let cx = place(width, unit_uniform(&mut rng));
        let cy = place(height, unit_uniform(&mut rng));
        Self {
            width,
            height,
            lesions: vec![Disk { cx, cy, r }],
            lesion_intensity: 0.8,
            background_intensity: 0.3,
            softness,
            noise_sigma,
            seed,
        }
    }
}

impl PhantomSpec {
    /// Rectangle around all lesions, each disk's bounding box grown by half
    /// its radius (rounded up) and clipped to the image.
    pub fn lesion_roi(&self) -> RegionOfInterest {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, 0.0f64, 0.0f64);
        for d in &self.lesions {
            let reach = d.r + (d.r / 2.0).ceil();
            x0 = x0.min(d.cx - reach);
            y0 = y0.min(d.cy - reach);
            x1 = x1.max(d.cx + reach);
            y1 = y1.max(d.cy + reach);
        }
        let clip = |v: f64, extent: usize| v.floor().clamp(0.0, (extent - 1) as f64) as usize;
        let (x0, y0) = (clip(x0, self.width), clip(y0, self.height));
        let (x1, y1) = (clip(x1.ceil(), self.width), clip(y1.ceil(), self.height));
        RegionOfInterest {
            x: x0,
            y: y0,
            w: x1 - x0 + 1,
            h: y1 - y0 + 1,
        }
    }
}

fn unit_uniform(rng: &mut ChaCha20Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normals via Box-Muller, consumed in pairs.
struct BoxMuller {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl BoxMuller {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - unit_uniform(&mut self.rng);
        let u2 = unit_uniform(&mut self.rng);
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let half = (3.0 * sigma).ceil() as isize;
    let w: Vec<f64> = (-half..=half)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable blur with edge-clamped sampling.
fn blur(px: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    let half = (k.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for j in 0..h {
        for i in 0..w {
            tmp[j * w + i] = k
                .iter()
                .enumerate()
                .map(|(t, kv)| kv * px[j * w + clamp(i as isize + t as isize - half, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for j in 0..h {
        for i in 0..w {
            out[j * w + i] = k
                .iter()
                .enumerate()
                .map(|(t, kv)| kv * tmp[clamp(j as isize + t as isize - half, h) * w + i])
                .sum();
        }
    }
    out
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<(GrayImage, BinaryMask)> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mask = BinaryMask::from_fn(w, h, |i, j| spec.lesions.iter().any(|d| d.contains(i, j)))?;
    let mut px: Vec<f64> = mask
        .bits()
        .iter()
        .map(|&b| {
            if b {
                spec.lesion_intensity
            } else {
                spec.background_intensity
            }
        })
        .collect();
    if spec.softness > 0.0 {
        px = blur(&px, w, h, spec.softness);
    }
    if spec.noise_sigma > 0.0 {
        let mut normals = BoxMuller::new(spec.seed);
        for v in px.iter_mut() {
            *v += spec.noise_sigma * normals.next();
        }
    }
    for v in px.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok((GrayImage::new(w, h, px)?, mask))
}
