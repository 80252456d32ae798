//! One-dimensional Gaussian mixture segmentation fitted by
//! expectation-maximization.
//!
//! Pixels are clustered on scalar intensity. Each component has its own mean,
//! variance and mixing weight; variances never drop below
//! [`VARIANCE_FLOOR`]. EM starts from a k-means partition, so fits are
//! deterministic.

use std::f64::consts::PI;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{GrayImage, LabelMap};
use crate::kmeans::{kmeans_cluster, KmeansConfig};
use crate::par;

/// Smallest admissible component variance, in normalized intensity units squared.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Components whose total responsibility falls below this are re-seeded.
pub const COLLAPSE_MASS: f64 = 1e-12;

const ROWS_PER_TASK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GmmParams {
    pub fn new(means: Vec<f64>, variances: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let p = Self {
            means,
            variances,
            weights,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn k(&self) -> usize {
        self.means.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.means.len();
        if k == 0 || self.variances.len() != k || self.weights.len() != k {
            return Err(Error::Config(format!(
                "mixture needs matching non-empty parameter lists, got {}/{}/{}",
                k,
                self.variances.len(),
                self.weights.len()
            )));
        }
        if self.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("mixture means must be finite".into()));
        }
        if self
            .variances
            .iter()
            .any(|&v| v.is_nan() || v < VARIANCE_FLOOR || !v.is_finite())
        {
            return Err(Error::Config(format!(
                "mixture variances must be finite and >= {VARIANCE_FLOOR}"
            )));
        }
        let total: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|&w| w.is_nan() || w < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "mixture weights must be non-negative and sum to 1 (sum = {total})"
            )));
        }
        Ok(())
    }
}

/// Row-major `N x k` responsibilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors {
    k: usize,
    data: Vec<f64>,
}

impl Posteriors {
    pub fn new(k: usize, data: Vec<f64>) -> Result<Self> {
        if k == 0 || !data.len().is_multiple_of(k) {
            return Err(Error::Config(format!(
                "{} responsibilities do not form rows of {k}",
                data.len()
            )));
        }
        for (i, row) in data.chunks(k).enumerate() {
            let s: f64 = row.iter().sum();
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "responsibility row {i} is not stochastic"
                )));
            }
        }
        Ok(Self { k, data })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Per-pixel most probable component, ties to the lower index.
    pub fn argmax(&self) -> Vec<usize> {
        self.data
            .chunks(self.k)
            .map(|row| {
                let mut best = 0;
                for (j, &p) in row.iter().enumerate().skip(1) {
                    if p > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}

/// How the M-step estimates variances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMode {
    /// One variance per component.
    #[default]
    PerComponent,
    /// A single variance shared by all components, pooled over every
    /// pixel/component pair.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Relative log-likelihood change that ends the iteration.
    pub tol: f64,
    /// Only consulted when a collapsed component has to be re-seeded and
    /// several pixels are equally good candidates.
    pub seed: u64,
    pub variance_mode: VarianceMode,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            k: 2,
            max_iter: 200,
            tol: 1e-7,
            seed: 0,
            variance_mode: VarianceMode::PerComponent,
        }
    }
}

impl GmmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("mixture needs k >= 1".into()));
        }
        if self.max_iter < 1 {
            return Err(Error::Config("mixture needs max_iter >= 1".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::Config(format!(
                "mixture tolerance {} must be >= 0",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmResult {
    /// Argmax-responsibility labels. Components that win no pixel are
    /// dropped and the remaining ones renumbered in order.
    pub labels: LabelMap,
    /// Component index behind each label of `labels`.
    pub components: Vec<usize>,
    pub params: GmmParams,
    /// Log-likelihood of the initial parameters followed by one value per
    /// EM iteration.
    pub ll_trace: Vec<f64>,
}

pub fn gaussian_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (2.0 * PI * var).powf(-0.5) * (-(x - mean).powi(2) / (2.0 * var)).exp()
}

#[inline]
fn log_gaussian(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - (x - mean).powi(2) / (2.0 * var)
}

/// `ln(weight) + ln N(x)` for every component, written into `out`.
#[inline]
fn log_joint(x: f64, params: &GmmParams, out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        *o = params.weights[j].ln() + log_gaussian(x, params.means[j], params.variances[j]);
    }
}

#[inline]
fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|a| (a - m).exp()).sum::<f64>().ln()
}

pub fn e_step(img: &GrayImage, params: &GmmParams) -> Result<Posteriors> {
    params.validate()?;
    let k = params.k();
    let x = img.pixels();
    let mut data = vec![0.0; x.len() * k];
    par::for_each_chunk_mut(&mut data, ROWS_PER_TASK * k, |block, chunk| {
        let base = block * ROWS_PER_TASK;
        for (r, row) in chunk.chunks_mut(k).enumerate() {
            log_joint(x[base + r], params, row);
            let norm = log_sum_exp(row);
            for p in row.iter_mut() {
                *p = (*p - norm).exp();
            }
        }
    });
    Ok(Posteriors { k, data })
}

pub fn m_step(img: &GrayImage, post: &Posteriors) -> Result<GmmParams> {
    m_step_with(img, post, VarianceMode::PerComponent, 0)
}

pub fn m_step_with(
    img: &GrayImage,
    post: &Posteriors,
    mode: VarianceMode,
    seed: u64,
) -> Result<GmmParams> {
    let x = img.pixels();
    if post.n() != x.len() {
        return Err(Error::Config(format!(
            "{} responsibility rows for {} pixels",
            post.n(),
            x.len()
        )));
    }
    let k = post.k;
    let n = x.len() as f64;

    let mut mass = vec![0.0; k];
    let mut weighted = vec![0.0; k];
    for (i, &v) in x.iter().enumerate() {
        for (j, &p) in post.row(i).iter().enumerate() {
            mass[j] += p;
            weighted[j] += p * v;
        }
    }
    let means: Vec<f64> = weighted.iter().zip(&mass).map(|(s, m)| s / m).collect();

    let mut spread = vec![0.0; k];
    for (i, &v) in x.iter().enumerate() {
        for (j, &p) in post.row(i).iter().enumerate() {
            spread[j] += p * (v - means[j]).powi(2);
        }
    }
    let mut variances: Vec<f64> = match mode {
        VarianceMode::PerComponent => spread
            .iter()
            .zip(&mass)
            .map(|(s, m)| (s / m).max(VARIANCE_FLOOR))
            .collect(),
        VarianceMode::Pooled => {
            let pooled =
                (spread.iter().sum::<f64>() / mass.iter().sum::<f64>()).max(VARIANCE_FLOOR);
            vec![pooled; k]
        }
    };
    let mut means = means;
    let mut weights: Vec<f64> = mass.iter().map(|m| m / n).collect();

    let collapsed: Vec<usize> = (0..k)
        .filter(|&j| mass[j].is_nan() || mass[j] < COLLAPSE_MASS)
        .collect();
    if !collapsed.is_empty() {
        reseed_collapsed(
            x,
            &collapsed,
            &mut means,
            &mut variances,
            &mut weights,
            seed,
        );
    }
    GmmParams::new(means, variances, weights)
}

/// Move each collapsed component onto the pixel worst explained by the
/// surviving components (largest minimum standardized distance), with a
/// floor variance and a one-pixel weight. Equally bad candidates are
/// resolved by a seeded draw.
fn reseed_collapsed(
    x: &[f64],
    collapsed: &[usize],
    means: &mut [f64],
    variances: &mut [f64],
    weights: &mut [f64],
    seed: u64,
) {
    let n = x.len() as f64;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut alive: Vec<usize> = (0..means.len())
        .filter(|j| !collapsed.contains(j))
        .collect();
    for &c in collapsed {
        let score = |v: f64| {
            alive
                .iter()
                .map(|&j| (v - means[j]).powi(2) / variances[j])
                .fold(f64::INFINITY, f64::min)
        };
        let scores: Vec<f64> = x.iter().map(|&v| score(v)).collect();
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<usize> = (0..x.len()).filter(|&i| scores[i] == top).collect();
        let pick = ties[(rng.next_u64() % ties.len() as u64) as usize];
        means[c] = x[pick];
        variances[c] = VARIANCE_FLOOR;
        weights[c] = 1.0 / n;
        alive.push(c);
    }
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
}

/// Sum over pixels of the log mixture density.
pub fn log_likelihood(img: &GrayImage, params: &GmmParams) -> Result<f64> {
    params.validate()?;
    let k = params.k();
    let per_pixel = par::map_slice(img.pixels(), |&v| {
        let mut buf = vec![0.0; k];
        log_joint(v, params, &mut buf);
        log_sum_exp(&buf)
    });
    Ok(per_pixel.iter().sum())
}

/// Parameters implied by a hard partition: per-cluster mean, floored
/// variance, and pixel fraction. Pooled mode starts from the shared
/// within-cluster variance so the first EM step stays in the same model.
fn params_from_partition(
    x: &[f64],
    labels: &[usize],
    k: usize,
    mode: VarianceMode,
) -> Result<GmmParams> {
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&v, &l) in x.iter().zip(labels) {
        sums[l] += v;
        counts[l] += 1;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let mut spread = vec![0.0; k];
    for (&v, &l) in x.iter().zip(labels) {
        spread[l] += (v - means[l]).powi(2);
    }
    let variances = match mode {
        VarianceMode::PerComponent => spread
            .iter()
            .zip(&counts)
            .map(|(s, &c)| (s / c as f64).max(VARIANCE_FLOOR))
            .collect(),
        VarianceMode::Pooled => {
            vec![(spread.iter().sum::<f64>() / x.len() as f64).max(VARIANCE_FLOOR); k]
        }
    };
    let weights = counts.iter().map(|&c| c as f64 / x.len() as f64).collect();
    GmmParams::new(means, variances, weights)
}

pub fn gmm_segment(img: &GrayImage, cfg: &GmmConfig) -> Result<GmmResult> {
    cfg.validate()?;
    let km = kmeans_cluster(
        img,
        &KmeansConfig {
            k: cfg.k,
            ..KmeansConfig::default()
        },
    )?;
    let mut params =
        params_from_partition(img.pixels(), km.labels.labels(), cfg.k, cfg.variance_mode)?;
    let mut ll = log_likelihood(img, &params)?;
    let mut trace = vec![ll];
    for _ in 0..cfg.max_iter {
        let post = e_step(img, &params)?;
        params = m_step_with(img, &post, cfg.variance_mode, cfg.seed)?;
        let next = log_likelihood(img, &params)?;
        trace.push(next);
        let done = (next - ll).abs() <= cfg.tol * next.abs();
        ll = next;
        if done {
            break;
        }
    }
    let raw = e_step(img, &params)?.argmax();
    let (labels, components) = LabelMap::compacted(img.width(), img.height(), &raw)?;
    Ok(GmmResult {
        labels,
        components,
        params,
        ll_trace: trace,
    })
}
