//! Lloyd's k-means on scalar pixel intensities with deterministic
//! farthest-point initialization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{GrayImage, LabelMap};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmeansConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once no centroid moves by more than this.
    pub tol: f64,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        Self {
            k: 2,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

impl KmeansConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k-means needs k >= 1".into()));
        }
        if self.max_iter < 1 {
            return Err(Error::Config("k-means needs max_iter >= 1".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::Config(format!(
                "k-means tolerance {} must be >= 0",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult {
    pub labels: LabelMap,
    pub centroids: Vec<f64>,
    /// Sum of squared distances to the assigned centroid, recorded after
    /// every assignment step.
    pub objective_trace: Vec<f64>,
}

fn distinct_values(img: &GrayImage) -> Vec<f64> {
    let mut v = img.pixels().to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Greedy max-min initialization.
///
/// The first two centroids are the pair of intensities furthest apart (the
/// extremes); each further pick maximizes its distance to the nearest chosen
/// centroid. Ties go to the smaller intensity. With `k == 1` the smallest
/// intensity is returned.
pub fn init_centroids_farthest(img: &GrayImage, k: usize) -> Result<Vec<f64>> {
    if k < 1 {
        return Err(Error::Config("k-means needs k >= 1".into()));
    }
    let distinct = distinct_values(img);
    if distinct.len() < k {
        return Err(Error::Degenerate(format!(
            "{k} clusters requested but the image has only {} distinct intensities",
            distinct.len()
        )));
    }
    let mut chosen = vec![distinct[0]];
    if k == 1 {
        return Ok(chosen);
    }
    chosen.push(distinct[distinct.len() - 1]);
    // nearest-chosen distance per candidate, updated incrementally
    let mut gap: Vec<f64> = distinct
        .iter()
        .map(|&v| (v - chosen[0]).abs().min((v - chosen[1]).abs()))
        .collect();
    while chosen.len() < k {
        let mut best = 0;
        for (i, &g) in gap.iter().enumerate() {
            if g > gap[best] {
                best = i;
            }
        }
        let pick = distinct[best];
        chosen.push(pick);
        for (g, &v) in gap.iter_mut().zip(&distinct) {
            *g = g.min((v - pick).abs());
        }
    }
    Ok(chosen)
}

#[inline]
fn nearest(centroids: &[f64], v: f64) -> usize {
    let mut best = 0;
    let mut best_d = (v - centroids[0]).powi(2);
    for (j, &c) in centroids.iter().enumerate().skip(1) {
        let d = (v - c).powi(2);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

/// Give every empty cluster the pixel farthest from its current centroid.
fn reseed_empty(x: &[f64], labels: &mut [usize], centroids: &mut [f64]) {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (p, (&v, &l)) in x.iter().zip(labels.iter()).enumerate() {
            if counts[l] < 2 {
                continue;
            }
            let d = (v - centroids[l]).powi(2);
            if far.is_none_or(|(_, fd)| d > fd) {
                far = Some((p, d));
            }
        }
        // callers guarantee at least k distinct intensities, so a donor exists
        let (p, _) = far.expect("a pixel away from its centroid");
        counts[labels[p]] -= 1;
        counts[j] = 1;
        labels[p] = j;
        centroids[j] = x[p];
    }
}

fn objective(x: &[f64], labels: &[usize], centroids: &[f64]) -> f64 {
    x.iter()
        .zip(labels)
        .map(|(&v, &l)| (v - centroids[l]).powi(2))
        .sum()
}

fn cluster_means(x: &[f64], labels: &[usize], k: usize) -> Vec<f64> {
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&v, &l) in x.iter().zip(labels) {
        sums[l] += v;
        counts[l] += 1;
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect()
}

pub fn kmeans_cluster(img: &GrayImage, cfg: &KmeansConfig) -> Result<KmeansResult> {
    cfg.validate()?;
    let init = init_centroids_farthest(img, cfg.k)?;
    kmeans_from_centroids(img, init, cfg)
}

/// Run Lloyd iterations from the given starting centroids.
pub fn kmeans_from_centroids(
    img: &GrayImage,
    mut centroids: Vec<f64>,
    cfg: &KmeansConfig,
) -> Result<KmeansResult> {
    cfg.validate()?;
    if centroids.len() != cfg.k {
        return Err(Error::Config(format!(
            "{} starting centroids for k = {}",
            centroids.len(),
            cfg.k
        )));
    }
    let distinct = distinct_values(img).len();
    if distinct < cfg.k {
        return Err(Error::Degenerate(format!(
            "{} clusters requested but the image has only {distinct} distinct intensities",
            cfg.k
        )));
    }
    let x = img.pixels();
    let mut trace = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..cfg.max_iter {
        labels = par::map_slice(x, |&v| nearest(&centroids, v));
        reseed_empty(x, &mut labels, &mut centroids);
        trace.push(objective(x, &labels, &centroids));
        let updated = cluster_means(x, &labels, cfg.k);
        let moved = updated
            .iter()
            .zip(&centroids)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        centroids = updated;
        if moved <= cfg.tol {
            break;
        }
    }
    let labels = LabelMap::new(img.width(), img.height(), labels)?;
    Ok(KmeansResult {
        labels,
        centroids,
        objective_trace: trace,
    })
}
