//! Overlap and boundary-distance metrics between a predicted and a
//! ground-truth mask, and corpus-level aggregation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, PixelSpacing};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn same_shape(a: &BinaryMask, b: &BinaryMask) -> Result<()> {
    if a.dims() == b.dims() {
        Ok(())
    } else {
        Err(Error::shape(a.dims(), b.dims()))
    }
}

pub fn confusion(pred: &BinaryMask, truth: &BinaryMask) -> Result<ConfusionCounts> {
    same_shape(pred, truth)?;
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.bits().iter().zip(truth.bits()) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// `2tp / (2tp + fp + fn)`; two empty masks agree perfectly (1.0).
pub fn dice(pred: &BinaryMask, truth: &BinaryMask) -> Result<f64> {
    let c = confusion(pred, truth)?;
    let denom = 2 * c.tp + c.fp + c.fn_;
    Ok(if denom == 0 {
        1.0
    } else {
        (2 * c.tp) as f64 / denom as f64
    })
}

/// `tp / (tp + fp + fn)`; two empty masks give 1.0.
pub fn jaccard(pred: &BinaryMask, truth: &BinaryMask) -> Result<f64> {
    let c = confusion(pred, truth)?;
    let denom = c.tp + c.fp + c.fn_;
    Ok(if denom == 0 {
        1.0
    } else {
        c.tp as f64 / denom as f64
    })
}

/// `(tp / (tp + fp), tp / (tp + fn))`. Precision needs a non-empty
/// prediction and recall a non-empty truth.
pub fn precision_recall(pred: &BinaryMask, truth: &BinaryMask) -> Result<(f64, f64)> {
    let c = confusion(pred, truth)?;
    if c.tp + c.fp == 0 {
        return Err(Error::UndefinedMetric("precision"));
    }
    if c.tp + c.fn_ == 0 {
        return Err(Error::UndefinedMetric("recall"));
    }
    Ok((
        c.tp as f64 / (c.tp + c.fp) as f64,
        c.tp as f64 / (c.tp + c.fn_) as f64,
    ))
}

/// Largest distance from a point of `from` to its nearest point of `to`.
fn directed(from: &[(f64, f64)], to: &[(f64, f64)]) -> f64 {
    let nearest = par::map_slice(from, |&(ax, ay)| {
        to.iter()
            .map(|&(bx, by)| (ax - bx).powi(2) + (ay - by).powi(2))
            .fold(f64::INFINITY, f64::min)
    });
    nearest.into_iter().fold(0.0, f64::max).sqrt()
}

/// Symmetric Hausdorff distance between the mask boundaries, in millimeters.
pub fn hausdorff(pred: &BinaryMask, truth: &BinaryMask, spacing: &PixelSpacing) -> Result<f64> {
    same_shape(pred, truth)?;
    if pred.is_blank() || truth.is_blank() {
        return Err(Error::UndefinedMetric("Hausdorff distance"));
    }
    let scale = |pts: Vec<(usize, usize)>| -> Vec<(f64, f64)> {
        pts.into_iter()
            .map(|(i, j)| (i as f64 * spacing.dx, j as f64 * spacing.dy))
            .collect()
    };
    let a = scale(pred.boundary());
    let b = scale(truth.boundary());
    let (ab, ba) = (directed(&a, &b), directed(&b, &a));
    Ok(ab.max(ba))
}

/// The five metrics for one case; `None` marks an undefined value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub dsc: f64,
    pub ji: f64,
    pub hd: Option<f64>,
    pub pr: Option<f64>,
    pub re: Option<f64>,
}

impl CaseMetrics {
    pub fn as_array(&self) -> [Option<f64>; 5] {
        [Some(self.dsc), Some(self.ji), self.hd, self.pr, self.re]
    }
}

pub fn evaluate(
    pred: &BinaryMask,
    truth: &BinaryMask,
    spacing: &PixelSpacing,
) -> Result<CaseMetrics> {
    let c = confusion(pred, truth)?;
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let hd = match hausdorff(pred, truth, spacing) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(CaseMetrics {
        dsc: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_).unwrap_or(1.0),
        ji: ratio(c.tp, c.tp + c.fp + c.fn_).unwrap_or(1.0),
        hd,
        pr: ratio(c.tp, c.tp + c.fp),
        re: ratio(c.tp, c.tp + c.fn_),
    })
}

pub const METRIC_NAMES: [&str; 5] = ["dsc", "ji", "hd_mm", "pr", "re"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub n: usize,
    /// Cases where the metric was undefined and left out.
    pub excluded: usize,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}±{:.3}", self.mean, self.std)
    }
}

/// Mean and population standard deviation of the defined values. `None`
/// when no value is defined.
pub fn summarize(values: &[Option<f64>]) -> Option<Summary> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        return None;
    }
    let n = defined.len() as f64;
    let mean = defined.iter().sum::<f64>() / n;
    let var = defined.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(Summary {
        mean,
        std: var.sqrt(),
        n: defined.len(),
        excluded: values.len() - defined.len(),
    })
}

/// Per-case rows plus per-metric summaries, in the order of [`METRIC_NAMES`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_case: Vec<(String, CaseMetrics)>,
    pub summary: [Option<Summary>; 5],
}

pub fn aggregate(cases: Vec<(String, CaseMetrics)>) -> Result<MetricReport> {
    if cases.is_empty() {
        return Err(Error::Config("cannot aggregate an empty case list".into()));
    }
    let summary = std::array::from_fn(|m| {
        let col: Vec<Option<f64>> = cases.iter().map(|(_, c)| c.as_array()[m]).collect();
        summarize(&col)
    });
    Ok(MetricReport {
        per_case: cases,
        summary,
    })
}
