//! Correlation-based evaluation of a peak list against a segmentation mask.
//!
//! A bin counts as a true peak at threshold `t` when the Pearson correlation
//! between its ion image and at least one mask class is `>= t`. Picked bins
//! are scored with F1 against those positives, and the mean F1 over the
//! thresholds 0.3, 0.4, 0.5 and 0.6 is the headline score (`mscf1`).

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{IonImage, MaskClass, MsiDataset, SegmentationMask};
use crate::error::{Error, Result};
use crate::pick::PeakList;

pub const THRESHOLDS: [f64; 4] = [0.3, 0.4, 0.5, 0.6];

/// Half-width of the accepted peak-count window around the budget.
pub const BUDGET_TOLERANCE: usize = 50;

/// Relative spread below which a vector is treated as constant.
const DEGENERATE_TOL: f64 = 1e-15;

/// Pearson correlation of two equally long vectors.
///
/// Returns exactly 0 when either side is constant, or when its standard
/// deviation after centering is below `1e-15` times its largest magnitude.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "correlating {} values with {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() || is_constant(a) || is_constant(b) {
        return Ok(0.0);
    }
    let ma = centered_mean(a);
    let mb = centered_mean(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let n = a.len() as f64;
    if (saa / n).sqrt() <= DEGENERATE_TOL * max_abs(a)
        || (sbb / n).sqrt() <= DEGENERATE_TOL * max_abs(b)
    {
        return Ok(0.0);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Mean with one correction pass over the centered residuals.
fn centered_mean(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    m + v.iter().map(|x| x - m).sum::<f64>() / n
}

/// Correlation of an ion image with one binary class over the whole grid.
pub fn pearson_cc(image: &IonImage, class: &MaskClass) -> Result<f64> {
    let mask: Vec<f64> = class
        .pixels
        .iter()
        .map(|&p| f64::from(u8::from(p)))
        .collect();
    pearson(&image.values, &mask)
}

/// Correlation of every bin's ion image with every class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PccTable {
    pub class_names: Vec<String>,
    /// `values[class][bin]`.
    pub values: Vec<Vec<f64>>,
}

impl PccTable {
    pub fn compute(dataset: &MsiDataset, mask: &SegmentationMask) -> Result<Self> {
        mask.check_matches(dataset)?;
        let classes: Vec<Vec<f64>> = mask
            .classes()
            .iter()
            .map(|c| c.pixels.iter().map(|&p| f64::from(u8::from(p))).collect())
            .collect();
        let per_bin: Vec<Vec<f64>> = (0..dataset.n_bins())
            .into_par_iter()
            .map(|bin| {
                let image = dataset.ion_image(bin)?;
                classes.iter().map(|m| pearson(&image.values, m)).collect()
            })
            .collect::<Result<_>>()?;
        let values = (0..classes.len())
            .map(|k| per_bin.iter().map(|row| row[k]).collect())
            .collect();
        Ok(PccTable {
            class_names: mask.classes().iter().map(|c| c.name.clone()).collect(),
            values,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Highest correlation of `bin` with any class.
    pub fn max_over_classes(&self, bin: usize) -> f64 {
        self.values
            .iter()
            .map(|v| v[bin])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with one row per bin: `bin_index,mz,<class>...`.
    pub fn to_csv(&self, mz: &[f64]) -> String {
        let mut out = String::from("bin_index,mz");
        for name in &self.class_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for bin in 0..self.n_bins() {
            out.push_str(&format!("{bin},{}", mz[bin]));
            for v in &self.values {
                out.push_str(&format!(",{}", v[bin]));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    pub threshold: f64,
}

fn check_threshold(t: f64) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Config(format!(
            "correlation threshold must lie in (0, 1], got {t}"
        )));
    }
    Ok(())
}

impl GroundTruth {
    /// Positive iff the best class correlation is `>= threshold`.
    pub fn from_table(table: &PccTable, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        let (positives, negatives) =
            (0..table.n_bins()).partition(|&bin| table.max_over_classes(bin) >= threshold);
        Ok(GroundTruth {
            positives,
            negatives,
            threshold,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }
}

pub fn build_ground_truth(
    dataset: &MsiDataset,
    mask: &SegmentationMask,
    threshold: f64,
) -> Result<GroundTruth> {
    check_threshold(threshold)?;
    GroundTruth::from_table(&PccTable::compute(dataset, mask)?, threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct F1Score {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub f1: f64,
}

/// `2TP / (2TP + FP + FN)`, or 0 when nothing is picked and nothing is positive.
pub fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

/// Scores a set of picked bins; duplicates count once.
pub fn f1_bins(picked: &[usize], truth: &GroundTruth) -> Result<F1Score> {
    let c = truth.n_bins();
    let mut is_picked = vec![false; c];
    for &bin in picked {
        if bin >= c {
            return Err(Error::Bounds { index: bin, len: c });
        }
        is_picked[bin] = true;
    }
    let tp = truth.positives.iter().filter(|&&b| is_picked[b]).count();
    let fp = truth.negatives.iter().filter(|&&b| is_picked[b]).count();
    let fn_ = truth.positives.len() - tp;
    Ok(F1Score {
        tp,
        fp,
        fn_,
        f1: f1_from_counts(tp, fp, fn_),
    })
}

pub fn f1(picked: &PeakList, truth: &GroundTruth) -> Result<F1Score> {
    f1_bins(&picked.bins(), truth)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdScore {
    pub t_pcc: f64,
    pub positives: usize,
    #[serde(flatten)]
    pub score: F1Score,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub thresholds: Vec<ThresholdScore>,
    pub mscf1: f64,
}

/// Arithmetic mean of F1 values.
pub fn mean_f1(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn evaluate_with_table(table: &PccTable, picked: &PeakList) -> Result<EvaluationReport> {
    let thresholds = THRESHOLDS
        .iter()
        .map(|&t| {
            let truth = GroundTruth::from_table(table, t)?;
            Ok(ThresholdScore {
                t_pcc: t,
                positives: truth.positives.len(),
                score: f1(picked, &truth)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let f1s: Vec<f64> = thresholds.iter().map(|s| s.score.f1).collect();
    Ok(EvaluationReport {
        mscf1: mean_f1(&f1s),
        thresholds,
    })
}

/// F1 at each threshold and their mean.
pub fn mscf1(
    dataset: &MsiDataset,
    mask: &SegmentationMask,
    picked: &PeakList,
) -> Result<EvaluationReport> {
    evaluate_with_table(&PccTable::compute(dataset, mask)?, picked)
}

/// Number of positive bins at `threshold`, the count a picker should aim for.
pub fn peak_budget(dataset: &MsiDataset, mask: &SegmentationMask, threshold: f64) -> Result<usize> {
    Ok(build_ground_truth(dataset, mask, threshold)?
        .positives
        .len())
}

/// Whether a picker's peak count lands within the accepted window around `budget`.
pub fn within_budget(count: usize, budget: usize) -> bool {
    count.abs_diff(budget) <= BUDGET_TOLERANCE
}
