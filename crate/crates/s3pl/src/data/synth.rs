//! Synthetic profile MSI data with planted ground truth.
//!
//! The grid is split into three disjoint regions that tile it: a central
//! disk and the two triangles left over on either side of the anti-diagonal.
//! Every planted peak is a Gaussian along m/z. A structured peak is bright
//! inside one region and absent elsewhere. An unstructured peak draws its
//! per-pixel amplitudes from the same kind of field, then scatters them over
//! the grid with a random permutation, so both kinds share one marginal
//! intensity distribution and differ only in spatial arrangement.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MaskClass, MsiDataset, MzAxis, SegmentationMask, SyntheticGroundTruth};
use crate::error::{Error, Result};

/// Gaussian width of planted peaks in bins; the full width at a tenth of
/// the maximum is about 3.2 bins.
pub const PEAK_SIGMA: f64 = 0.75;
const PEAK_HALF_SUPPORT: usize = 3;
const N_REGIONS: usize = 3;
const AXIS_START: f64 = 400.0;
const AXIS_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub c: usize,
    pub n_structured: usize,
    pub n_unstructured: usize,
    /// Background noise amplitude relative to the mean peak amplitude.
    pub noise_level: f64,
    pub seed: u64,
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(Error::Config(format!(
                "synthetic grid must be at least 8x8, got {}x{}",
                self.width, self.height
            )));
        }
        if self.c < 8 {
            return Err(Error::Config(format!(
                "need at least 8 bins, got {}",
                self.c
            )));
        }
        if self.n_structured + self.n_unstructured > self.c / 4 {
            return Err(Error::Config(format!(
                "{} planted peaks do not fit into {} bins (at most c/4 = {})",
                self.n_structured + self.n_unstructured,
                self.c,
                self.c / 4
            )));
        }
        if !(self.noise_level.is_finite() && self.noise_level >= 0.0) {
            return Err(Error::Config(format!(
                "noise level must be finite and non-negative, got {}",
                self.noise_level
            )));
        }
        Ok(())
    }
}

/// Region label per pixel, row-major.
fn region_labels(width: usize, height: usize) -> Vec<usize> {
    let (w, h) = (width as f64, height as f64);
    let radius = 0.3 * w.min(h);
    (0..width * height)
        .map(|i| {
            let x = (i % width) as f64 + 0.5;
            let y = (i / width) as f64 + 0.5;
            let (dx, dy) = (x - 0.5 * w, y - 0.5 * h);
            if dx * dx + dy * dy <= radius * radius {
                0
            } else if x / w + y / h < 1.0 {
                1
            } else {
                2
            }
        })
        .collect()
}

pub fn generate_synthetic(
    cfg: &SynthConfig,
) -> Result<(MsiDataset, SegmentationMask, SyntheticGroundTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_pixels = cfg.width * cfg.height;
    let c = cfg.c;
    let labels = region_labels(cfg.width, cfg.height);

    let n_peaks = cfg.n_structured + cfg.n_unstructured;
    let margin = 2usize;
    let slot = (c - 2 * margin) as f64 / n_peaks.max(1) as f64;
    let centers: Vec<usize> = (0..n_peaks)
        .map(|i| margin + ((i as f64 + 0.5) * slot) as usize)
        .collect();
    let mut kinds: Vec<bool> = (0..n_peaks).map(|i| i < cfg.n_structured).collect();
    kinds.shuffle(&mut rng);

    let profile: Vec<f64> = (0..=2 * PEAK_HALF_SUPPORT)
        .map(|j| {
            let d = j as f64 - PEAK_HALF_SUPPORT as f64;
            (-d * d / (2.0 * PEAK_SIGMA * PEAK_SIGMA)).exp()
        })
        .collect();

    let mut cube = vec![0.0; n_pixels * c];
    let mut structured_bins = Vec::new();
    let mut unstructured_bins = Vec::new();
    for (&center, &structured) in centers.iter().zip(&kinds) {
        let ordinal = if structured {
            structured_bins.len()
        } else {
            unstructured_bins.len()
        };
        let region = ordinal % N_REGIONS;
        let amplitude = rng.random_range(0.5..1.5);
        let mut field: Vec<f64> = labels
            .iter()
            .map(|&l| {
                let jitter = 0.8 + 0.4 * rng.random::<f64>();
                if l == region {
                    amplitude * jitter
                } else {
                    0.0
                }
            })
            .collect();
        if structured {
            structured_bins.push(center);
        } else {
            field.shuffle(&mut rng);
            unstructured_bins.push(center);
        }
        for (p, a) in field.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            let spectrum = &mut cube[p * c..(p + 1) * c];
            for (j, g) in profile.iter().enumerate() {
                let k = center + j;
                if k >= PEAK_HALF_SUPPORT && k - PEAK_HALF_SUPPORT < c {
                    spectrum[k - PEAK_HALF_SUPPORT] += a * g;
                }
            }
        }
    }
    for v in cube.iter_mut() {
        *v += cfg.noise_level * rng.random::<f64>();
    }

    let axis = MzAxis::linear(AXIS_START, AXIS_STEP, c)?;
    let dataset = MsiDataset::from_dense(cfg.width, cfg.height, axis, cube)?;
    let classes = (0..N_REGIONS)
        .map(|r| MaskClass {
            name: format!("class_{r}"),
            pixels: labels.iter().map(|&l| l == r).collect(),
        })
        .collect();
    let mask = SegmentationMask::new(cfg.width, cfg.height, classes)?;
    structured_bins.sort_unstable();
    unstructured_bins.sort_unstable();
    Ok((
        dataset,
        mask,
        SyntheticGroundTruth {
            structured_bins,
            unstructured_bins,
        },
    ))
}
