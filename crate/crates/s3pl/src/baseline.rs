//! A non-spatial signal-to-noise picker on the mean spectrum, used as the
//! comparison baseline.

use crate::data::{tic_normalize, MsiDataset};
use crate::error::{Error, Result};
use crate::pick::{PeakEntry, PeakList};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnConfig {
    /// Bins on each side used for the local noise estimate.
    pub half_window: usize,
    pub snr_threshold: f64,
}

impl Default for SnConfig {
    fn default() -> Self {
        SnConfig {
            half_window: 10,
            snr_threshold: 3.0,
        }
    }
}

impl SnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.half_window == 0 {
            return Err(Error::Config("half_window must be at least 1".into()));
        }
        if !(self.snr_threshold.is_finite() && self.snr_threshold > 0.0) {
            return Err(Error::Config(format!(
                "snr_threshold must be positive, got {}",
                self.snr_threshold
            )));
        }
        Ok(())
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median absolute deviation of a window.
fn mad(window: &[f64]) -> f64 {
    let mut w = window.to_vec();
    let m = median(&mut w);
    let mut dev: Vec<f64> = window.iter().map(|v| (v - m).abs()).collect();
    median(&mut dev)
}

/// Strictly above the left neighbor and not below the right one; at the
/// edges the single neighbor must be strictly lower.
fn is_local_max(s: &[f64], i: usize) -> bool {
    let n = s.len();
    match (
        i.checked_sub(1).map(|l| s[l]),
        (i + 1 < n).then(|| s[i + 1]),
    ) {
        (Some(l), Some(r)) => s[i] > l && s[i] >= r,
        (None, Some(r)) => s[i] > r,
        (Some(l), None) => s[i] > l,
        (None, None) => false,
    }
}

/// Bins of the TIC-normalized mean spectrum that are local maxima with
/// intensity at least `snr_threshold` times the local MAD, strongest first.
pub fn sn_candidates(dataset: &MsiDataset, cfg: &SnConfig) -> Result<Vec<(usize, f64)>> {
    cfg.validate()?;
    let mean = tic_normalize(dataset).mean_spectrum();
    let c = mean.len();
    let mut candidates: Vec<(usize, f64)> = (0..c)
        .filter(|&i| is_local_max(&mean, i))
        .filter(|&i| {
            let lo = i.saturating_sub(cfg.half_window);
            let hi = (i + cfg.half_window + 1).min(c);
            mean[i] >= cfg.snr_threshold * mad(&mean[lo..hi])
        })
        .map(|i| (i, mean[i]))
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(candidates)
}

/// Up to `n` strongest candidates; may return fewer.
pub fn sn_pick(dataset: &MsiDataset, cfg: &SnConfig, n: usize) -> Result<PeakList> {
    let mz = dataset.axis().values();
    Ok(PeakList {
        entries: sn_candidates(dataset, cfg)?
            .into_iter()
            .take(n)
            .map(|(bin, _)| PeakEntry {
                bin,
                mz: mz[bin],
                frequency: 1,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MzAxis;

    fn ds(spectra: &[Vec<f64>]) -> MsiDataset {
        let c = spectra[0].len();
        MsiDataset::from_dense(
            spectra.len(),
            1,
            MzAxis::linear(100.0, 1.0, c).unwrap(),
            spectra.concat(),
        )
        .unwrap()
    }

    #[test]
    fn flat_spectrum_has_no_peaks() {
        let list = sn_pick(
            &ds(&[vec![1.0; 20], vec![3.0; 20]]),
            &SnConfig::default(),
            5,
        )
        .unwrap();
        assert!(list.is_empty());
    }

    #[test]
    fn delta_peak_is_found() {
        for pos in [0, 7, 19] {
            let mut s = vec![0.0; 20];
            s[pos] = 5.0;
            let list = sn_pick(&ds(&[s]), &SnConfig::default(), 3).unwrap();
            assert_eq!(list.bins(), vec![pos]);
        }
    }

    #[test]
    fn strongest_first_and_capped() {
        let mut s = vec![0.1; 30];
        s[5] = 2.0;
        s[15] = 4.0;
        s[25] = 3.0;
        let list = sn_pick(&ds(&[s]), &SnConfig::default(), 2).unwrap();
        assert_eq!(list.bins(), vec![15, 25]);
    }

    #[test]
    fn bad_config() {
        let d = ds(&[vec![1.0; 4]]);
        let cfg = SnConfig {
            half_window: 0,
            snr_threshold: 3.0,
        };
        assert!(matches!(sn_pick(&d, &cfg, 1), Err(Error::Config(_))));
        let cfg = SnConfig {
            half_window: 2,
            snr_threshold: 0.0,
        };
        assert!(matches!(sn_pick(&d, &cfg, 1), Err(Error::Config(_))));
    }

    #[test]
    fn plateau_reports_left_edge() {
        let mut s = vec![0.0; 10];
        s[4] = 1.0;
        s[5] = 1.0;
        assert_eq!(
            sn_pick(&ds(&[s]), &SnConfig::default(), 5).unwrap().bins(),
            vec![4]
        );
    }
}
