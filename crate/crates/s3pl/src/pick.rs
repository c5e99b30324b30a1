//! Peak picking from the frozen attention encoder.
//!
//! Every occupied-pixel patch votes for the `z` bins with the highest
//! attention. The `n` bins with the most votes form the peak list. Ties are
//! broken by ascending bin index both when selecting the top `z` of a mask
//! and when ranking the votes.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::data::{minmax_rescale, MsiDataset};
use crate::error::{Error, Result};
use crate::model::{patch_for_row, S3plModel};

/// Vote counts per m/z bin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeakSelection {
    pub counts: Vec<u64>,
    pub patches: usize,
}

impl PeakSelection {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakEntry {
    pub bin: usize,
    pub mz: f64,
    pub frequency: u64,
}

/// Selected peaks, most frequent first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakList {
    pub entries: Vec<PeakEntry>,
}

impl PeakList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn bins(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.bin).collect()
    }

    pub fn mz_values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.mz).collect()
    }

    pub fn frequencies(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.frequency).collect()
    }

    /// CSV text with header `bin_index,mz,frequency`, rows in list order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(PEAK_CSV_HEADER);
        out.push('\n');
        for e in &self.entries {
            writeln!(out, "{},{},{}", e.bin, e.mz, e.frequency).unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == PEAK_CSV_HEADER => {}
            other => {
                return Err(Error::InvalidData(format!(
                    "peak CSV header must be '{PEAK_CSV_HEADER}', got {other:?}"
                )))
            }
        }
        let mut entries = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::InvalidData(format!("peak CSV row {}: '{line}'", i + 2));
            let mut cols = line.split(',').map(str::trim);
            let bin = cols.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let mz = cols.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let frequency = cols.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            if cols.next().is_some() {
                return Err(bad());
            }
            entries.push(PeakEntry { bin, mz, frequency });
        }
        Ok(PeakList { entries })
    }
}

pub const PEAK_CSV_HEADER: &str = "bin_index,mz,frequency";

pub fn export_peaks(list: &PeakList, path: &Path) -> Result<()> {
    std::fs::write(path, list.to_csv()).map_err(|e| Error::io(path, e))
}

pub fn read_peaks(path: &Path) -> Result<PeakList> {
    PeakList::from_csv(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Descending by value, ascending by index on ties.
fn rank_desc<T: PartialOrd>(values: &[T]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    }
}

/// Indices of the `k` largest values, ties to the lower index, in rank order.
pub fn top_k<T: PartialOrd>(values: &[T], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let cmp = rank_desc(values);
    let k = k.min(values.len());
    if k > 0 && k < idx.len() {
        idx.select_nth_unstable_by(k - 1, &cmp);
    }
    idx.truncate(k);
    idx.sort_unstable_by(&cmp);
    idx
}

/// Counts, per bin, how many patches rank it among their top `z` attention values.
///
/// Intensities are min-max scaled into `[0, 1]` first, as in training.
pub fn peak_selection(model: &S3plModel, dataset: &MsiDataset, z: usize) -> Result<PeakSelection> {
    model.check_compatible(dataset)?;
    let dataset = &minmax_rescale(dataset);
    let c = dataset.n_bins();
    if z == 0 || z > c {
        return Err(Error::Config(format!("z must lie in 1..={c}, got {z}")));
    }
    let p = model.patch_size();
    let counts = (0..dataset.n_spectra())
        .into_par_iter()
        .try_fold(
            || vec![0u64; c],
            |mut counts, row| {
                let patch = patch_for_row(dataset, row, p)?;
                let mask = model.attention_mask(&patch)?;
                for bin in top_k(mask.data(), z) {
                    counts[bin] += 1;
                }
                Ok::<_, Error>(counts)
            },
        )
        .try_reduce(
            || vec![0u64; c],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(PeakSelection {
        counts,
        patches: dataset.n_spectra(),
    })
}

/// The `n` most frequent bins of a selection.
pub fn most_frequent(selection: &PeakSelection, dataset: &MsiDataset, n: usize) -> PeakList {
    let mz = dataset.axis().values();
    PeakList {
        entries: top_k(&selection.counts, n)
            .into_iter()
            .map(|bin| PeakEntry {
                bin,
                mz: mz[bin],
                frequency: selection.counts[bin],
            })
            .collect(),
    }
}

/// Picks `n` peaks by voting the top `z` attention values of every patch.
pub fn pick_peaks(model: &S3plModel, dataset: &MsiDataset, z: usize, n: usize) -> Result<PeakList> {
    let c = dataset.n_bins();
    if n == 0 || n > c {
        return Err(Error::Config(format!("n must lie in 1..={c}, got {n}")));
    }
    let selection = peak_selection(model, dataset, z)?;
    Ok(most_frequent(&selection, dataset, n))
}
