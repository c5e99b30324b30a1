use super::{MsiDataset, MzAxis};
use crate::error::{Error, Result};

/// Divides every spectrum by its total ion count. All-zero spectra stay zero.
pub fn tic_normalize(dataset: &MsiDataset) -> MsiDataset {
    let mut spectra = dataset.intensities().to_vec();
    for s in spectra.chunks_exact_mut(dataset.n_bins()) {
        let tic: f64 = s.iter().sum();
        if tic > 0.0 {
            s.iter_mut().for_each(|v| *v /= tic);
        }
    }
    dataset
        .with_spectra(dataset.axis().clone(), spectra)
        .expect("scaling by a positive sum keeps intensities valid")
}

/// Sums intensities into the half-open bins `[edges[i], edges[i + 1])`.
/// The new axis holds the bin midpoints.
pub fn bin_to_common_axis(dataset: &MsiDataset, edges: &[f64]) -> Result<MsiDataset> {
    if edges.len() < 3 {
        return Err(Error::Config(format!(
            "need at least 3 bin edges, got {}",
            edges.len()
        )));
    }
    if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "bin edges must be finite and strictly increasing".into(),
        ));
    }
    let n_out = edges.len() - 1;
    // target bin for every input bin, None when outside the edges
    let target: Vec<Option<usize>> = dataset
        .axis()
        .values()
        .iter()
        .map(|&mz| {
            let i = edges.partition_point(|&e| e <= mz);
            (i >= 1 && i <= n_out).then(|| i - 1)
        })
        .collect();
    if target.iter().all(Option::is_none) {
        return Err(Error::EmptyAxis);
    }
    let mids = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let axis = MzAxis::new(mids)?;
    let mut spectra = vec![0.0; dataset.n_spectra() * n_out];
    for (s, out) in dataset.spectra().zip(spectra.chunks_exact_mut(n_out)) {
        for (v, t) in s.iter().zip(&target) {
            if let Some(t) = t {
                out[*t] += v;
            }
        }
    }
    dataset.with_spectra(axis, spectra)
}

/// Global min-max scaling of all intensities into `[0, 1]`.
/// A dataset with a single distinct intensity maps to all zeros.
pub fn minmax_rescale(dataset: &MsiDataset) -> MsiDataset {
    let (lo, hi) = dataset
        .intensities()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    let scaled = if range > 0.0 {
        dataset.map_intensities(|v| ((v - lo) / range).clamp(0.0, 1.0))
    } else {
        dataset.map_intensities(|_| 0.0)
    };
    scaled.expect("values in [0, 1] are valid intensities")
}

/// Model input preparation: TIC normalization followed by min-max rescaling.
pub fn prepare(dataset: &MsiDataset) -> MsiDataset {
    minmax_rescale(&tic_normalize(dataset))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(spectrum: Vec<f64>) -> MsiDataset {
        let axis = MzAxis::linear(1.0, 1.0, spectrum.len()).unwrap();
        MsiDataset::from_dense(1, 1, axis, spectrum).unwrap()
    }

    #[test]
    fn tic_divides_by_sum() {
        assert_eq!(
            tic_normalize(&single(vec![2.0, 2.0, 4.0])).spectrum(0),
            &[0.25, 0.25, 0.5]
        );
        assert_eq!(
            tic_normalize(&single(vec![0.0, 0.0, 0.0])).spectrum(0),
            &[0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn binning_counts() {
        let ds = single(vec![1.0, 1.0, 1.0, 1.0]);
        let binned = bin_to_common_axis(&ds, &[0.5, 2.5, 4.5]).unwrap();
        assert_eq!(binned.spectrum(0), &[2.0, 2.0]);
        assert_eq!(binned.axis().values(), &[1.5, 3.5]);
    }

    #[test]
    fn binning_errors() {
        let ds = single(vec![1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            bin_to_common_axis(&ds, &[10.0, 11.0, 12.0]),
            Err(Error::EmptyAxis)
        ));
        assert!(matches!(
            bin_to_common_axis(&ds, &[0.0, 5.0]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            bin_to_common_axis(&ds, &[0.0, 5.0, 3.0]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn minmax_degenerate_and_range() {
        let flat = minmax_rescale(&single(vec![3.0, 3.0]));
        assert_eq!(flat.spectrum(0), &[0.0, 0.0]);
        let r = minmax_rescale(&single(vec![1.0, 3.0, 2.0]));
        assert_eq!(r.spectrum(0), &[0.0, 1.0, 0.5]);
    }

    proptest! {
        #[test]
        fn tic_sums_to_one_and_is_idempotent(s in prop::collection::vec(0.0f64..1e3, 100)) {
            prop_assume!(s.iter().sum::<f64>() > 0.0);
            let once = tic_normalize(&single(s));
            let sum: f64 = once.spectrum(0).iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            let twice = tic_normalize(&once);
            for (a, b) in once.spectrum(0).iter().zip(twice.spectrum(0)) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-300));
            }
        }

        #[test]
        fn binning_conserves_total(s in prop::collection::vec(0.0f64..1e3, 50), cut in 2usize..48) {
            let total: f64 = s.iter().sum();
            let ds = single(s);
            // axis is 1..=50, edges span it fully
            let edges = [0.5, cut as f64 + 0.25, 50.5];
            let binned = bin_to_common_axis(&ds, &edges).unwrap();
            let out: f64 = binned.spectrum(0).iter().sum();
            prop_assert!((out - total).abs() <= 1e-9 * total.max(1.0));
        }
    }
}
