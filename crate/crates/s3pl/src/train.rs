use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::S3plConfig;
use crate::data::{minmax_rescale, MsiDataset};
use crate::error::{Error, Result};
use crate::model::{clip_depth, patch_for_row, Gradients, S3plModel};
use crate::nn::AdamState;

/// Stream of the seeded generator used for shuffling; stream 0 initializes weights.
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: S3plModel,
    /// Mean per-patch MSE of each epoch, measured as the epoch runs.
    pub epoch_losses: Vec<f64>,
}

/// Trains the autoencoder on every occupied-pixel patch.
///
/// Each epoch visits all patches in a seeded random order. Gradients are
/// averaged over batches of `cfg.batch` patches and applied with one Adam
/// step per batch. Kernel depths larger than the spectrum are clipped to
/// the largest odd depth that fits.
///
/// Run [`tic_normalize`](crate::data::tic_normalize) (or
/// [`prepare`](crate::data::prepare)) first. Intensities are min-max scaled
/// into `[0, 1]` here, like the sigmoid output; picking applies the same
/// scaling, and it is a no-op on prepared data.
///
/// Weights start from the seeded uniform initialization, except the decoder
/// bias, which starts at [`output_bias`] of the dataset. Starting the output
/// near 0.5 on data whose typical value is near 0 drives every decoder weight
/// negative in the first steps, and the mask then learns to switch peaks off.
pub fn train(dataset: &MsiDataset, cfg: &S3plConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.n_spectra() == 0 {
        return Err(Error::Config(
            "dataset has no occupied pixels to train on".into(),
        ));
    }
    let c = dataset.n_bins();
    let dataset = &minmax_rescale(dataset);
    let mut model = S3plModel::init(
        cfg.p,
        c,
        clip_depth(cfg.d1, c),
        clip_depth(cfg.d2, c),
        cfg.seed,
    )?;
    model.decoder.bias = output_bias(dataset);
    train_from(model, dataset, cfg)
}

/// Logit of the mean stored intensity, so the untrained reconstruction sits
/// at the data mean. The mean is clamped into `[1e-6, 1 - 1e-6]`.
pub fn output_bias(dataset: &MsiDataset) -> f64 {
    let values = dataset.intensities();
    if values.is_empty() {
        return 0.0;
    }
    let mean = (values.iter().sum::<f64>() / values.len() as f64).clamp(1e-6, 1.0 - 1e-6);
    (mean / (1.0 - mean)).ln()
}

/// Continues training an existing model; `cfg.p` must match its patch size.
pub fn train_from(
    mut model: S3plModel,
    dataset: &MsiDataset,
    cfg: &S3plConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    model.check_compatible(dataset)?;
    if cfg.p != model.patch_size() {
        return Err(Error::Compatibility(format!(
            "config patch size {} differs from the model's {}",
            cfg.p,
            model.patch_size()
        )));
    }
    if dataset.n_spectra() == 0 {
        return Err(Error::Config(
            "dataset has no occupied pixels to train on".into(),
        ));
    }
    let mut adam = AdamState::new(model.n_params(), cfg.lr);
    let mut params = model.params();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SHUFFLE_STREAM);

    let mut order: Vec<usize> = (0..dataset.n_spectra()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch) {
            // per-sample work fans out; the reduction below runs in batch order
            let per_sample: Vec<(Gradients, f64)> = batch
                .par_iter()
                .map(|&row| {
                    let patch = patch_for_row(dataset, row, cfg.p)?;
                    let trace = model.trace(&patch)?;
                    Ok((model.backward(&patch, &trace, 1.0), trace.loss))
                })
                .collect::<Result<_>>()?;
            let mut grads = Gradients::zeros_like(&model);
            for (g, loss) in &per_sample {
                grads.add_assign(g);
                loss_sum += loss;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut params, &grads.flatten())?;
            model.set_params(&params)?;
        }
        epoch_losses.push(loss_sum / dataset.n_spectra() as f64);
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
    })
}
