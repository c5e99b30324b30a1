//! Spectral patches and the attention-mask autoencoder.
//!
//! The encoder collapses a `p x p x c` patch into one attention value per
//! m/z bin. The mask gates the patch's central spectrum, and the decoder
//! spreads the gated spectrum back over the `p x p` neighborhood:
//!
//! ```text
//! mask           = sigmoid(conv3d_collapse(x, encoder))
//! masked_center  = mask * x_center
//! reconstruction = sigmoid(tconv3d_expand(masked_center, decoder))
//! loss           = mse(reconstruction, x)
//! ```

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::MsiDataset;
use crate::error::{Error, Result};
use crate::nn::{
    conv3d_collapse, conv3d_collapse_backward, hadamard, mse, sigmoid, tconv3d_expand,
    tconv3d_expand_backward, ConvKernel, KernelGrad, Tensor3,
};

/// A `p x p x c` neighborhood around one occupied pixel.
///
/// Spatial index `(i, j)` of the tensor maps to pixel
/// `(x + j - r, y + i - r)` with `r = (p - 1) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPatch {
    pub tensor: Tensor3,
    pub center: (usize, usize),
}

impl SpectralPatch {
    pub fn size(&self) -> usize {
        self.tensor.dims().0
    }

    pub fn center_spectrum(&self) -> &[f64] {
        let r = (self.size() - 1) / 2;
        self.tensor.column(r, r)
    }
}

/// Cuts the patch centered on `(x, y)`. Neighbors outside the grid or
/// without a spectrum are zero. Returns `None` for an unoccupied center.
pub fn extract_patch(
    dataset: &MsiDataset,
    (x, y): (usize, usize),
    p: usize,
) -> Result<Option<SpectralPatch>> {
    if p.is_multiple_of(2) {
        return Err(Error::Config(format!("patch size must be odd, got {p}")));
    }
    if !dataset.is_occupied(x, y) {
        return Ok(None);
    }
    let c = dataset.n_bins();
    let r = (p - 1) / 2;
    let mut data = vec![0.0; p * p * c];
    for i in 0..p {
        let Some(py) = (y + i).checked_sub(r) else {
            continue;
        };
        for j in 0..p {
            let Some(px) = (x + j).checked_sub(r) else {
                continue;
            };
            if let Some(s) = dataset.spectrum_at(px, py) {
                data[(i * p + j) * c..(i * p + j + 1) * c].copy_from_slice(s);
            }
        }
    }
    Ok(Some(SpectralPatch {
        tensor: Tensor3::new((p, p, c), data)?,
        center: (x, y),
    }))
}

/// Patch of the `row`-th occupied pixel.
pub(crate) fn patch_for_row(dataset: &MsiDataset, row: usize, p: usize) -> Result<SpectralPatch> {
    extract_patch(dataset, dataset.pixel(row), p)
        .map(|patch| patch.expect("pixel rows are always occupied"))
}

/// Iterates the patches of all occupied pixels in row-major order.
pub fn patches(dataset: &MsiDataset, p: usize) -> impl Iterator<Item = Result<SpectralPatch>> + '_ {
    (0..dataset.n_spectra()).map(move |row| patch_for_row(dataset, row, p))
}

/// Largest odd depth not above `depth` and `c`.
pub fn clip_depth(depth: usize, c: usize) -> usize {
    let d = depth.min(c);
    if d.is_multiple_of(2) {
        d.saturating_sub(1).max(1)
    } else {
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct S3plModel {
    pub encoder: ConvKernel,
    pub decoder: ConvKernel,
    patch_size: usize,
    spectral_len: usize,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub mask: Tensor3,
    pub reconstruction: Tensor3,
}

/// Intermediates of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub mask: Tensor3,
    pub masked_center: Tensor3,
    pub reconstruction: Tensor3,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: KernelGrad,
    pub decoder: KernelGrad,
}

impl Gradients {
    pub fn zeros_like(model: &S3plModel) -> Self {
        Gradients {
            encoder: KernelGrad::zeros_like(&model.encoder),
            decoder: KernelGrad::zeros_like(&model.decoder),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        self.encoder.add_assign(&other.encoder);
        self.decoder.add_assign(&other.decoder);
    }

    pub fn scale(&mut self, s: f64) {
        self.encoder.scale(s);
        self.decoder.scale(s);
    }

    /// Same order as [`S3plModel::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.encoder.weights.clone();
        out.push(self.encoder.bias);
        out.extend_from_slice(&self.decoder.weights);
        out.push(self.decoder.bias);
        out
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"S3PLCKPT";

impl S3plModel {
    /// Seeded initialization: encoder `p x p x d1`, decoder `p x p x d2`.
    pub fn init(p: usize, c: usize, d1: usize, d2: usize, seed: u64) -> Result<Self> {
        if p.is_multiple_of(2) || p == 0 {
            return Err(Error::Config(format!("patch size must be odd, got {p}")));
        }
        if d1.is_multiple_of(2) || d2.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "kernel depths must be odd, got d1={d1}, d2={d2}"
            )));
        }
        if c < 2 {
            return Err(Error::Config(format!("need at least 2 m/z bins, got {c}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = ConvKernel::init_uniform((p, p, d1), &mut rng)?;
        let decoder = ConvKernel::init_uniform((p, p, d2), &mut rng)?;
        Ok(S3plModel {
            encoder,
            decoder,
            patch_size: p,
            spectral_len: c,
            seed,
        })
    }

    pub fn from_parts(
        encoder: ConvKernel,
        decoder: ConvKernel,
        spectral_len: usize,
        seed: u64,
    ) -> Result<Self> {
        let (eh, ew, _) = encoder.dims();
        let (dh, dw, _) = decoder.dims();
        if eh != ew || (eh, ew) != (dh, dw) {
            return Err(Error::Shape(format!(
                "encoder {eh}x{ew} and decoder {dh}x{dw} must share one square patch size"
            )));
        }
        if eh % 2 == 0 {
            return Err(Error::Config(format!("patch size must be odd, got {eh}")));
        }
        Ok(S3plModel {
            encoder,
            decoder,
            patch_size: eh,
            spectral_len,
            seed,
        })
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn spectral_len(&self) -> usize {
        self.spectral_len
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn check_compatible(&self, dataset: &MsiDataset) -> Result<()> {
        if dataset.n_bins() != self.spectral_len {
            return Err(Error::Compatibility(format!(
                "model was trained on {} m/z bins, dataset has {}",
                self.spectral_len,
                dataset.n_bins()
            )));
        }
        Ok(())
    }

    fn check_patch(&self, patch: &SpectralPatch) -> Result<()> {
        let dims = patch.tensor.dims();
        if dims != (self.patch_size, self.patch_size, self.spectral_len) {
            return Err(Error::Shape(format!(
                "patch {:?} does not fit model ({p}x{p}x{c})",
                dims,
                p = self.patch_size,
                c = self.spectral_len
            )));
        }
        Ok(())
    }

    /// `sigmoid(conv3d_collapse(x))`, the one code path shared by training and picking.
    pub fn attention_mask(&self, patch: &SpectralPatch) -> Result<Tensor3> {
        self.check_patch(patch)?;
        Ok(sigmoid(&conv3d_collapse(&patch.tensor, &self.encoder)?))
    }

    pub fn forward(&self, patch: &SpectralPatch) -> Result<Forward> {
        let t = self.trace(patch)?;
        Ok(Forward {
            mask: t.mask,
            reconstruction: t.reconstruction,
        })
    }

    pub fn trace(&self, patch: &SpectralPatch) -> Result<ForwardTrace> {
        let mask = self.attention_mask(patch)?;
        let center = Tensor3::spectrum(patch.center_spectrum().to_vec())?;
        let masked_center = hadamard(&mask, &center)?;
        let reconstruction = sigmoid(&tconv3d_expand(&masked_center, &self.decoder)?);
        let loss = mse(&reconstruction, &patch.tensor)?;
        Ok(ForwardTrace {
            mask,
            masked_center,
            reconstruction,
            loss,
        })
    }

    /// Exact gradient of `loss_scale * mse` with respect to every parameter.
    pub fn backward(
        &self,
        patch: &SpectralPatch,
        trace: &ForwardTrace,
        loss_scale: f64,
    ) -> Gradients {
        let x = patch.tensor.data();
        let y = trace.reconstruction.data();
        let norm = 2.0 * loss_scale / x.len() as f64;
        // through the output sigmoid
        let grad_pre_out: Vec<f64> = y
            .iter()
            .zip(x)
            .map(|(&yv, &xv)| norm * (yv - xv) * yv * (1.0 - yv))
            .collect();
        let grad_pre_out = Tensor3::new(trace.reconstruction.dims(), grad_pre_out)
            .expect("gradient has the reconstruction's shape");
        let (decoder, grad_masked) =
            tconv3d_expand_backward(&trace.masked_center, &self.decoder, &grad_pre_out);
        // through the gate and the mask sigmoid
        let grad_pre_mask: Vec<f64> = grad_masked
            .iter()
            .zip(patch.center_spectrum())
            .zip(trace.mask.data())
            .map(|((g, xc), m)| g * xc * m * (1.0 - m))
            .collect();
        let encoder = conv3d_collapse_backward(&patch.tensor, &self.encoder, &grad_pre_mask);
        Gradients { encoder, decoder }
    }

    pub fn n_params(&self) -> usize {
        self.encoder.weights.len() + self.decoder.weights.len() + 2
    }

    /// Encoder weights, encoder bias, decoder weights, decoder bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = self.encoder.weights.clone();
        out.push(self.encoder.bias);
        out.extend_from_slice(&self.decoder.weights);
        out.push(self.decoder.bias);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::Shape(format!(
                "{} parameters for a model with {}",
                params.len(),
                self.n_params()
            )));
        }
        let ne = self.encoder.weights.len();
        let nd = self.decoder.weights.len();
        self.encoder.weights.copy_from_slice(&params[..ne]);
        self.encoder.bias = params[ne];
        self.decoder
            .weights
            .copy_from_slice(&params[ne + 1..ne + 1 + nd]);
        self.decoder.bias = params[ne + 1 + nd];
        Ok(())
    }

    /// Checkpoint bytes: magic, then `p, c, d1, d2, seed` as u64, then the
    /// parameters in [`params`](Self::params) order as f64, all little-endian.
    pub fn to_checkpoint(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(48 + 8 * self.n_params());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        for v in [
            self.patch_size as u64,
            self.spectral_len as u64,
            self.encoder.depth() as u64,
            self.decoder.depth() as u64,
            self.seed,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.params() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_checkpoint(bytes: &[u8]) -> Result<Self> {
        let corrupt = |what: &str| Error::InvalidData(format!("checkpoint {what}"));
        if bytes.len() < 48 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(corrupt("has a bad header"));
        }
        let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap());
        let (p, c, d1, d2, seed) = (
            word(0) as usize,
            word(1) as usize,
            word(2) as usize,
            word(3) as usize,
            word(4),
        );
        let mut model = Self::init(p, c, d1, d2, seed)?;
        let body = &bytes[48..];
        if body.len() != 8 * model.n_params() {
            return Err(corrupt("has the wrong length for its header"));
        }
        let params: Vec<f64> = body
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if params.iter().any(|v| !v.is_finite()) {
            return Err(corrupt("contains non-finite parameters"));
        }
        model.set_params(&params)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}
