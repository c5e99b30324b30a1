//! Spatially structured peak picking for profile mass spectrometry imaging.
//!
//! The crate trains a small self-supervised 3-D convolutional autoencoder on
//! `p x p` neighborhoods of spectra. Its encoder produces one attention value
//! per m/z bin; after training, the frozen encoder votes for the bins with
//! the highest attention in every neighborhood, and the most frequently
//! voted bins form the peak list. Bins whose ion images are spatially
//! coherent get the votes, because the decoder can only rebuild a
//! neighborhood from the central spectrum when the gated bins vary smoothly
//! across space.
//!
//! Alongside the picker there is an evaluation that scores a peak list
//! against a segmentation mask by Pearson correlation, a simple
//! signal-to-noise baseline, a synthetic data generator with planted truth,
//! and readers/writers for imzML, a native dump format, PNG and CSV.
//!
//! ```
//! use s3pl::data::{prepare, synth::{generate_synthetic, SynthConfig}};
//! use s3pl::{eval, pick, train, S3plConfig};
//!
//! let (raw, mask, truth) = generate_synthetic(&SynthConfig {
//!     width: 12, height: 12, c: 64,
//!     n_structured: 4, n_unstructured: 4,
//!     noise_level: 0.05, seed: 1,
//! })?;
//! let data = prepare(&raw);
//! let cfg = S3plConfig { d1: 11, epochs: 2, ..S3plConfig::default() };
//! let model = train::train(&data, &cfg)?.model;
//! let peaks = pick::pick_peaks(&model, &data, 8, 4)?;
//! let report = eval::mscf1(&raw, &mask, &peaks)?;
//! assert_eq!(peaks.len(), 4);
//! assert!((0.0..=1.0).contains(&report.mscf1));
//! # let _ = truth;
//! # Ok::<(), s3pl::Error>(())
//! ```

pub mod baseline;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod nn;
pub mod pick;
pub mod train;

pub use config::S3plConfig;
pub use error::{Error, Result};
pub use model::{S3plModel, SpectralPatch};
pub use pick::PeakList;

/// Guide chapters, compiled here so their code blocks run as doctests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    pub mod data {}
    #[doc = include_str!("../../../book/src/network.md")]
    pub mod network {}
    #[doc = include_str!("../../../book/src/picking.md")]
    pub mod picking {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
