//! Shared fixtures and naive reference implementations for the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use s3pl::data::synth::{generate_synthetic, SynthConfig};
use s3pl::data::{MsiDataset, SegmentationMask, SyntheticGroundTruth};
use s3pl::nn::{ConvKernel, Tensor3};
use s3pl::S3plModel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut impl Rng, dims: (usize, usize, usize)) -> Tensor3 {
    let n = dims.0 * dims.1 * dims.2;
    Tensor3::new(dims, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_kernel(rng: &mut impl Rng, dims: (usize, usize, usize)) -> ConvKernel {
    let n = dims.0 * dims.1 * dims.2;
    let w = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    ConvKernel::new(dims, w, rng.random_range(-1.0..1.0)).unwrap()
}

/// Explicit zero padding, then a plain sliding dot product.
pub fn naive_conv(x: &Tensor3, k: &ConvKernel) -> Vec<f64> {
    let (h, w, c) = x.dims();
    let d = k.depth();
    let r = (d - 1) / 2;
    let mut padded = vec![vec![vec![0.0; c + 2 * r]; w]; h];
    for i in 0..h {
        for j in 0..w {
            for s in 0..c {
                padded[i][j][s + r] = x.get(i, j, s);
            }
        }
    }
    let mut out = vec![0.0; c];
    for (kk, o) in out.iter_mut().enumerate() {
        let mut acc = k.bias;
        for (i, plane) in padded.iter().enumerate() {
            for (j, column) in plane.iter().enumerate() {
                for t in 0..d {
                    acc += k.weight(i, j, t) * column[kk + t];
                }
            }
        }
        *o = acc;
    }
    out
}

/// Scatters every input value through the kernel into a full-length
/// output, then crops the center.
pub fn naive_tconv(m: &[f64], k: &ConvKernel) -> Vec<f64> {
    let (h, w, d) = k.dims();
    let c = m.len();
    let r = (d - 1) / 2;
    let mut out = vec![0.0; h * w * c];
    for i in 0..h {
        for j in 0..w {
            let mut full = vec![0.0; c + d - 1];
            for (s, &v) in m.iter().enumerate() {
                for t in 0..d {
                    full[s + t] += k.weight(i, j, t) * v;
                }
            }
            for kk in 0..c {
                out[(i * w + j) * c + kk] = full[kk + r] + k.bias;
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Pearson correlation from raw sums, independent of the library's two-pass form.
pub fn naive_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        sa += x;
        sb += y;
        saa += x * x;
        sbb += y * y;
        sab += x * y;
    }
    let cov = n * sab - sa * sb;
    let va = n * saa - sa * sa;
    let vb = n * sbb - sb * sb;
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Max relative/absolute mismatch check used by every gradient test.
pub fn grad_close(analytic: f64, numeric: f64, rel: f64, abs: f64) -> bool {
    let err = (analytic - numeric).abs();
    err <= abs || err <= rel * analytic.abs().max(numeric.abs())
}

/// Central-difference gradient of the patch loss with respect to every parameter.
pub fn numeric_gradient(model: &S3plModel, patch: &s3pl::SpectralPatch, step: f64) -> Vec<f64> {
    let base = model.params();
    let mut probe = model.clone();
    (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] = base[i] + step;
            probe.set_params(&p).unwrap();
            let up = probe.trace(patch).unwrap().loss;
            p[i] = base[i] - step;
            probe.set_params(&p).unwrap();
            let down = probe.trace(patch).unwrap().loss;
            (up - down) / (2.0 * step)
        })
        .collect()
}

pub const GRID: usize = 32;
pub const BINS: usize = 256;
pub const N_STRUCTURED: usize = 12;

/// The 32x32, 256-bin benchmark with 12 structured and 12 unstructured bins.
pub fn benchmark(seed: u64) -> (MsiDataset, SegmentationMask, SyntheticGroundTruth) {
    generate_synthetic(&SynthConfig {
        width: GRID,
        height: GRID,
        c: BINS,
        n_structured: N_STRUCTURED,
        n_unstructured: 12,
        noise_level: 0.05,
        seed,
    })
    .unwrap()
}

pub fn small_synthetic(seed: u64) -> (MsiDataset, SegmentationMask, SyntheticGroundTruth) {
    generate_synthetic(&SynthConfig {
        width: 10,
        height: 9,
        c: 40,
        n_structured: 4,
        n_unstructured: 4,
        noise_level: 0.05,
        seed,
    })
    .unwrap()
}

/// Fraction of `truth` with a pick at most one bin away.
pub fn recall_within_one(picked: &[usize], truth: &[usize]) -> f64 {
    let hit = truth
        .iter()
        .filter(|&&t| picked.iter().any(|&p| p.abs_diff(t) <= 1))
        .count();
    hit as f64 / truth.len() as f64
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Float {
    F32,
    F64,
}

/// Options for a hand-built imzML document.
pub struct ImzmlSpec {
    pub float: Float,
    pub mode_accession: &'static str,
    pub mode_name: &'static str,
    pub compression: (&'static str, &'static str),
    /// Top-left pixel position as written in the file.
    pub origin: (i64, i64),
}

impl Default for ImzmlSpec {
    fn default() -> Self {
        ImzmlSpec {
            float: Float::F64,
            mode_accession: "IMS:1000030",
            mode_name: "continuous",
            compression: ("MS:1000576", "no compression"),
            origin: (1, 1),
        }
    }
}

fn put(store: &mut Vec<u8>, values: &[f64], float: Float) {
    for &v in values {
        match float {
            Float::F32 => store.extend_from_slice(&(v as f32).to_le_bytes()),
            Float::F64 => store.extend_from_slice(&v.to_le_bytes()),
        }
    }
}

/// Writes `spectra` at `pixels` with one shared m/z array; returns
/// `(metadata, store)`.
pub fn build_imzml(
    spec: &ImzmlSpec,
    mz: &[f64],
    pixels: &[(i64, i64)],
    spectra: &[Vec<f64>],
) -> (String, Vec<u8>) {
    let (width, float_acc, float_name) = match spec.float {
        Float::F32 => (4, "MS:1000521", "32-bit float"),
        Float::F64 => (8, "MS:1000523", "64-bit float"),
    };
    let mut store = vec![0u8; 16];
    let mz_offset = store.len();
    put(&mut store, mz, spec.float);
    let (comp_acc, comp_name) = spec.compression;
    let mut xml = format!(
        r#"<?xml version="1.0" encoding="ISO-8859-1"?>
<mzML xmlns="http://psi.hupo.org/ms/mzml" version="1.1">
  <fileDescription>
    <fileContent>
      <cvParam cvRef="MS" accession="MS:1000579" name="MS1 spectrum" value=""/>
      <cvParam cvRef="IMS" accession="{mode}" name="{mode_name}" value=""/>
    </fileContent>
  </fileDescription>
  <referenceableParamGroupList count="2">
    <referenceableParamGroup id="mzArray">
      <cvParam cvRef="MS" accession="MS:1000514" name="m/z array" value=""/>
      <cvParam cvRef="MS" accession="{comp_acc}" name="{comp_name}" value=""/>
      <cvParam cvRef="MS" accession="{float_acc}" name="{float_name}" value=""/>
    </referenceableParamGroup>
    <referenceableParamGroup id="intensities">
      <cvParam cvRef="MS" accession="MS:1000515" name="intensity array" value=""/>
      <cvParam cvRef="MS" accession="{comp_acc}" name="{comp_name}" value=""/>
      <cvParam cvRef="MS" accession="{float_acc}" name="{float_name}" value=""/>
    </referenceableParamGroup>
  </referenceableParamGroupList>
  <run id="run0">
    <spectrumList count="{count}">
"#,
        mode = spec.mode_accession,
        mode_name = spec.mode_name,
        count = spectra.len(),
    );
    for (idx, ((x, y), s)) in pixels.iter().zip(spectra).enumerate() {
        let offset = store.len();
        put(&mut store, s, spec.float);
        xml.push_str(&format!(
            r#"      <spectrum id="Scan={idx}" index="{idx}" defaultArrayLength="0">
        <scanList count="1">
          <scan>
            <cvParam cvRef="IMS" accession="IMS:1000050" name="position x" value="{px}"/>
            <cvParam cvRef="IMS" accession="IMS:1000051" name="position y" value="{py}"/>
          </scan>
        </scanList>
        <binaryDataArrayList count="2">
          <binaryDataArray encodedLength="0">
            <referenceableParamGroupRef ref="mzArray"/>
            <cvParam cvRef="IMS" accession="IMS:1000102" name="external offset" value="{mz_offset}"/>
            <cvParam cvRef="IMS" accession="IMS:1000103" name="external array length" value="{c}"/>
            <cvParam cvRef="IMS" accession="IMS:1000104" name="external encoded length" value="{mz_bytes}"/>
            <binary/>
          </binaryDataArray>
          <binaryDataArray encodedLength="0">
            <referenceableParamGroupRef ref="intensities"/>
            <cvParam cvRef="IMS" accession="IMS:1000102" name="external offset" value="{offset}"/>
            <cvParam cvRef="IMS" accession="IMS:1000103" name="external array length" value="{n}"/>
            <cvParam cvRef="IMS" accession="IMS:1000104" name="external encoded length" value="{bytes}"/>
            <binary/>
          </binaryDataArray>
        </binaryDataArrayList>
      </spectrum>
"#,
            px = x + spec.origin.0,
            py = y + spec.origin.1,
            c = mz.len(),
            mz_bytes = mz.len() * width,
            n = s.len(),
            bytes = s.len() * width,
        ));
    }
    xml.push_str("    </spectrumList>\n  </run>\n</mzML>\n");
    (xml, store)
}
