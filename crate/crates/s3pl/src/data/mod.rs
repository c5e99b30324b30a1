//! In-memory MSI datasets, ion images and segmentation masks.
//!
//! A dataset is a rectangular pixel grid in which some pixels carry a
//! profile spectrum sampled on one shared m/z axis. Pixels are addressed as
//! `(x, y)` with `x < width`, `y < height`; grids are stored row-major
//! (`y * width + x`).

pub mod dump;
pub mod imzml;
mod preprocess;
pub mod synth;

pub use preprocess::{bin_to_common_axis, minmax_rescale, prepare, tic_normalize};

use crate::error::{Error, Result};

/// Strictly increasing, positive m/z values shared by every spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct MzAxis(Vec<f64>);

impl MzAxis {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidData(format!(
                "m/z axis needs at least 2 values, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::InvalidData(format!(
                "m/z values must be finite and positive, found {v}"
            )));
        }
        if let Some(w) = values.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidData(format!(
                "m/z axis not strictly increasing at index {}",
                w + 1
            )));
        }
        Ok(MzAxis(values))
    }

    /// Evenly spaced axis from `start` with spacing `step`.
    pub fn linear(start: f64, step: f64, len: usize) -> Result<Self> {
        Self::new((0..len).map(|i| start + step * i as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Profile MSI data: a pixel grid plus one spectrum per occupied pixel.
///
/// Spectra are kept in row-major pixel order, so the `i`-th spectrum belongs
/// to the `i`-th occupied pixel when scanning `y` then `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct MsiDataset {
    width: usize,
    height: usize,
    axis: MzAxis,
    spectra: Vec<f64>,
    pixels: Vec<(usize, usize)>,
    /// Row index per grid cell, `u32::MAX` for unoccupied.
    index: Vec<u32>,
}

const EMPTY: u32 = u32::MAX;

impl MsiDataset {
    /// Builds a dataset from `(pixel, spectrum)` rows in any order.
    pub fn from_rows(
        width: usize,
        height: usize,
        axis: MzAxis,
        mut rows: Vec<((usize, usize), Vec<f64>)>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidData("grid must be at least 1x1".into()));
        }
        let c = axis.len();
        rows.sort_by_key(|((x, y), _)| (*y, *x));
        let mut index = vec![EMPTY; width * height];
        let mut spectra = Vec::with_capacity(rows.len() * c);
        let mut pixels = Vec::with_capacity(rows.len());
        for (row, ((x, y), spectrum)) in rows.into_iter().enumerate() {
            if x >= width || y >= height {
                return Err(Error::InvalidData(format!(
                    "pixel ({x}, {y}) outside {width}x{height} grid"
                )));
            }
            if index[y * width + x] != EMPTY {
                return Err(Error::InvalidData(format!(
                    "pixel ({x}, {y}) has more than one spectrum"
                )));
            }
            if spectrum.len() != c {
                return Err(Error::Shape(format!(
                    "spectrum at ({x}, {y}) has length {}, axis has {c}",
                    spectrum.len()
                )));
            }
            check_intensities(&spectrum, (x, y))?;
            index[y * width + x] = row as u32;
            pixels.push((x, y));
            spectra.extend_from_slice(&spectrum);
        }
        Ok(MsiDataset {
            width,
            height,
            axis,
            spectra,
            pixels,
            index,
        })
    }

    /// Builds a fully occupied dataset from a row-major `height x width x c` cube.
    pub fn from_dense(width: usize, height: usize, axis: MzAxis, cube: Vec<f64>) -> Result<Self> {
        let c = axis.len();
        if cube.len() != width * height * c {
            return Err(Error::Shape(format!(
                "cube has {} values, expected {width}*{height}*{c}",
                cube.len()
            )));
        }
        let rows = cube
            .chunks(c)
            .enumerate()
            .map(|(i, s)| ((i % width, i / width), s.to_vec()))
            .collect();
        Self::from_rows(width, height, axis, rows)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn axis(&self) -> &MzAxis {
        &self.axis
    }

    /// Number of m/z bins.
    pub fn n_bins(&self) -> usize {
        self.axis.len()
    }

    /// Number of occupied pixels.
    pub fn n_spectra(&self) -> usize {
        self.pixels.len()
    }

    pub fn spectrum(&self, row: usize) -> &[f64] {
        let c = self.n_bins();
        &self.spectra[row * c..(row + 1) * c]
    }

    pub fn spectra(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.spectra.chunks_exact(self.n_bins())
    }

    /// Flat intensity matrix, one row of length `c` per occupied pixel.
    pub fn intensities(&self) -> &[f64] {
        &self.spectra
    }

    pub fn pixel(&self, row: usize) -> (usize, usize) {
        self.pixels[row]
    }

    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    pub fn row_at(&self, x: usize, y: usize) -> Option<usize> {
        if x >= self.width || y >= self.height {
            return None;
        }
        match self.index[y * self.width + x] {
            EMPTY => None,
            row => Some(row as usize),
        }
    }

    pub fn spectrum_at(&self, x: usize, y: usize) -> Option<&[f64]> {
        self.row_at(x, y).map(|row| self.spectrum(row))
    }

    pub fn is_occupied(&self, x: usize, y: usize) -> bool {
        self.row_at(x, y).is_some()
    }

    /// Occupancy grid, row-major.
    pub fn occupancy(&self) -> Vec<bool> {
        self.index.iter().map(|&i| i != EMPTY).collect()
    }

    /// Same grid and axis with every intensity passed through `f`.
    pub fn map_intensities(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let spectra: Vec<f64> = self.spectra.iter().map(|&v| f(v)).collect();
        self.with_spectra(self.axis.clone(), spectra)
    }

    pub(crate) fn with_spectra(&self, axis: MzAxis, spectra: Vec<f64>) -> Result<Self> {
        debug_assert_eq!(spectra.len(), self.n_spectra() * axis.len());
        for (row, s) in spectra.chunks_exact(axis.len()).enumerate() {
            check_intensities(s, self.pixels[row])?;
        }
        Ok(MsiDataset {
            width: self.width,
            height: self.height,
            axis,
            spectra,
            pixels: self.pixels.clone(),
            index: self.index.clone(),
        })
    }

    /// The 2-D intensity map of one m/z bin; unoccupied pixels read as zero.
    pub fn ion_image(&self, bin: usize) -> Result<IonImage> {
        let c = self.n_bins();
        if bin >= c {
            return Err(Error::Bounds { index: bin, len: c });
        }
        let mut values = vec![0.0; self.width * self.height];
        for (row, &(x, y)) in self.pixels.iter().enumerate() {
            values[y * self.width + x] = self.spectra[row * c + bin];
        }
        Ok(IonImage {
            width: self.width,
            height: self.height,
            values,
        })
    }

    /// Mean spectrum over the occupied pixels.
    pub fn mean_spectrum(&self) -> Vec<f64> {
        let c = self.n_bins();
        let mut mean = vec![0.0; c];
        for s in self.spectra() {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        let n = self.n_spectra().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

fn check_intensities(spectrum: &[f64], (x, y): (usize, usize)) -> Result<()> {
    match spectrum.iter().find(|v| !v.is_finite() || **v < 0.0) {
        Some(v) => Err(Error::InvalidData(format!(
            "intensity {v} at pixel ({x}, {y}) is negative or not finite"
        ))),
        None => Ok(()),
    }
}

/// A `width x height` intensity grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IonImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl IonImage {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// One named binary region of a segmentation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskClass {
    pub name: String,
    /// Row-major membership grid.
    pub pixels: Vec<bool>,
}

/// Annotated regions used as the spatial reference for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMask {
    width: usize,
    height: usize,
    classes: Vec<MaskClass>,
}

impl SegmentationMask {
    pub fn new(width: usize, height: usize, classes: Vec<MaskClass>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidData("mask has no classes".into()));
        }
        for (i, class) in classes.iter().enumerate() {
            if class.pixels.len() != width * height {
                return Err(Error::Shape(format!(
                    "mask class '{}' has {} pixels, grid is {width}x{height}",
                    class.name,
                    class.pixels.len()
                )));
            }
            if !class.pixels.iter().any(|&p| p) {
                return Err(Error::InvalidData(format!(
                    "mask class '{}' is empty",
                    class.name
                )));
            }
            if classes[..i].iter().any(|c| c.name == class.name) {
                return Err(Error::InvalidData(format!(
                    "duplicate mask class name '{}'",
                    class.name
                )));
            }
        }
        Ok(SegmentationMask {
            width,
            height,
            classes,
        })
    }

    /// Builds a mask from per-pixel integer labels; negative labels are unannotated.
    /// Classes are ordered by label and named `class_<label>`.
    pub fn from_labels(width: usize, height: usize, labels: &[i64]) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Shape(format!(
                "{} labels for a {width}x{height} grid",
                labels.len()
            )));
        }
        let mut distinct: Vec<i64> = labels.iter().copied().filter(|&l| l >= 0).collect();
        distinct.sort_unstable();
        distinct.dedup();
        let classes = distinct
            .into_iter()
            .map(|label| MaskClass {
                name: format!("class_{label}"),
                pixels: labels.iter().map(|&l| l == label).collect(),
            })
            .collect();
        Self::new(width, height, classes)
    }

    /// Per-pixel label: index of the first class containing the pixel, or -1.
    pub fn labels(&self) -> Vec<i64> {
        (0..self.width * self.height)
            .map(|i| {
                self.classes
                    .iter()
                    .position(|c| c.pixels[i])
                    .map_or(-1, |p| p as i64)
            })
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn classes(&self) -> &[MaskClass] {
        &self.classes
    }

    pub fn check_matches(&self, dataset: &MsiDataset) -> Result<()> {
        if self.width != dataset.width() || self.height != dataset.height() {
            return Err(Error::Compatibility(format!(
                "mask is {}x{}, dataset grid is {}x{}",
                self.width,
                self.height,
                dataset.width(),
                dataset.height()
            )));
        }
        Ok(())
    }
}

/// The planted bins of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticGroundTruth {
    pub structured_bins: Vec<usize>,
    pub unstructured_bins: Vec<usize>,
}
