//! Native lossless dataset format.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic     8 bytes  b"S3PLMSI\0"
//! width     u64
//! height    u64
//! c         u64      number of m/z bins
//! encoding  u64      8 = IEEE 754 binary64
//! axis      c x f64
//! occupancy width*height bytes, row-major, 0 or 1
//! spectra   n_occupied x c x f64, occupied pixels in row-major order
//! ```

use std::path::Path;

use super::{MsiDataset, MzAxis};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"S3PLMSI\0";
const ENCODING_F64: u64 = 8;

pub fn encode(dataset: &MsiDataset) -> Vec<u8> {
    let c = dataset.n_bins();
    let mut out = Vec::with_capacity(
        40 + 8 * c + dataset.width() * dataset.height() + 8 * dataset.intensities().len(),
    );
    out.extend_from_slice(MAGIC);
    for v in [
        dataset.width() as u64,
        dataset.height() as u64,
        c as u64,
        ENCODING_F64,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in dataset.axis().values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(dataset.occupancy().into_iter().map(u8::from));
    for v in dataset.intensities() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<MsiDataset> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::InvalidData(
            "not an s3pl dataset dump (bad magic)".into(),
        ));
    }
    let width = r.u64()? as usize;
    let height = r.u64()? as usize;
    let c = r.u64()? as usize;
    let encoding = r.u64()?;
    if encoding != ENCODING_F64 {
        return Err(Error::UnsupportedEncoding(format!(
            "dump encoding code {encoding}"
        )));
    }
    let axis = MzAxis::new(r.f64s(c)?)?;
    let cells = width
        .checked_mul(height)
        .ok_or_else(|| Error::InvalidData("grid size overflows".into()))?;
    let occupancy = r.take(cells)?.to_vec();
    let mut rows = Vec::new();
    for (i, &flag) in occupancy.iter().enumerate() {
        match flag {
            0 => {}
            1 => rows.push(((i % width, i / width), r.f64s(c)?)),
            other => {
                return Err(Error::InvalidData(format!(
                    "occupancy byte {other} at cell {i}"
                )))
            }
        }
    }
    if r.at != bytes.len() {
        return Err(Error::InvalidData(format!(
            "{} trailing bytes after dataset",
            bytes.len() - r.at
        )));
    }
    MsiDataset::from_rows(width, height, axis, rows)
}

pub fn write(dataset: &MsiDataset, path: &Path) -> Result<()> {
    std::fs::write(path, encode(dataset)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<MsiDataset> {
    decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::InvalidData("dataset dump is truncated".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.saturating_mul(8))?;
        Ok(bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
}
