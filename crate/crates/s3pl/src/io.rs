//! PNG and CSV import/export of ion images and segmentation masks.
//!
//! Grid CSVs have one line per image row (`y`), comma-separated values along
//! `x`, and no header. Mask CSVs hold integer class labels, negative for
//! unannotated pixels. Mask PNGs are indexed-color images whose palette
//! index is the class label; any other PNG color type is accepted on read
//! with one class per distinct color.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Cursor;
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use crate::data::{IonImage, SegmentationMask};
use crate::error::{Error, Result};

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidData(format!("PNG: {e}"))
}

fn encode_png(
    width: usize,
    height: usize,
    color: ColorType,
    palette: Option<Vec<u8>>,
    pixels: &[u8],
) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(BitDepth::Eight);
        if let Some(p) = palette {
            enc.set_palette(p);
        }
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(pixels).map_err(png_err)?;
    }
    Ok(out)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// 8-bit grayscale PNG, min-max scaled; a constant image is all black.
pub fn ion_image_png(image: &IonImage) -> Result<Vec<u8>> {
    let (lo, hi) = image
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    let range = hi - lo;
    let pixels: Vec<u8> = image
        .values
        .iter()
        .map(|&v| {
            if range > 0.0 {
                ((v - lo) / range * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect();
    encode_png(
        image.width,
        image.height,
        ColorType::Grayscale,
        None,
        &pixels,
    )
}

pub fn write_ion_image_png(image: &IonImage, path: &Path) -> Result<()> {
    write_file(path, &ion_image_png(image)?)
}

/// Exact text form of a grid; values use the shortest round-trip representation.
pub fn grid_csv<T: std::fmt::Display>(width: usize, values: &[T]) -> String {
    let mut out = String::new();
    for row in values.chunks(width) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses a rectangular grid CSV into `(width, height, values)`.
pub fn parse_grid_csv<T: std::str::FromStr>(text: &str) -> Result<(usize, usize, Vec<T>)> {
    let mut width = None;
    let mut values = Vec::new();
    let mut height = 0;
    for (y, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let row = line
            .split(',')
            .map(|v| {
                v.trim().parse::<T>().map_err(|_| {
                    Error::InvalidData(format!("grid CSV line {}: bad value '{v}'", y + 1))
                })
            })
            .collect::<Result<Vec<T>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Shape(format!(
                    "grid CSV line {} has {} values, expected {w}",
                    y + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        values.extend(row);
        height += 1;
    }
    let width = width.ok_or_else(|| Error::InvalidData("grid CSV is empty".into()))?;
    Ok((width, height, values))
}

pub fn ion_image_csv(image: &IonImage) -> String {
    grid_csv(image.width, &image.values)
}

pub fn parse_ion_image_csv(text: &str) -> Result<IonImage> {
    let (width, height, values) = parse_grid_csv(text)?;
    Ok(IonImage {
        width,
        height,
        values,
    })
}

pub fn mask_csv(mask: &SegmentationMask) -> String {
    grid_csv(mask.width(), &mask.labels())
}

pub fn parse_mask_csv(text: &str) -> Result<SegmentationMask> {
    let (width, height, labels) = parse_grid_csv::<i64>(text)?;
    SegmentationMask::from_labels(width, height, &labels)
}

/// Distinct, well-separated palette colors.
fn palette_color(i: usize) -> [u8; 3] {
    const BASE: [[u8; 3]; 8] = [
        [230, 25, 75],
        [60, 180, 75],
        [0, 130, 200],
        [255, 225, 25],
        [145, 30, 180],
        [70, 240, 240],
        [245, 130, 48],
        [240, 50, 230],
    ];
    let b = BASE[i % BASE.len()];
    let shade = (i / BASE.len()) as u8;
    [
        b[0].wrapping_sub(shade * 29),
        b[1].wrapping_sub(shade * 29),
        b[2].wrapping_sub(shade * 29),
    ]
}

/// Indexed-color PNG with palette index = class position. Every pixel must
/// belong to a class; use CSV for masks with unannotated pixels.
pub fn mask_png(mask: &SegmentationMask) -> Result<Vec<u8>> {
    let n = mask.classes().len();
    if n > 256 {
        return Err(Error::InvalidData(format!(
            "{n} classes do not fit an 8-bit palette"
        )));
    }
    let labels = mask.labels();
    if labels.iter().any(|&l| l < 0) {
        return Err(Error::InvalidData(
            "PNG masks cannot hold unannotated pixels, export as CSV instead".into(),
        ));
    }
    let pixels: Vec<u8> = labels.iter().map(|&l| l as u8).collect();
    let palette = (0..n).flat_map(palette_color).collect();
    encode_png(
        mask.width(),
        mask.height(),
        ColorType::Indexed,
        Some(palette),
        &pixels,
    )
}

pub fn parse_mask_png(bytes: &[u8]) -> Result<SegmentationMask> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let mut buf = vec![
        0;
        reader
            .output_buffer_size()
            .ok_or_else(|| png_err("image too large"))?
    ];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    let (w, h) = (info.width as usize, info.height as usize);

    let labels: Vec<i64> = if info.color_type == ColorType::Indexed {
        let bits = info.bit_depth as usize;
        let per_byte = 8 / bits;
        let mask = ((1u16 << bits) - 1) as u8;
        (0..h)
            .flat_map(|y| {
                let row = &buf[y * info.line_size..(y + 1) * info.line_size];
                (0..w).map(move |x| {
                    let byte = row[x / per_byte];
                    let shift = 8 - bits * (x % per_byte + 1);
                    ((byte >> shift) & mask) as i64
                })
            })
            .collect()
    } else {
        let mut decoder = png::Decoder::new(Cursor::new(bytes));
        decoder.set_transformations(Transformations::normalize_to_color8());
        let mut reader = decoder.read_info().map_err(png_err)?;
        let mut buf = vec![
            0;
            reader
                .output_buffer_size()
                .ok_or_else(|| png_err("image too large"))?
        ];
        let info = reader.next_frame(&mut buf).map_err(png_err)?;
        let channels = info.line_size / w;
        let colors: Vec<&[u8]> = (0..h)
            .flat_map(|y| {
                let row = &buf[y * info.line_size..(y + 1) * info.line_size];
                row.chunks_exact(channels).take(w).collect::<Vec<_>>()
            })
            .collect();
        let mut ids: BTreeMap<&[u8], i64> = colors.iter().map(|c| (*c, 0)).collect();
        for (i, v) in ids.values_mut().enumerate() {
            *v = i as i64;
        }
        colors.iter().map(|c| ids[c]).collect()
    };
    SegmentationMask::from_labels(w, h, &labels)
}

/// Reads a mask from `.png` or `.csv` by extension.
pub fn read_mask(path: &Path) -> Result<SegmentationMask> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("png") => parse_mask_png(&bytes),
        Some("csv") => parse_mask_csv(
            std::str::from_utf8(&bytes)
                .map_err(|_| Error::InvalidData("mask CSV is not UTF-8".into()))?,
        ),
        _ => Err(Error::Config(format!(
            "mask {} must be a .png or .csv file",
            path.display()
        ))),
    }
}

pub fn write_mask_png(mask: &SegmentationMask, path: &Path) -> Result<()> {
    write_file(path, &mask_png(mask)?)
}

pub fn write_mask_csv(mask: &SegmentationMask, path: &Path) -> Result<()> {
    write_file(path, mask_csv(mask).as_bytes())
}
