//! Reader for continuous-mode imzML.
//!
//! An imzML dataset is an XML metadata document (`.imzML`) plus a binary
//! store (`.ibd`) holding the raw arrays. Every spectrum points into the
//! store through an offset and an element count; in continuous mode all
//! spectra share one m/z array.

use std::collections::HashMap;
use std::path::Path;

use roxmltree::{Document, Node};

use super::{MsiDataset, MzAxis};
use crate::error::{Error, Result};

const CONTINUOUS: &str = "IMS:1000030";
const PROCESSED: &str = "IMS:1000031";
const MZ_ARRAY: &str = "MS:1000514";
const INTENSITY_ARRAY: &str = "MS:1000515";
const FLOAT32: &str = "MS:1000521";
const FLOAT64: &str = "MS:1000523";
const NO_COMPRESSION: &str = "MS:1000576";
const EXTERNAL_OFFSET: &str = "IMS:1000102";
const EXTERNAL_ARRAY_LENGTH: &str = "IMS:1000103";
const EXTERNAL_ENCODED_LENGTH: &str = "IMS:1000104";
const POSITION_X: &str = "IMS:1000050";
const POSITION_Y: &str = "IMS:1000051";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    F32,
    F64,
}

impl Encoding {
    fn width(self) -> usize {
        match self {
            Encoding::F32 => 4,
            Encoding::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ArrayKind {
    Mz,
    Intensity,
}

#[derive(Debug, Clone, Copy)]
struct ArrayRef {
    kind: ArrayKind,
    encoding: Encoding,
    offset: u64,
    len: u64,
    line: u32,
}

struct CvParam<'a> {
    accession: &'a str,
    name: &'a str,
    value: &'a str,
}

/// Reads `path` and the companion `.ibd` next to it.
pub fn read_imzml(path: &Path) -> Result<MsiDataset> {
    let metadata = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let ibd = path.with_extension("ibd");
    let store = std::fs::read(&ibd).map_err(|e| Error::io(&ibd, e))?;
    parse_imzml(&metadata, &store)
}

/// Decodes a continuous-mode imzML document and its binary store.
///
/// Pixel coordinates are shifted so the smallest x and y become 0.
pub fn parse_imzml(metadata: &[u8], store: &[u8]) -> Result<MsiDataset> {
    let text = std::str::from_utf8(metadata).map_err(|e| Error::Parse {
        line: line_of_byte(metadata, e.valid_up_to()),
        message: "metadata is not valid UTF-8".into(),
    })?;
    let doc = Document::parse(text).map_err(|e| Error::Parse {
        line: e.pos().row,
        message: e.to_string(),
    })?;
    let root = doc.root_element();
    let groups: HashMap<&str, Node> = root
        .descendants()
        .filter(|n| n.has_tag_name_local("referenceableParamGroup"))
        .filter_map(|n| n.attribute("id").map(|id| (id, n)))
        .collect();

    check_mode(&doc, root)?;

    let spectra: Vec<Node> = root
        .descendants()
        .filter(|n| n.has_tag_name_local("spectrum"))
        .collect();
    if spectra.is_empty() {
        return Err(Error::Parse {
            line: line_of(&doc, root),
            message: "document contains no spectra".into(),
        });
    }

    let mut axis: Option<(u64, Vec<f64>)> = None;
    let mut rows = Vec::with_capacity(spectra.len());
    for spectrum in spectra {
        let (x, y) = position(&doc, spectrum, &groups)?;
        let mut mz_ref = None;
        let mut int_ref = None;
        for array in spectrum
            .descendants()
            .filter(|n| n.has_tag_name_local("binaryDataArray"))
        {
            let a = array_ref(&doc, array, &groups)?;
            match a.kind {
                ArrayKind::Mz => mz_ref = Some(a),
                ArrayKind::Intensity => int_ref = Some(a),
            }
        }
        let missing = |what: &str| Error::Parse {
            line: line_of(&doc, spectrum),
            message: format!("spectrum has no {what} array"),
        };
        let mz_ref = mz_ref.ok_or_else(|| missing("m/z"))?;
        let int_ref = int_ref.ok_or_else(|| missing("intensity"))?;

        match &axis {
            None => axis = Some((mz_ref.offset, read_array(store, &mz_ref)?)),
            Some((offset, values)) => {
                if mz_ref.len as usize != values.len() {
                    return Err(Error::InvalidData(format!(
                        "spectrum at line {} has {} m/z values, expected {} in continuous mode",
                        mz_ref.line,
                        mz_ref.len,
                        values.len()
                    )));
                }
                if mz_ref.offset != *offset && read_array(store, &mz_ref)? != *values {
                    return Err(Error::InvalidData(format!(
                        "spectrum at line {} does not share the continuous m/z array",
                        mz_ref.line
                    )));
                }
            }
        }
        let c = axis.as_ref().map_or(0, |(_, v)| v.len());
        if int_ref.len as usize != c {
            return Err(Error::InvalidData(format!(
                "spectrum at line {} has {} intensities but {c} m/z values",
                int_ref.line, int_ref.len
            )));
        }
        rows.push(((x, y), read_array(store, &int_ref)?));
    }

    let (_, mz) = axis.expect("at least one spectrum");
    let axis = MzAxis::new(mz)?;
    let min_x = rows.iter().map(|((x, _), _)| *x).min().unwrap_or(0);
    let min_y = rows.iter().map(|((_, y), _)| *y).min().unwrap_or(0);
    let max_x = rows.iter().map(|((x, _), _)| *x).max().unwrap_or(0);
    let max_y = rows.iter().map(|((_, y), _)| *y).max().unwrap_or(0);
    let rows = rows
        .into_iter()
        .map(|((x, y), s)| (((x - min_x) as usize, (y - min_y) as usize), s))
        .collect();
    MsiDataset::from_rows(
        (max_x - min_x + 1) as usize,
        (max_y - min_y + 1) as usize,
        axis,
        rows,
    )
}

fn check_mode(doc: &Document, root: Node) -> Result<()> {
    let content = root
        .descendants()
        .find(|n| n.has_tag_name_local("fileContent"));
    let params: Vec<CvParam> = content
        .into_iter()
        .flat_map(|n| n.children().filter_map(cv_param))
        .collect();
    if let Some(p) = params.iter().find(|p| p.accession == PROCESSED) {
        return Err(Error::UnsupportedMode(p.name.to_string()));
    }
    if !params.iter().any(|p| p.accession == CONTINUOUS) {
        return Err(Error::Parse {
            line: content.map_or(1, |n| line_of(doc, n)),
            message: "fileContent does not declare continuous spectrum mode".into(),
        });
    }
    Ok(())
}

fn position(doc: &Document, spectrum: Node, groups: &HashMap<&str, Node>) -> Result<(i64, i64)> {
    let mut x = None;
    let mut y = None;
    let scans = std::iter::once(spectrum).chain(
        spectrum
            .descendants()
            .filter(|n| n.has_tag_name_local("scan")),
    );
    for node in scans {
        for p in params_of(node, groups) {
            match p.accession {
                POSITION_X => x = Some(p.value),
                POSITION_Y => y = Some(p.value),
                _ => {}
            }
        }
    }
    let parse = |v: Option<&str>, axis: &str| -> Result<i64> {
        let v = v.ok_or_else(|| Error::Parse {
            line: line_of(doc, spectrum),
            message: format!("spectrum has no position {axis}"),
        })?;
        v.trim().parse().map_err(|_| Error::Parse {
            line: line_of(doc, spectrum),
            message: format!("position {axis} '{v}' is not an integer"),
        })
    };
    Ok((parse(x, "x")?, parse(y, "y")?))
}

fn array_ref(doc: &Document, array: Node, groups: &HashMap<&str, Node>) -> Result<ArrayRef> {
    let line = line_of(doc, array);
    let mut kind = None;
    let mut encoding = None;
    let mut offset = None;
    let mut len = None;
    let mut encoded_len = None;
    for p in params_of(array, groups) {
        match p.accession {
            MZ_ARRAY => kind = Some(ArrayKind::Mz),
            INTENSITY_ARRAY => kind = Some(ArrayKind::Intensity),
            FLOAT32 => encoding = Some(Encoding::F32),
            FLOAT64 => encoding = Some(Encoding::F64),
            NO_COMPRESSION => {}
            EXTERNAL_OFFSET => offset = Some(parse_u64(p.value, "external offset", line)?),
            EXTERNAL_ARRAY_LENGTH => len = Some(parse_u64(p.value, "external array length", line)?),
            EXTERNAL_ENCODED_LENGTH => {
                encoded_len = Some(parse_u64(p.value, "external encoded length", line)?)
            }
            _ if p.name.contains("compression") => {
                return Err(Error::UnsupportedCompression(p.name.to_string()))
            }
            _ if p.name.contains("integer") => {
                return Err(Error::UnsupportedEncoding(format!(
                    "{} (line {line}); only 32- and 64-bit floats are supported",
                    p.name
                )))
            }
            _ => {}
        }
    }
    let missing = |what: &str| Error::Parse {
        line,
        message: format!("binaryDataArray is missing its {what}"),
    };
    let kind = kind.ok_or_else(|| missing("array type"))?;
    let encoding = encoding.ok_or_else(|| missing("binary data type"))?;
    let offset = offset.ok_or_else(|| missing("external offset"))?;
    let len = len.ok_or_else(|| missing("external array length"))?;
    if let Some(encoded) = encoded_len {
        if encoded != len * encoding.width() as u64 {
            return Err(Error::CorruptStore(format!(
                "array at line {line} declares {encoded} bytes for {len} values"
            )));
        }
    }
    Ok(ArrayRef {
        kind,
        encoding,
        offset,
        len,
        line,
    })
}

fn read_array(store: &[u8], a: &ArrayRef) -> Result<Vec<f64>> {
    let width = a.encoding.width();
    let end = a
        .len
        .checked_mul(width as u64)
        .and_then(|n| n.checked_add(a.offset))
        .filter(|&end| end <= store.len() as u64)
        .ok_or_else(|| {
            Error::CorruptStore(format!(
                "array at line {} spans bytes {}..+{} but the store holds {} bytes",
                a.line,
                a.offset,
                a.len * width as u64,
                store.len()
            ))
        })?;
    let bytes = &store[a.offset as usize..end as usize];
    Ok(match a.encoding {
        Encoding::F32 => bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect(),
        Encoding::F64 => bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect(),
    })
}

/// Own `cvParam` children plus those of referenced param groups.
fn params_of<'a, 'input>(
    node: Node<'a, 'input>,
    groups: &HashMap<&str, Node<'a, 'input>>,
) -> Vec<CvParam<'a>> {
    let mut out: Vec<CvParam<'a>> = node.children().filter_map(cv_param).collect();
    for r in node
        .children()
        .filter(|n| n.has_tag_name_local("referenceableParamGroupRef"))
    {
        if let Some(group) = r.attribute("ref").and_then(|id| groups.get(id)) {
            out.extend(group.children().filter_map(cv_param));
        }
    }
    out
}

fn cv_param<'a>(node: Node<'a, '_>) -> Option<CvParam<'a>> {
    if !node.has_tag_name_local("cvParam") {
        return None;
    }
    Some(CvParam {
        accession: node.attribute("accession")?,
        name: node.attribute("name").unwrap_or(""),
        value: node.attribute("value").unwrap_or(""),
    })
}

fn parse_u64(v: &str, what: &str, line: u32) -> Result<u64> {
    v.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("{what} '{v}' is not a non-negative integer"),
    })
}

fn line_of(doc: &Document, node: Node) -> u32 {
    doc.text_pos_at(node.range().start).row
}

fn line_of_byte(bytes: &[u8], at: usize) -> u32 {
    1 + bytes[..at].iter().filter(|&&b| b == b'\n').count() as u32
}

trait LocalName {
    fn has_tag_name_local(&self, name: &str) -> bool;
}

impl LocalName for Node<'_, '_> {
    fn has_tag_name_local(&self, name: &str) -> bool {
        self.is_element() && self.tag_name().name() == name
    }
}
