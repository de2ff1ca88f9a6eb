//! NPY format version 1.0: little-endian, C-order, `|u1` / `<f4` / `<f8`.

use std::io::Write;

use ndarray::{ArrayD, ArrayView, Dimension, IxDyn};

use super::TrajError;

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";

/// Element types this crate reads and writes.
pub trait NpyElement: Copy + Default + 'static {
    const DESCR: &'static str;
    const SIZE: usize;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl NpyElement for u8 {
    const DESCR: &'static str = "|u1";
    const SIZE: usize = 1;
    fn write_le(self, out: &mut Vec<u8>) {
        out.push(self);
    }
    fn read_le(bytes: &[u8]) -> Self {
        bytes[0]
    }
}

impl NpyElement for f32 {
    const DESCR: &'static str = "<f4";
    const SIZE: usize = 4;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes[..4].try_into().unwrap())
    }
}

impl NpyElement for f64 {
    const DESCR: &'static str = "<f8";
    const SIZE: usize = 8;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().unwrap())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NpyHeader {
    pub descr: String,
    pub fortran_order: bool,
    pub shape: Vec<usize>,
}

fn header_text(descr: &str, shape: &[usize]) -> String {
    let dims = match shape {
        [n] => format!("({n},)"),
        _ => format!("({})", shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")),
    };
    format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': {dims}, }}")
}

/// Serializes an array in logical (row-major) order.
pub fn to_npy_bytes<T: NpyElement, D: Dimension>(array: ArrayView<T, D>) -> Vec<u8> {
    let mut header = header_text(T::DESCR, array.shape());
    // Magic, version and length take 10 bytes; pad so data starts 64-aligned.
    let unpadded = 10 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');
    let mut out = Vec::with_capacity(10 + header.len() + array.len() * T::SIZE);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    array.iter().for_each(|&v| v.write_le(&mut out));
    out
}

pub fn write_npy<T: NpyElement, D: Dimension, W: Write>(w: &mut W, array: ArrayView<T, D>) -> std::io::Result<()> {
    w.write_all(&to_npy_bytes(array))
}

/// Splits a serialized array into its header and data bytes.
pub fn parse_header(bytes: &[u8]) -> Result<(NpyHeader, &[u8]), TrajError> {
    let bad = |m: &str| TrajError::Format(m.to_string());
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(bad("bad NPY magic"));
    }
    let (len, start) = match bytes[6] {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 if bytes.len() >= 12 => (u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize, 12),
        v => return Err(TrajError::Format(format!("unsupported NPY version {v}"))),
    };
    let text = bytes.get(start..start + len).ok_or_else(|| bad("truncated NPY header"))?;
    let text = std::str::from_utf8(text).map_err(|_| bad("NPY header is not text"))?;
    Ok((parse_dict(text)?, &bytes[start + len..]))
}

/// Parses the Python dict literal in an NPY header.
fn parse_dict(text: &str) -> Result<NpyHeader, TrajError> {
    let bad = |m: String| TrajError::Format(m);
    let body = text.trim().strip_prefix('{').and_then(|t| t.strip_suffix('}')).ok_or_else(|| bad(format!("NPY header is not a dict: {text}")))?;
    let (mut descr, mut fortran, mut shape) = (None, None, None);
    let mut rest = body.trim();
    while !rest.is_empty() {
        let key_end = rest[1..].find(rest.as_bytes()[0] as char).map(|i| i + 1);
        let (key, after) = match (rest.as_bytes()[0], key_end) {
            (b'\'' | b'"', Some(end)) => (&rest[1..end], rest[end + 1..].trim_start()),
            _ => return Err(bad(format!("bad key in NPY header: {text}"))),
        };
        let after = after.strip_prefix(':').ok_or_else(|| bad(format!("missing ':' in NPY header: {text}")))?.trim_start();
        let (value, after) = if after.starts_with('(') {
            let end = after.find(')').ok_or_else(|| bad("unterminated shape".into()))?;
            (&after[..=end], &after[end + 1..])
        } else {
            let end = after.find(',').unwrap_or(after.len());
            (after[..end].trim(), &after[end..])
        };
        match key {
            "descr" => descr = Some(value.trim_matches(|c| c == '\'' || c == '"').to_string()),
            "fortran_order" => {
                fortran = Some(match value {
                    "True" => true,
                    "False" => false,
                    v => return Err(bad(format!("bad fortran_order {v}"))),
                })
            }
            "shape" => {
                let inner = &value[1..value.len() - 1];
                let dims: Result<Vec<usize>, _> =
                    inner.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect();
                shape = Some(dims.map_err(|_| bad(format!("bad shape {value}")))?);
            }
            k => return Err(bad(format!("unknown NPY header key {k}"))),
        }
        rest = after.trim_start().strip_prefix(',').unwrap_or(after).trim_start();
    }
    match (descr, fortran, shape) {
        (Some(descr), Some(fortran_order), Some(shape)) => Ok(NpyHeader { descr, fortran_order, shape }),
        _ => Err(bad(format!("incomplete NPY header: {text}"))),
    }
}

/// Parses an array whose dtype must be exactly `T`.
pub fn from_npy_bytes<T: NpyElement>(bytes: &[u8]) -> Result<ArrayD<T>, TrajError> {
    let (header, data) = parse_header(bytes)?;
    if header.descr != T::DESCR {
        return Err(TrajError::Format(format!("dtype {} where {} was expected", header.descr, T::DESCR)));
    }
    if header.fortran_order {
        return Err(TrajError::Format("Fortran-order arrays are not supported".into()));
    }
    let count: usize = header.shape.iter().product();
    if data.len() != count * T::SIZE {
        return Err(TrajError::Format(format!("NPY data has {} bytes, shape {:?} needs {}", data.len(), header.shape, count * T::SIZE)));
    }
    let values: Vec<T> = data.chunks_exact(T::SIZE).map(T::read_le).collect();
    Ok(ArrayD::from_shape_vec(IxDyn(&header.shape), values).expect("length checked"))
}
