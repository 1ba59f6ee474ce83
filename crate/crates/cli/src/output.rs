//! Report encodings: CSV with 17 significant digits and LF endings, pretty
//! JSON, and the binary dump of terminal radii.

use std::fmt::Write as _;

use crate::error::CliError;

/// One CSV field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell<'a> {
    Real(f64),
    Int(u64),
    Text(&'a str),
    Flag(bool),
}

impl From<f64> for Cell<'_> {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<u64> for Cell<'_> {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<u32> for Cell<'_> {
    fn from(v: u32) -> Self {
        Cell::Int(u64::from(v))
    }
}

impl From<bool> for Cell<'_> {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

impl<'a> From<&'a str> for Cell<'a> {
    fn from(v: &'a str) -> Self {
        Cell::Text(v)
    }
}

/// Reals as `d.dddddddddddddddde±x`; non-finite values as `nan`, `inf`, `-inf`.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone)]
pub struct Csv {
    columns: usize,
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { columns: header.len(), text }
    }

    pub fn row(&mut self, cells: &[Cell<'_>]) {
        assert_eq!(cells.len(), self.columns, "CSV row width differs from header");
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match *c {
                Cell::Real(v) => self.text.push_str(&format_real(v)),
                Cell::Int(v) => {
                    let _ = write!(self.text, "{v}");
                }
                Cell::Text(s) => self.text.push_str(s),
                Cell::Flag(b) => self.text.push_str(if b { "true" } else { "false" }),
            }
        }
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Pretty JSON with a trailing newline. Object keys are sorted, so equal
/// values always serialize to equal bytes.
pub fn json_bytes(v: &serde_json::Value) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("JSON values always serialize");
    b.push(b'\n');
    b
}

pub const RADII_MAGIC: &[u8; 8] = b"HBMRAD01";

/// `HBMRAD01`, the count as little-endian `u64`, then the radii as
/// little-endian `f64`.
pub fn encode_radii(radii: &[f64]) -> Vec<u8> {
    let mut b = Vec::with_capacity(16 + 8 * radii.len());
    b.extend_from_slice(RADII_MAGIC);
    b.extend_from_slice(&(radii.len() as u64).to_le_bytes());
    for r in radii {
        b.extend_from_slice(&r.to_le_bytes());
    }
    b
}

pub fn decode_radii(bytes: &[u8]) -> Result<Vec<f64>, CliError> {
    let bad = |m: &str| CliError::Io(format!("radii dump: {m}"));
    if bytes.len() < 16 || &bytes[..8] != RADII_MAGIC {
        return Err(bad("missing HBMRAD01 header"));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let body = &bytes[16..];
    if body.len() as u64 != count.saturating_mul(8) {
        return Err(bad("length does not match the recorded count"));
    }
    Ok(body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}
