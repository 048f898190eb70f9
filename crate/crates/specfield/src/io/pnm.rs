//! Binary PGM (P5) and PPM (P6) writers, maxval 255.

use std::path::Path;

use crate::error::{CliError, CliResult};
use crate::io::write_file;

pub fn encode_pgm(width: usize, height: usize, gray: &[u8]) -> Vec<u8> {
    assert_eq!(gray.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(gray);
    out
}

pub fn encode_ppm(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    assert_eq!(rgb.len(), width * height * 3);
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

pub fn write_pgm(width: usize, height: usize, gray: &[u8], path: &Path) -> CliResult<()> {
    write_file(path, &encode_pgm(width, height, gray))
}

pub fn write_ppm(width: usize, height: usize, rgb: &[u8], path: &Path) -> CliResult<()> {
    write_file(path, &encode_ppm(width, height, rgb))
}

/// Linear quantization of scalar data to 8 bits over a caller-fixed range.
pub fn quantize(values: &[f64], lo: f64, hi: f64) -> Vec<u8> {
    let span = (hi - lo).max(1e-12);
    values
        .iter()
        .map(|&v| (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

/// Minimal P5 parser used by round-trip tests (independent of the writer).
pub fn parse_pgm(bytes: &[u8], path: &Path) -> CliResult<(usize, usize, Vec<u8>)> {
    let err = |m: &str| CliError::format(path, m.to_string());
    let mut fields = Vec::new();
    let mut pos = 0usize;
    while fields.len() < 4 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(&bytes[start..pos]);
        if fields.len() == 4 {
            pos += 1; // single whitespace after maxval
            break;
        }
    }
    if fields.len() != 4 || fields[0] != b"P5" {
        return Err(err("not a binary PGM"));
    }
    let width: usize = std::str::from_utf8(fields[1])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| err("bad width"))?;
    let height: usize = std::str::from_utf8(fields[2])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| err("bad height"))?;
    if fields[3] != b"255" {
        return Err(err("maxval must be 255"));
    }
    let data = bytes[pos..].to_vec();
    if data.len() != width * height {
        return Err(err("payload size mismatch"));
    }
    Ok((width, height, data))
}
