//! Camera response matrix as plain text: first line `3 B`, then three rows
//! of B decimal floats, whitespace-separated.

use std::path::Path;

use specfield_core::spectral::{CameraResponse, GammaPolicy};

use crate::error::{CliError, CliResult};
use crate::io::write_file;

pub fn encode(response: &CameraResponse) -> String {
    let b = response.band_count();
    let mut out = format!("3 {b}\n");
    for r in 0..3 {
        let row: Vec<String> = response.row(r).iter().map(|v| format!("{v:.9e}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn decode(text: &str, path: &Path) -> CliResult<CameraResponse> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::format(path, "empty response file"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 2 || parts[0] != "3" {
        return Err(CliError::format(
            path,
            format!("line 1: expected `3 B`, found {header:?}"),
        ));
    }
    let bands: usize = parts[1]
        .parse()
        .map_err(|_| CliError::format(path, format!("line 1: bad band count {:?}", parts[1])))?;
    let mut matrix = Vec::with_capacity(3 * bands);
    for row in 0..3 {
        let (no, line) = lines.next().ok_or_else(|| {
            CliError::format(path, format!("missing row {} of 3", row + 1))
        })?;
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != bands {
            return Err(CliError::format(
                path,
                format!(
                    "line {}: expected {bands} values, found {}",
                    no + 1,
                    values.len()
                ),
            ));
        }
        for v in values {
            matrix.push(v.parse::<f64>().map_err(|_| {
                CliError::format(path, format!("line {}: bad number {v:?}", no + 1))
            })?);
        }
    }
    CameraResponse::new(matrix, bands, GammaPolicy::Linear)
        .map_err(|e| CliError::format(path, e.to_string()))
}

pub fn write_response(response: &CameraResponse, path: &Path) -> CliResult<()> {
    write_file(path, encode(response).as_bytes())
}

pub fn read_response(path: &Path) -> CliResult<CameraResponse> {
    let bytes = crate::io::read_file(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::format(path, "response file is not valid UTF-8"))?;
    decode(&text, path)
}
