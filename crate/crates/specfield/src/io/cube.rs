//! `HSC1` spectral cube container.
//!
//! Layout: magic `HSC1`, u32 width, u32 height, u32 bands, then
//! width*height*bands f32 values as band-major planes, row-major within a
//! plane. A 1x1x1 cube is exactly 20 bytes.

use std::path::Path;

use specfield_core::cube::SpectralCube;

use crate::error::{CliError, CliResult};
use crate::io::{push_f32s, read_file, write_file, Cursor};

pub const MAGIC: &[u8; 4] = b"HSC1";

pub fn encode(cube: &SpectralCube) -> CliResult<Vec<u8>> {
    if let Some(idx) = cube.data().iter().position(|v| v.is_nan()) {
        return Err(CliError::usage(format!(
            "cube contains NaN at element {idx}"
        )));
    }
    let mut out = Vec::with_capacity(16 + 4 * cube.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(cube.width() as u32).to_le_bytes());
    out.extend_from_slice(&(cube.height() as u32).to_le_bytes());
    out.extend_from_slice(&(cube.bands() as u32).to_le_bytes());
    push_f32s(&mut out, cube.data());
    Ok(out)
}

pub fn decode(bytes: &[u8], path: &Path) -> CliResult<SpectralCube> {
    let mut c = Cursor::new(bytes, path);
    c.magic(MAGIC)?;
    let width = c.u32()? as usize;
    let height = c.u32()? as usize;
    let bands = c.u32()? as usize;
    let data = c.f32_vec(width * height * bands)?;
    c.expect_end()?;
    if let Some(idx) = data.iter().position(|v| v.is_nan()) {
        return Err(CliError::format(
            path,
            format!("NaN payload value at element {idx}"),
        ));
    }
    SpectralCube::from_data(width, height, bands, data)
        .map_err(|e| CliError::format(path, e.to_string()))
}

pub fn write_cube(cube: &SpectralCube, path: &Path) -> CliResult<()> {
    write_file(path, &encode(cube)?)
}

pub fn read_cube(path: &Path) -> CliResult<SpectralCube> {
    decode(&read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one_cube_is_twenty_bytes() {
        let cube = SpectralCube::from_data(1, 1, 1, vec![0.5]).unwrap();
        let bytes = encode(&cube).unwrap();
        assert_eq!(bytes.len(), 20);
        assert_eq!(&bytes[..4], b"HSC1");
    }

    #[test]
    fn round_trip_is_bitwise() {
        let mut cube = SpectralCube::zeros(3, 2, 4);
        for (i, v) in cube.data_mut().iter_mut().enumerate() {
            *v = (i as f32 * 0.37).sin();
        }
        let bytes = encode(&cube).unwrap();
        let back = decode(&bytes, Path::new("mem")).unwrap();
        assert_eq!(cube, back);
        assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn truncation_names_byte_counts() {
        let cube = SpectralCube::zeros(2, 2, 2);
        let mut bytes = encode(&cube).unwrap();
        bytes.truncate(bytes.len() - 5);
        let err = decode(&bytes, Path::new("short.hsc")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("truncated"), "{msg}");
        assert!(msg.contains("48"), "{msg}"); // expected payload end
    }

    #[test]
    fn bad_magic_is_rejected() {
        let cube = SpectralCube::zeros(1, 1, 1);
        let mut bytes = encode(&cube).unwrap();
        bytes[0] = b'X';
        assert!(decode(&bytes, Path::new("bad")).is_err());
    }

    #[test]
    fn nan_payload_is_rejected_with_index() {
        let cube = SpectralCube::zeros(2, 1, 1);
        let mut bytes = encode(&cube).unwrap();
        bytes[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
        let err = decode(&bytes, Path::new("nan")).unwrap_err().to_string();
        assert!(err.contains("element 0"), "{err}");
    }
}
