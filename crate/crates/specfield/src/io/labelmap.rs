//! `SEG1` label maps plus a paletted PPM preview.
//!
//! Layout: magic `SEG1`, u32 width, u32 height, then u16 little-endian
//! labels row-major. 65535 is the background sentinel.

use std::path::Path;

use specfield_core::segment::{LabelMap, SENTINEL};

use crate::error::CliResult;
use crate::io::{read_file, write_file, Cursor};

pub const MAGIC: &[u8; 4] = b"SEG1";

/// Distinguishable label colors; label k uses PALETTE[k % len].
pub const PALETTE: [[u8; 3]; 8] = [
    [230, 64, 52],
    [58, 110, 225],
    [70, 190, 80],
    [240, 190, 40],
    [160, 70, 200],
    [60, 200, 200],
    [240, 120, 40],
    [230, 100, 170],
];

pub fn encode(map: &LabelMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 2 * map.labels.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(map.width as u32).to_le_bytes());
    out.extend_from_slice(&(map.height as u32).to_le_bytes());
    for l in &map.labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> CliResult<LabelMap> {
    let mut c = Cursor::new(bytes, path);
    c.magic(MAGIC)?;
    let width = c.u32()? as usize;
    let height = c.u32()? as usize;
    let labels = c.u16_vec(width * height)?;
    c.expect_end()?;
    LabelMap::new(width, height, labels).map_err(|e| crate::CliError::format(path, e.to_string()))
}

pub fn write_labels(map: &LabelMap, path: &Path) -> CliResult<()> {
    write_file(path, &encode(map))
}

pub fn read_labels(path: &Path) -> CliResult<LabelMap> {
    decode(&read_file(path)?, path)
}

/// 8-bit paletted preview; the sentinel renders black.
pub fn preview_rgb(map: &LabelMap) -> Vec<u8> {
    let mut rgb = Vec::with_capacity(map.labels.len() * 3);
    for &l in &map.labels {
        if l == SENTINEL {
            rgb.extend_from_slice(&[0, 0, 0]);
        } else {
            rgb.extend_from_slice(&PALETTE[l as usize % PALETTE.len()]);
        }
    }
    rgb
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let map = LabelMap::new(3, 2, vec![0, 1, SENTINEL, 2, 2, 1]).unwrap();
        let bytes = encode(&map);
        assert_eq!(bytes.len(), 12 + 12);
        let back = decode(&bytes, Path::new("mem")).unwrap();
        assert_eq!(map, back);
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn preview_paints_sentinel_black() {
        let map = LabelMap::new(2, 1, vec![SENTINEL, 0]).unwrap();
        let rgb = preview_rgb(&map);
        assert_eq!(&rgb[..3], &[0, 0, 0]);
        assert_eq!(&rgb[3..6], &PALETTE[0]);
    }
}
