//! Bit-exact readers and writers for every on-disk format.
//!
//! All multi-byte values are little-endian; all magics are 4 ASCII bytes.
//! Every writer/reader pair round-trips bitwise, pinned by golden fixtures
//! in the test suite.

pub mod checkpoint;
pub mod cube;
pub mod labelmap;
pub mod manifest;
pub mod optstate;
pub mod pnm;
pub mod poses;
pub mod response;

use std::path::Path;

use crate::error::{CliError, CliResult};

pub(crate) fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Sequential little-endian reader with byte accounting for truncation
/// errors.
pub(crate) struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    pub fn new(data: &'a [u8], path: &'a Path) -> Self {
        Cursor { data, pos: 0, path }
    }

    fn take(&mut self, n: usize) -> CliResult<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(CliError::format(
                self.path,
                format!(
                    "truncated: expected at least {} bytes, file has {}",
                    self.pos + n,
                    self.data.len()
                ),
            ));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> CliResult<()> {
        let got = self.take(4)?;
        if got != expected {
            return Err(CliError::format(
                self.path,
                format!(
                    "bad magic: expected {:?}, found {:?}",
                    String::from_utf8_lossy(expected),
                    String::from_utf8_lossy(got)
                ),
            ));
        }
        Ok(())
    }

    pub fn u32(&mut self) -> CliResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> CliResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f32(&mut self) -> CliResult<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f32_vec(&mut self, n: usize) -> CliResult<Vec<f32>> {
        let bytes = self.take(4 * n)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn f64_vec(&mut self, n: usize) -> CliResult<Vec<f64>> {
        let bytes = self.take(8 * n)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn u16_vec(&mut self, n: usize) -> CliResult<Vec<u16>> {
        let bytes = self.take(2 * n)?;
        Ok(bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn expect_end(&self) -> CliResult<()> {
        if self.pos != self.data.len() {
            return Err(CliError::format(
                self.path,
                format!(
                    "trailing data: expected exactly {} bytes, file has {}",
                    self.pos,
                    self.data.len()
                ),
            ));
        }
        Ok(())
    }
}

pub(crate) fn push_f32s(out: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn push_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}
