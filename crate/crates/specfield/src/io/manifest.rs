//! Dataset manifest: ordered `key = value` lines plus one
//! `file <relative-path> <sha256>` line per artifact. The loader verifies
//! every checksum.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::io::{read_file, write_file};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
    pub files: Vec<(String, String)>, // (relative path, sha256 hex)
}

impl Manifest {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str, path: &Path) -> CliResult<&str> {
        self.get(key)
            .ok_or_else(|| CliError::format(path, format!("manifest is missing key {key:?}")))
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode(manifest: &Manifest) -> String {
    let mut out = String::new();
    for (k, v) in &manifest.entries {
        out.push_str(&format!("{k} = {v}\n"));
    }
    for (path, sha) in &manifest.files {
        out.push_str(&format!("file {path} {sha}\n"));
    }
    out
}

pub fn decode(text: &str, path: &Path) -> CliResult<Manifest> {
    let mut manifest = Manifest::default();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("file ") {
            let mut parts = rest.split_whitespace();
            let (Some(rel), Some(sha), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(CliError::format(
                    path,
                    format!("line {}: expected `file <path> <sha256>`", no + 1),
                ));
            };
            manifest.files.push((rel.to_string(), sha.to_string()));
        } else if let Some((k, v)) = line.split_once('=') {
            manifest
                .entries
                .push((k.trim().to_string(), v.trim().to_string()));
        } else {
            return Err(CliError::format(
                path,
                format!("line {}: expected `key = value` or `file ...`", no + 1),
            ));
        }
    }
    Ok(manifest)
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> CliResult<()> {
    write_file(path, encode(manifest).as_bytes())
}

pub fn read_manifest(path: &Path) -> CliResult<Manifest> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::format(path, "manifest is not valid UTF-8"))?;
    decode(&text, path)
}

/// Checks every listed file's checksum against its on-disk content.
pub fn verify_files(manifest: &Manifest, root: &Path) -> CliResult<()> {
    for (rel, expected) in &manifest.files {
        let full: PathBuf = root.join(rel);
        let bytes = read_file(&full)?;
        let actual = sha256_hex(&bytes);
        if &actual != expected {
            return Err(CliError::format(
                &full,
                format!("checksum mismatch: manifest says {expected}, file hashes to {actual}"),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut m = Manifest::default();
        m.push("seed", 7);
        m.push("bands", 8);
        m.files
            .push(("train/view_000.hsc".into(), "ab".repeat(32)));
        let text = encode(&m);
        let back = decode(&text, Path::new("mem")).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn sha256_of_empty_input_is_the_known_constant() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn verification_detects_tampering() {
        let dir = std::env::temp_dir().join(format!("specfield-manifest-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let file = dir.join("data.bin");
        std::fs::write(&file, b"hello").unwrap();
        let mut m = Manifest::default();
        m.files
            .push(("data.bin".into(), sha256_hex(b"hello")));
        verify_files(&m, &dir).unwrap();
        std::fs::write(&file, b"tampered").unwrap();
        assert!(verify_files(&m, &dir).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
