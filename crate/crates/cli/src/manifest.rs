//! `manifest.json`: what a command ran with and what it wrote.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Stage};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct FileRecord {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub seed: u64,
    pub versions: Versions,
    /// Seconds since the Unix epoch; the only field that differs between
    /// otherwise identical runs.
    pub created_unix: u64,
    pub config: &'a ExperimentConfig,
    pub files: Vec<FileRecord>,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub multiloc: &'static str,
    pub manifest_format: u32,
}

pub fn sha256_file(path: &Path) -> std::io::Result<(u64, String)> {
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok((bytes.len() as u64, digest.iter().map(|b| format!("{b:02x}")).collect()))
}

/// Hashes `files` (sorted by relative path) and writes the manifest.
pub fn write_manifest(out: &Path, command: &str, cfg: &ExperimentConfig, files: &[PathBuf]) -> Result<PathBuf, CliError> {
    let mut records = vec![];
    for f in files {
        let (bytes, sha256) = sha256_file(f).stage("manifest")?;
        let rel = f.strip_prefix(out).unwrap_or(f);
        records.push(FileRecord {
            path: rel.to_string_lossy().replace('\\', "/"),
            bytes,
            sha256,
        });
    }
    records.sort_by(|a, b| a.path.cmp(&b.path));
    records.dedup_by(|a, b| a.path == b.path);
    let manifest = Manifest {
        command,
        seed: cfg.seed,
        versions: Versions {
            multiloc: env!("CARGO_PKG_VERSION"),
            manifest_format: 1,
        },
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config: cfg,
        files: records,
    };
    let path = out.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json + "\n").stage("manifest")?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("a.txt");
        std::fs::write(&f, "abc").unwrap();
        let (n, h) = sha256_file(&f).unwrap();
        assert_eq!(n, 3);
        assert_eq!(h, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        let cfg = ExperimentConfig::default();
        let m = write_manifest(dir.path(), "simulate", &cfg, &[f.clone(), f]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(m).unwrap()).unwrap();
        assert_eq!(v["files"].as_array().unwrap().len(), 1);
        assert_eq!(v["files"][0]["path"], "a.txt");
        assert_eq!(v["seed"], 2023);
    }
}
