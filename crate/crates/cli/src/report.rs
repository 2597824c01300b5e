// SPDX-License-Identifier: MIT OR Apache-2.0

//! Staged output files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

use crate::config::hex;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Fixed 17-significant-digit rendering; non-finite values spelled out.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// `num` for values that may be undefined.
pub fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), num)
}

/// Files are written to a hidden sibling of the output directory and moved
/// into place only once the whole experiment has succeeded.
pub struct Staging {
    dir: TempDir,
    files: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: &'static str,
    pub experiment: &'static str,
    pub started_at: String,
    pub finished_at: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn digest_file(path: &Path, label: String) -> Result<FileDigest, CliError> {
    let bytes = fs::read(path)?;
    Ok(FileDigest {
        path: label,
        sha256: hex(&Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}

impl Staging {
    pub fn new(output_dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(output_dir)?;
        let parent = output_dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let dir = tempfile::Builder::new().prefix(".chaoscope-staging").tempdir_in(parent)?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn add(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.path().join(name), bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn csv<R, I>(&mut self, name: &str, header: &[String], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.into_iter().collect::<Vec<_>>())?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        self.add(name, &bytes)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, &bytes)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Move every staged file into `output_dir`, then write the manifest.
    pub fn commit(self, output_dir: &Path, mut manifest: RunManifest) -> Result<PathBuf, CliError> {
        for name in &self.files {
            manifest
                .outputs
                .push(digest_file(&self.dir.path().join(name), name.clone())?);
        }
        manifest.finished_at = now();
        for name in &self.files {
            fs::rename(self.dir.path().join(name), output_dir.join(name))?;
        }
        let staged = self.dir.path().join(MANIFEST_FILE);
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(&staged, bytes)?;
        let target = output_dir.join(MANIFEST_FILE);
        fs::rename(staged, &target)?;
        Ok(target)
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

pub fn header<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Vec<String> {
    names.into_iter().map(|s| s.as_ref().to_string()).collect()
}
