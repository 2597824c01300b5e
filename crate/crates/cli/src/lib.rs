// SPDX-License-Identifier: MIT OR Apache-2.0

//! Experiment runner behind the `chaoscope` binary.
//!
//! A run reads one JSON config, executes one experiment, stages its CSV and
//! JSON outputs, moves them into the output directory and writes
//! `manifest.json` last.

pub mod config;
pub mod experiments;
pub mod fixtures;
pub mod report;

use std::path::{Path, PathBuf};

use chaoscope_core::Error as CoreError;
use thiserror::Error;

pub use config::{Experiment, ExperimentConfig, OUTPUT_DIR_ENV};
pub use fixtures::{write_fixture, FixtureKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Argument(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Csv(_) => EXIT_IO,
            CliError::Core(e) if e.is_numeric() => EXIT_NUMERIC,
            CliError::Core(CoreError::Io(_)) => EXIT_IO,
            _ => EXIT_CONFIG,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub manifest: PathBuf,
    pub config_hash: String,
    pub files: Vec<String>,
}

/// Parse and check a config without running it; returns its hash.
pub fn validate_config(path: &Path) -> Result<String, CliError> {
    let cfg = ExperimentConfig::load(path)?;
    cfg.validate()?;
    cfg.output_dir()?;
    Ok(cfg.hash())
}

pub fn run_config(path: &Path) -> Result<RunOutcome, CliError> {
    let started_at = report::now();
    let cfg = ExperimentConfig::load(path)?;
    cfg.validate()?;
    let output_dir = cfg.output_dir()?;
    let mut inputs = vec![report::digest_file(path, path.display().to_string())?];
    for p in cfg.input_files() {
        inputs.push(report::digest_file(p, p.display().to_string())?);
    }
    let mut staging = report::Staging::new(&output_dir)?;
    experiments::execute(&cfg, &mut staging)?;
    let files = staging.files().to_vec();
    let manifest = report::RunManifest {
        config_hash: cfg.hash(),
        version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.experiment.name(),
        started_at,
        finished_at: String::new(),
        inputs,
        outputs: Vec::new(),
    };
    let manifest = staging.commit(&output_dir, manifest)?;
    Ok(RunOutcome {
        output_dir,
        manifest,
        config_hash: cfg.hash(),
        files,
    })
}
