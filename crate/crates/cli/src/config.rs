// SPDX-License-Identifier: MIT OR Apache-2.0

//! Experiment configuration documents.

use std::fs;
use std::path::{Path, PathBuf};

use chaoscope_core::engine::{Hooks, ModelConfig, PerturbationMode};
use chaoscope_core::residual::CorrelationMode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Overrides `output_dir` of every config when set.
pub const OUTPUT_DIR_ENV: &str = "CHAOSCOPE_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds the stochastic parts of an experiment (toy datasets). Model
    /// weights use `model.config.seed`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub input: Option<InputSection>,
    pub experiment: Experiment,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    Seeded,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default)]
    pub config: Option<ModelConfig>,
    #[serde(default)]
    pub weights_path: Option<PathBuf>,
    #[serde(default)]
    pub init: Init,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    #[serde(default)]
    pub tokens: Option<Vec<u32>>,
    /// Byte-level tokens: one id per UTF-8 byte.
    #[serde(default)]
    pub text: Option<String>,
}

impl InputSection {
    pub fn token_ids(&self) -> Result<Vec<u32>, CliError> {
        match (&self.tokens, &self.text) {
            (Some(t), None) => Ok(t.clone()),
            (None, Some(s)) => Ok(s.bytes().map(u32::from).collect()),
            _ => Err(CliError::Config(
                "input needs exactly one of `tokens` or `text`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Logistic { r: f64 },
    Linear { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetParams {
    pub size: usize,
    pub prompt_len: usize,
    pub alphabet_size: usize,
}

fn yes() -> bool {
    true
}

fn burn_in() -> usize {
    1000
}

fn iters() -> usize {
    100_000
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Trace {
        #[serde(default)]
        hooks: Hooks,
    },
    Decompose {
        /// All tokens when absent.
        #[serde(default)]
        tokens: Option<Vec<usize>>,
        #[serde(default)]
        hooks: Hooks,
    },
    Growth {
        #[serde(default = "yes")]
        normalize_input: bool,
        #[serde(default)]
        max_interval: Option<usize>,
        /// Analyse a recorded curve instead of running the model.
        #[serde(default)]
        curve_path: Option<PathBuf>,
        #[serde(default)]
        hooks: Hooks,
    },
    Correlate {
        #[serde(default)]
        mode: CorrelationMode,
        #[serde(default)]
        hooks: Hooks,
    },
    Geometry {
        /// Last token when absent.
        #[serde(default)]
        token: Option<usize>,
        #[serde(default)]
        hooks: Hooks,
    },
    Project {
        #[serde(default)]
        token: Option<usize>,
        /// Analyse a recorded ledger instead of running the model.
        #[serde(default)]
        ledger_path: Option<PathBuf>,
        #[serde(default)]
        hooks: Hooks,
    },
    QleIntra {
        token: usize,
        #[serde(default)]
        element: Option<usize>,
        mode: PerturbationMode,
        span: (usize, usize),
        #[serde(default = "yes")]
        halving_check: bool,
        /// Optional strictly descending magnitudes for a delta sweep.
        #[serde(default)]
        sweep: Option<Vec<f64>>,
        #[serde(default)]
        hooks: Hooks,
    },
    QleField {
        layer: usize,
        token: usize,
        mode: PerturbationMode,
        /// `layer + 1` when absent.
        #[serde(default)]
        observed: Option<usize>,
        #[serde(default)]
        hooks: Hooks,
    },
    QleIter {
        /// Last prompt token when absent.
        #[serde(default)]
        token: Option<usize>,
        #[serde(default)]
        element: Option<usize>,
        mode: PerturbationMode,
        steps: usize,
    },
    Suppress {
        #[serde(default)]
        grid: Option<Vec<f64>>,
        /// Grid `0, step, 2 step, ..` up to 100 when `grid` is absent.
        #[serde(default)]
        step: Option<f64>,
        #[serde(default)]
        dataset_path: Option<PathBuf>,
        #[serde(default)]
        dataset: Option<DatasetParams>,
        /// Externally produced logits; replaces the model run.
        #[serde(default)]
        logits_path: Option<PathBuf>,
    },
    LyapunovMap {
        map: MapSpec,
        #[serde(default = "half")]
        x0: f64,
        #[serde(default = "burn_in")]
        burn_in: usize,
        #[serde(default = "iters")]
        iters: usize,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Trace { .. } => "trace",
            Experiment::Decompose { .. } => "decompose",
            Experiment::Growth { .. } => "growth",
            Experiment::Correlate { .. } => "correlate",
            Experiment::Geometry { .. } => "geometry",
            Experiment::Project { .. } => "project",
            Experiment::QleIntra { .. } => "qle-intra",
            Experiment::QleField { .. } => "qle-field",
            Experiment::QleIter { .. } => "qle-iter",
            Experiment::Suppress { .. } => "suppress",
            Experiment::LyapunovMap { .. } => "lyapunov-map",
        }
    }

    /// Files the experiment reads besides the config itself.
    pub fn input_files(&self) -> Vec<&Path> {
        let paths: [Option<&PathBuf>; 4] = match self {
            Experiment::Growth { curve_path, .. } => [curve_path.as_ref(), None, None, None],
            Experiment::Project { ledger_path, .. } => [ledger_path.as_ref(), None, None, None],
            Experiment::Suppress {
                dataset_path,
                logits_path,
                ..
            } => [dataset_path.as_ref(), logits_path.as_ref(), None, None],
            _ => [None; 4],
        };
        paths.into_iter().flatten().map(PathBuf::as_path).collect()
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Parse `path`, resolving relative file references against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(m) = &mut self.model {
            if let Some(p) = &mut m.weights_path {
                fix(p);
            }
        }
        if let Some(p) = &mut self.output_dir {
            fix(p);
        }
        match &mut self.experiment {
            Experiment::Growth { curve_path: Some(p), .. } | Experiment::Project { ledger_path: Some(p), .. } => fix(p),
            Experiment::Suppress {
                dataset_path,
                logits_path,
                ..
            } => {
                for p in [dataset_path, logits_path].into_iter().flatten() {
                    fix(p);
                }
            }
            _ => {}
        }
    }

    /// Files read by the run, including a weight file.
    pub fn input_files(&self) -> Vec<&Path> {
        let mut files = self.experiment.input_files();
        if let Some(p) = self.model.as_ref().and_then(|m| m.weights_path.as_ref()) {
            files.insert(0, p.as_path());
        }
        files
    }

    /// Output directory after the environment override.
    pub fn output_dir(&self) -> Result<PathBuf, CliError> {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            return Ok(PathBuf::from(dir));
        }
        self.output_dir
            .clone()
            .ok_or_else(|| CliError::Config("no output_dir given and CHAOSCOPE_OUTPUT_DIR unset".into()))
    }

    /// SHA-256 of the canonical typed config without `output_dir`; defaults
    /// are filled in, so spelling out a default does not change the hash.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serialises");
        if let serde_json::Value::Object(map) = &mut value {
            map.remove("output_dir");
        }
        let bytes = serde_json::to_vec(&value).expect("value serialises");
        hex(&Sha256::digest(bytes))
    }

    /// Structural checks that need no model run.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(m) = &self.model {
            match (&m.config, &m.weights_path) {
                (Some(c), None) => c.validate().map_err(|e| CliError::Config(e.to_string()))?,
                (None, Some(_)) => {}
                _ => {
                    return Err(CliError::Config(
                        "model needs exactly one of `config` or `weights_path`".into(),
                    ))
                }
            }
        }
        if let Some(input) = &self.input {
            input.token_ids()?;
        }
        for p in self.input_files() {
            if !p.is_file() {
                return Err(CliError::Config(format!("input file {} does not exist", p.display())));
            }
        }
        let needs_model = match &self.experiment {
            Experiment::LyapunovMap { .. } => false,
            Experiment::Growth { curve_path, .. } => curve_path.is_none(),
            Experiment::Project { ledger_path, .. } => ledger_path.is_none(),
            Experiment::Suppress { logits_path, .. } => logits_path.is_none(),
            _ => true,
        };
        if needs_model && self.model.is_none() {
            return Err(CliError::Config(format!(
                "experiment {} needs a model section",
                self.experiment.name()
            )));
        }
        let needs_input = match &self.experiment {
            Experiment::LyapunovMap { .. } | Experiment::Suppress { .. } => false,
            Experiment::Growth { curve_path, .. } => curve_path.is_none(),
            Experiment::Project { ledger_path, .. } => ledger_path.is_none(),
            _ => true,
        };
        if needs_input && self.input.is_none() {
            return Err(CliError::Config(format!(
                "experiment {} needs an input section",
                self.experiment.name()
            )));
        }
        if let Experiment::Suppress {
            grid,
            step,
            dataset_path,
            dataset,
            ..
        } = &self.experiment
        {
            if grid.is_some() == step.is_some() {
                return Err(CliError::Config("suppress needs exactly one of `grid` or `step`".into()));
            }
            if dataset_path.is_some() == dataset.is_some() {
                return Err(CliError::Config(
                    "suppress needs exactly one of `dataset_path` or `dataset`".into(),
                ));
            }
        }
        Ok(())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
