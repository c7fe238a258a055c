//! Experiment configuration: a versioned JSON document plus flag
//! overrides.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use rpsim_core::analysis::{BoundConstants, Model, RatioNotion};
use rpsim_core::generators::{DistributionSpec, PresetPolicy};
use rpsim_core::instance::Mode;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Hill-climb parameters for the adversarial command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialParams {
    pub mode: Mode,
    pub iters: u64,
    pub restarts: u64,
}

impl Default for AdversarialParams {
    fn default() -> Self {
        AdversarialParams {
            mode: Mode::UnitRange,
            iters: 300,
            restarts: 20,
        }
    }
}

/// The full experiment configuration. Every field is serialized so a
/// config round-trips losslessly and result files can echo it verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub n_list: Vec<usize>,
    pub model: Model,
    pub trials: u64,
    pub rp_samples: u64,
    pub seed: u64,
    pub constants: BoundConstants,
    pub notion: RatioNotion,
    pub preset_policy: PresetPolicy,
    pub adversarial: AdversarialParams,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub detail: bool,
    pub progress: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            n_list: vec![50, 100, 200],
            model: Model::iid(DistributionSpec::uniform01()),
            trials: 1000,
            rp_samples: 1000,
            seed: 0,
            constants: BoundConstants::default(),
            notion: RatioNotion::ExpectationOfRatio,
            preset_policy: PresetPolicy::FixedColumns,
            adversarial: AdversarialParams::default(),
            output: None,
            format: Format::Csv,
            detail: false,
            progress: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n_list.is_empty() {
            return Err(CliError::Config("n_list must be non-empty".into()));
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n < 2) {
            return Err(CliError::Config(format!("n_list entry {n} below 2")));
        }
        if self.trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        if self.rp_samples == 0 {
            return Err(CliError::Config("rp_samples must be at least 1".into()));
        }
        self.model
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.constants
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.adversarial.restarts == 0 || self.adversarial.iters == 0 {
            return Err(CliError::Config(
                "adversarial iters and restarts must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// The single n used by commands that operate on one instance size.
    pub fn first_n(&self) -> usize {
        self.n_list[0]
    }
}
