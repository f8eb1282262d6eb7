//! Simulation configuration and its JSON file format.
//!
//! A config file only needs the keys it changes. Missing keys take the
//! defaults of the selected scenario, so `{"scenario": "range_extension"}`
//! is a complete file. Command-line overrides are applied on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geometry::{ChannelParams, DeploymentConfig, GeometryError, ScenarioKind};
use crate::modeselect::MsPolicy;
use crate::powerctl::{PcScheme, PowerParams, SolverError, UmConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub scenario: ScenarioKind,
    pub mode_selection: MsPolicy,
    pub power_control: PcScheme,
    /// Power weight of the utility-maximizing scheme.
    pub omega: f64,
    pub drops: usize,
    pub seed: u64,
    pub deployment: DeploymentConfig,
    pub channel: ChannelParams,
    pub power: PowerParams,
    pub um: UmConfig,
    pub output_dir: PathBuf,
}

impl SimConfig {
    pub fn for_scenario(scenario: ScenarioKind) -> Self {
        SimConfig {
            scenario,
            mode_selection: MsPolicy::Hms,
            power_control: PcScheme::Um,
            omega: 1.0,
            drops: 100,
            seed: 1,
            deployment: DeploymentConfig::for_scenario(scenario),
            channel: ChannelParams::default(),
            power: PowerParams::default(),
            um: UmConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }

    /// Solver settings with this run's `omega`.
    pub fn um_config(&self) -> UmConfig {
        UmConfig { omega: self.omega, ..self.um.clone() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.drops == 0 {
            return Err(ConfigError::Invalid("drops must be at least 1".into()));
        }
        self.deployment.validate()?;
        self.channel.validate()?;
        self.power.validate()?;
        self.um_config().validate()?;
        Ok(())
    }

    pub fn from_json_str(text: &str, overrides: &Overrides) -> Result<Self, ConfigError> {
        let file: Value = serde_json::from_str(text)?;
        if !file.is_object() {
            return Err(ConfigError::Invalid("top level must be a JSON object".into()));
        }
        let scenario = match overrides.scenario {
            Some(s) => s,
            None => match file.get("scenario") {
                Some(v) => serde_json::from_value(v.clone())?,
                None => ScenarioKind::Proximity,
            },
        };
        let mut merged = serde_json::to_value(SimConfig::for_scenario(scenario))?;
        merge(&mut merged, file);
        let mut config: SimConfig = serde_json::from_value(merged)?;
        overrides.apply(&mut config);
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        Self::from_json_str(&text, overrides)
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::for_scenario(ScenarioKind::Proximity)
    }
}

/// Values given on the command line; they win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scenario: Option<ScenarioKind>,
    pub mode_selection: Option<MsPolicy>,
    pub power_control: Option<PcScheme>,
    pub omega: Option<f64>,
    pub drops: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, c: &mut SimConfig) {
        if let Some(s) = self.scenario {
            c.scenario = s;
        }
        if let Some(m) = self.mode_selection {
            c.mode_selection = m;
        }
        if let Some(p) = self.power_control {
            c.power_control = p;
        }
        if let Some(o) = self.omega {
            c.omega = o;
        }
        if let Some(d) = self.drops {
            c.drops = d;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(o) = &self.output_dir {
            c.output_dir = o.clone();
        }
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}
