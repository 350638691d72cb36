//! Optional TOML run configuration. Command-line flags override it and it
//! overrides the built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use whonet::dataset::{Schema, SyntheticConfig, WindowOptions};
use whonet::deadreckon::{Calibration, DEFAULT_MAX_SPEED, SAMPLES_PER_WINDOW};
use whonet::model::{ModelConfig, TrainConfig};

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    /// Applied to every seeded component when set.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub wheel_radius_m: Option<f64>,
    pub synth: Option<SyntheticConfig>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub windows: WindowSection,
    pub eval: EvalSection,
    pub schema: Schema,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub max_speed_mps: f64,
    pub stride: usize,
}

impl Default for WindowSection {
    fn default() -> Self {
        WindowSection { max_speed_mps: DEFAULT_MAX_SPEED, stride: SAMPLES_PER_WINDOW }
    }
}

impl WindowSection {
    pub fn options(&self) -> WindowOptions {
        WindowOptions { max_speed: self.max_speed_mps, stride: self.stride }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Outage lengths in seconds; empty means all of them.
    pub outages: Vec<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn calibration(&self, flag: Option<f64>) -> Result<Calibration, CliError> {
        let r = flag.or(self.wheel_radius_m).unwrap_or(Calibration::DEFAULT_RADIUS);
        Calibration::new(r).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf).or_else(|| self.out.clone()).unwrap_or_else(|| PathBuf::from("whonet-out"))
    }
}
