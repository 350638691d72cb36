use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{NetworkModel, Tensor, Weights};
use super::{ModelConfig, TrainManifest};
use crate::dataset::NormalizerParams;
use crate::deadreckon::Calibration;
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "whonet-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    config: ModelConfig,
    wheel_radius_m: Calibration,
    normalizer: Option<NormalizerParams>,
    tensors: Vec<Tensor>,
    manifest: Option<TrainManifest>,
}

/// Write the model as pretty-printed JSON. Floats are written in shortest
/// round-trip form, so loading restores every weight bit for bit.
pub fn save_model(model: &NetworkModel, path: impl AsRef<Path>) -> Result<()> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        config: model.config.clone(),
        wheel_radius_m: model.calibration,
        normalizer: model.normalizer.clone(),
        tensors: model.weights.to_tensors(&model.config),
        manifest: model.manifest.clone(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &file)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<NetworkModel> {
    let file: ModelFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if file.format != MODEL_FORMAT {
        return Err(Error::Schema(format!("not a model file (format `{}`)", file.format)));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::Version(file.version));
    }
    file.config.validate()?;
    if let Some(n) = &file.normalizer {
        n.validate()?;
        if n.dim() != file.config.input_dim {
            return Err(Error::Shape { expected: file.config.input_dim, got: n.dim() });
        }
    }
    let weights = Weights::from_tensors(&file.config, &file.tensors)?;
    Ok(NetworkModel {
        config: file.config,
        weights,
        normalizer: file.normalizer,
        calibration: file.wheel_radius_m,
        manifest: file.manifest,
    })
}
