use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SplitSpec, Standardizer};
use crate::error::{Error, Result};
use crate::model::{Activation, Layer, Model, TrainConfig, TrainHistory};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// JSON formatter that writes every float with 17 significant digits.
struct SeventeenDigits;

impl serde_json::ser::Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(super::format_f64(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }
}

pub(crate) fn to_json_line<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SeventeenDigits);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    /// `output_dim` rows of `input_dim` weights.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

/// Serialized model plus everything needed to reproduce or evaluate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub input_dim: usize,
    pub output_dim: usize,
    pub layers: Vec<LayerRecord>,
    pub penalty_slope: f64,
    pub prototype_file_reference: Option<String>,
    pub training_config: TrainConfig,
    #[serde(default)]
    pub final_metrics: BTreeMap<String, f64>,
    #[serde(default)]
    pub standardization: Option<Standardizer>,
    #[serde(default)]
    pub split: Option<SplitSpec>,
}

impl Checkpoint {
    pub fn from_model(model: &Model, training_config: &TrainConfig, prototype_file_reference: Option<String>) -> Self {
        Self {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            input_dim: model.input_dim(),
            output_dim: model.output_dim(),
            layers: model
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    weights: l.weight_rows(),
                    biases: l.biases().to_vec(),
                    activation: l.activation(),
                })
                .collect(),
            penalty_slope: training_config.penalty_slope,
            prototype_file_reference,
            training_config: training_config.clone(),
            final_metrics: BTreeMap::new(),
            standardization: None,
            split: None,
        }
    }

    pub fn phi(&self) -> f64 {
        self.penalty_slope * self.output_dim as f64
    }

    pub fn to_model(&self) -> Result<Model> {
        let layers = self
            .layers
            .iter()
            .map(|r| Layer::new(r.weights.clone(), r.biases.clone(), r.activation))
            .collect::<Result<Vec<_>>>()?;
        let model = Model::new(layers)?;
        if model.input_dim() != self.input_dim || model.output_dim() != self.output_dim {
            return Err(Error::invalid(format!(
                "layers describe a {}→{} model but the header says {}→{}",
                model.input_dim(),
                model.output_dim(),
                self.input_dim,
                self.output_dim
            )));
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        to_json_line(self)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Loads and validates a checkpoint; structural problems are reported as
    /// [`Error::Format`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let format = |message: String| Error::Format { path: path.to_path_buf(), message };
        let ckpt: Checkpoint = serde_json::from_slice(&bytes).map_err(|e| format(e.to_string()))?;
        if ckpt.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(format(format!(
                "schema version {} is not supported (expected {CHECKPOINT_SCHEMA_VERSION})",
                ckpt.schema_version
            )));
        }
        ckpt.to_model().map_err(|e| format(e.to_string()))?;
        Ok(ckpt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_accuracy: f64,
    pub lr: f64,
}

/// One JSON object per epoch.
pub fn write_metrics_jsonl(path: impl AsRef<Path>, history: &TrainHistory) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (epoch, ((&mean_loss, &val_accuracy), &lr)) in
        history.epoch_loss.iter().zip(&history.val_accuracy).zip(&history.learning_rate).enumerate()
    {
        out.extend(to_json_line(&EpochMetrics { epoch, mean_loss, val_accuracy, lr })?);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
