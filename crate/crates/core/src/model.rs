//! Saving and loading trained models as JSON.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::TrainedClassifier;
use crate::error::{Error, Result};
use crate::hyper::ModelKind;
use crate::regress::TrainedRegressor;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum TrainedModel {
    Classifier(TrainedClassifier),
    Regressor(TrainedRegressor),
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format_version: u32,
    kind: String,
    case_name: String,
    model: TrainedModel,
}

#[derive(Serialize)]
struct EnvelopeRef<'a> {
    format_version: u32,
    kind: &'a str,
    case_name: &'a str,
    model: &'a TrainedModel,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Classifier(m) => ModelKind::Classifier(m.kind),
            TrainedModel::Regressor(m) => ModelKind::Regressor(m.kind),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrainedModel::Classifier(m) => m.dim,
            TrainedModel::Regressor(m) => m.dim,
        }
    }
}

/// Write `model` with the case it was trained on.
pub fn save(model: &TrainedModel, case_name: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let env = EnvelopeRef {
        format_version: FORMAT_VERSION,
        kind: model.kind().name(),
        case_name,
        model,
    };
    serde_json::to_writer(&mut w, &env).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Read a model file, returning the model and its case name.
pub fn load(path: impl AsRef<Path>) -> Result<(TrainedModel, String)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let env: Envelope = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if env.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported model format version {}",
            path.display(),
            env.format_version
        )));
    }
    if env.kind != env.model.kind().name() {
        return Err(Error::Format(format!(
            "{}: header says '{}' but parameters are '{}'",
            path.display(),
            env.kind,
            env.model.kind()
        )));
    }
    Ok((env.model, env.case_name))
}
