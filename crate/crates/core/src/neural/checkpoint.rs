//! Flat little-endian `f64` parameter files with a JSON shape manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::params::{ParamBlock, Parameterized};
use super::NeuralError;

const FORMAT: &str = "rowdrive-params/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub kind: String,
    pub count: usize,
    pub blocks: Vec<ParamBlock>,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

pub fn encode(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode(bytes: &[u8]) -> Result<Vec<f64>, NeuralError> {
    if bytes.len() % 8 != 0 {
        return Err(NeuralError::Checkpoint(format!("{} bytes is not a whole number of f64", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Write `<stem>.bin` and `<stem>.json`.
pub fn save<M: Parameterized + ?Sized>(stem: &Path, kind: &str, model: &M) -> Result<(), NeuralError> {
    let (bin, json) = paths(stem);
    let manifest = Manifest {
        format: FORMAT.into(),
        kind: kind.into(),
        count: model.param_count(),
        blocks: model.layout().blocks().to_vec(),
    };
    fs::write(&bin, encode(model.params()))?;
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    fs::write(&json, text + "\n")?;
    Ok(())
}

/// Load parameters saved by [`save`] into a model of identical layout.
pub fn load<M: Parameterized + ?Sized>(stem: &Path, kind: &str, model: &mut M) -> Result<(), NeuralError> {
    let (bin, json) = paths(stem);
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&json)?)
        .map_err(|e| NeuralError::Checkpoint(format!("{}: {e}", json.display())))?;
    if manifest.format != FORMAT || manifest.kind != kind {
        return Err(NeuralError::Checkpoint(format!(
            "{} holds {} {}, expected {FORMAT} {kind}",
            json.display(),
            manifest.format,
            manifest.kind
        )));
    }
    if manifest.blocks != model.layout().blocks() {
        return Err(NeuralError::Checkpoint(format!("{} has a different parameter layout", json.display())));
    }
    let values = decode(&fs::read(&bin)?)?;
    if values.len() != manifest.count {
        return Err(NeuralError::Checkpoint(format!(
            "{} holds {} values, manifest says {}",
            bin.display(),
            values.len(),
            manifest.count
        )));
    }
    model.set_params(&values)
}
