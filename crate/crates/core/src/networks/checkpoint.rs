//! JSON checkpoints: the network configuration plus every parameter array as
//! shape and row-major values. Floats are written in shortest round-trip form,
//! so a save/load cycle is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::NetworkConfig;
use super::params::NetworkParams;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "jlstm-checkpoint/1";

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    config: NetworkConfig,
    parameters: Vec<Array>,
}

#[derive(Serialize, Deserialize)]
struct Array {
    name: String,
    shape: [usize; 2],
    values: Vec<f64>,
}

pub fn write_checkpoint(params: &NetworkParams) -> Result<String> {
    let doc = Document {
        format: CHECKPOINT_FORMAT.to_string(),
        config: params.config.clone(),
        parameters: params
            .named_arrays()
            .into_iter()
            .map(|(name, (r, c), values)| Array {
                name,
                shape: [r, c],
                values,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

pub fn read_checkpoint(text: &str) -> Result<NetworkParams> {
    let doc: Document = serde_json::from_str(text).map_err(|e| Error::malformed("checkpoint", e))?;
    if doc.format != CHECKPOINT_FORMAT {
        return Err(Error::malformed("checkpoint", format!("unsupported format `{}`", doc.format)));
    }
    let arrays: Vec<_> = doc
        .parameters
        .into_iter()
        .map(|a| (a.name, (a.shape[0], a.shape[1]), a.values))
        .collect();
    NetworkParams::from_named_arrays(doc.config, &arrays)
}

pub fn save_checkpoint(params: &NetworkParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, write_checkpoint(params)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<NetworkParams> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    read_checkpoint(&fs::read_to_string(path)?)
}
