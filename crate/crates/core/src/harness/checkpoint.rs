use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adcore::ParamSet;
use crate::{Error, Result};

/// JSON manifest stored next to the raw values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub shapes: Vec<Vec<usize>>,
    pub values: usize,
    pub dtype: String,
    pub byte_order: String,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

/// Writes `<stem>.bin` (little-endian `f64` values, tensor after tensor) and `<stem>.json`.
pub fn save_checkpoint(stem: impl AsRef<Path>, params: &ParamSet) -> Result<()> {
    let (bin, json) = paths(stem.as_ref());
    let bytes: Vec<u8> = params.values().flat_map(f64::to_le_bytes).collect();
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let manifest = CheckpointManifest {
        shapes: params.shapes(),
        values: params.len(),
        dtype: "f64".into(),
        byte_order: "little".into(),
    };
    fs::write(&json, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&json, e))
}

pub fn load_checkpoint(stem: impl AsRef<Path>) -> Result<ParamSet> {
    let (bin, json) = paths(stem.as_ref());
    let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    if manifest.dtype != "f64" || manifest.byte_order != "little" {
        return Err(Error::Config(format!(
            "unsupported checkpoint encoding {} / {}",
            manifest.dtype, manifest.byte_order
        )));
    }
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    if bytes.len() != 8 * manifest.values {
        return Err(Error::Shape(format!(
            "checkpoint holds {} bytes, manifest promises {} values",
            bytes.len(),
            manifest.values
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of 8")))
        .collect();
    ParamSet::from_shapes(&manifest.shapes, &values)
}
