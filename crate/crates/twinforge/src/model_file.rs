//! Portable model files: JSON with explicit layer matrices so a model can be
//! re-used by external tooling without this codebase.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use twinforge_core::rom::Normalization;
use twinforge_core::RomModel;

use crate::store::write_atomic;

pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("version mismatch: file has {found}, supported is {supported}")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("parse failure: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
}

/// On-disk schema; matrices are row-major nested arrays.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    n: usize,
    i: usize,
    #[serde(rename = "W1")]
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    #[serde(rename = "W2")]
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
    out_scale: f64,
    norm: Normalization,
}

pub fn save_model(path: &Path, model: &RomModel) -> Result<(), ModelFileError> {
    model
        .validate()
        .map_err(|e| ModelFileError::Invalid(e.to_string()))?;
    let file = ModelFile {
        version: MODEL_FILE_VERSION,
        n: model.n,
        i: model.aug,
        w1: model.w1.clone(),
        b1: model.b1.clone(),
        w2: model.w2.clone(),
        b2: model.b2.clone(),
        out_scale: model.out_scale,
        norm: model.norm.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&file)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<RomModel, ModelFileError> {
    let file: ModelFile = serde_json::from_slice(&fs::read(path)?)?;
    if file.version != MODEL_FILE_VERSION {
        return Err(ModelFileError::VersionMismatch {
            found: file.version,
            supported: MODEL_FILE_VERSION,
        });
    }
    let model = RomModel {
        n: file.n,
        aug: file.i,
        w1: file.w1,
        b1: file.b1,
        w2: file.w2,
        b2: file.b2,
        out_scale: file.out_scale,
        norm: file.norm,
    };
    model
        .validate()
        .map_err(|e| ModelFileError::Invalid(e.to_string()))?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use twinforge_core::rom::init_model;

    #[test]
    fn model_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut model = init_model(2, 3, 11).unwrap();
        model.out_scale = 1.2345678901234567;
        save_model(&path, &model).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn wrong_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = init_model(1, 0, 0).unwrap();
        save_model(&path, &model).unwrap();
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"version\": 1", "\"version\": 99");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(ModelFileError::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn inconsistent_dimensions_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = init_model(2, 1, 3).unwrap();
        save_model(&path, &model).unwrap();
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"i\": 1", "\"i\": 2");
        fs::write(&path, text).unwrap();
        assert!(matches!(load_model(&path), Err(ModelFileError::Invalid(_))));
    }
}
