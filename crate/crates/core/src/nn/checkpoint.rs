//! Model checkpoints: a JSON header followed by the raw parameter blob.
//!
//! ```text
//! container header (payload Checkpoint)
//! header_len u32, header JSON (UTF-8)
//! param_count u64, params as little-endian dtype values
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{LayerSpec, Model};
use super::scalar::Scalar;
use crate::container::{self, PayloadType};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub arch: Vec<LayerSpec>,
    pub input: (usize, usize),
    /// Feature resolution the model was trained for.
    pub n: usize,
    pub seed: u64,
    pub epoch: usize,
    pub metrics: BTreeMap<String, f64>,
    pub dtype: String,
}

pub fn save_checkpoint<T: Scalar>(model: &Model<T>, header: &CheckpointHeader, path: &Path) -> Result<()> {
    if header.arch != model.specs() || header.input != model.input_shape() || header.dtype != T::DTYPE {
        return Err(Error::Config("checkpoint header does not describe the model".into()));
    }
    let json = serde_json::to_vec(header)?;
    let io = |e| Error::io(path, e);
    let mut w = container::create(path, PayloadType::Checkpoint)?;
    w.u32(json.len() as u32).map_err(io)?;
    w.bytes(&json).map_err(io)?;
    w.u64(model.param_count() as u64).map_err(io)?;
    let mut blob = Vec::with_capacity(model.param_count() * T::BYTES);
    for &p in model.params() {
        p.write_le(&mut blob);
    }
    w.bytes(&blob).map_err(io)?;
    w.finish().map_err(io)?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(Model<T>, CheckpointHeader)> {
    let mut r = container::open(path, PayloadType::Checkpoint)?;
    let len = r.u32()? as usize;
    let header: CheckpointHeader = serde_json::from_slice(&r.bytes(len)?)?;
    if header.dtype != T::DTYPE {
        return Err(Error::Format(format!("checkpoint holds {} parameters, expected {}", header.dtype, T::DTYPE)));
    }
    let count = r.u64()? as usize;
    let blob = r.bytes(count * T::BYTES)?;
    r.expect_end()?;
    let params = blob.chunks_exact(T::BYTES).map(T::read_le).collect();
    let model = Model::from_params(header.input, &header.arch, params).map_err(|e| Error::Format(e.to_string()))?;
    Ok((model, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::arch::build_regressor;

    #[test]
    fn roundtrip_is_bit_exact() {
        let m = build_regressor::<f32>(8, 11).unwrap();
        let header = CheckpointHeader {
            arch: m.specs(),
            input: m.input_shape(),
            n: 8,
            seed: 11,
            epoch: 3,
            metrics: BTreeMap::from([("val_mse".to_string(), 0.25)]),
            dtype: "f32".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.ckpt");
        save_checkpoint(&m, &header, &p).unwrap();
        let (back, h) = load_checkpoint::<f32>(&p).unwrap();
        assert_eq!(h, header);
        assert_eq!(back.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), m.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert!(load_checkpoint::<f64>(&p).is_err());
    }
}
