//! The classifier and signed-distance regressor architectures.

use super::model::{LayerSpec, Model};
use super::scalar::Scalar;
use crate::error::{Error, Result};

pub const KERNEL: usize = 5;
pub const CLASSIFIER_CHANNELS: [usize; 5] = [16, 32, 32, 64, 64];
pub const CLASSIFIER_STRIDES: [usize; 5] = [1, 2, 1, 2, 1];
pub const CLASSIFIER_DENSE: [usize; 2] = [32, 1];
pub const REGRESSOR_CHANNELS: [usize; 4] = [16, 32, 32, 64];
pub const REGRESSOR_STRIDE: usize = 2;
pub const REGRESSOR_DENSE: [usize; 3] = [128, 64, 3];

fn check_resolution(n: usize) -> Result<()> {
    if n < 8 {
        return Err(Error::Config(format!("feature resolution {n} must be >= 8")));
    }
    Ok(())
}

/// Five ReLU convolutions, global average pooling, then dense layers ending
/// in one sigmoid unit.
pub fn classifier_layers(n: usize) -> Result<Vec<LayerSpec>> {
    check_resolution(n)?;
    let mut layers = Vec::new();
    for (c, s) in CLASSIFIER_CHANNELS.into_iter().zip(CLASSIFIER_STRIDES) {
        layers.push(LayerSpec::conv_same(c, KERNEL, s));
        layers.push(LayerSpec::Relu);
    }
    layers.push(LayerSpec::GlobalAveragePool);
    layers.push(LayerSpec::Dense { out_units: CLASSIFIER_DENSE[0] });
    layers.push(LayerSpec::Relu);
    layers.push(LayerSpec::Dense { out_units: CLASSIFIER_DENSE[1] });
    layers.push(LayerSpec::Sigmoid);
    Ok(layers)
}

/// Four strided ReLU convolutions, flatten, then two ReLU dense layers and a
/// linear output of `(d, u, v)`.
pub fn regressor_layers(n: usize) -> Result<Vec<LayerSpec>> {
    check_resolution(n)?;
    let mut layers = Vec::new();
    for c in REGRESSOR_CHANNELS {
        layers.push(LayerSpec::conv_same(c, KERNEL, REGRESSOR_STRIDE));
        layers.push(LayerSpec::Relu);
    }
    layers.push(LayerSpec::Flatten);
    for (i, u) in REGRESSOR_DENSE.into_iter().enumerate() {
        layers.push(LayerSpec::Dense { out_units: u });
        if i + 1 < REGRESSOR_DENSE.len() {
            layers.push(LayerSpec::Relu);
        }
    }
    Ok(layers)
}

pub fn build_classifier<T: Scalar>(n: usize, seed: u64) -> Result<Model<T>> {
    Model::new((1, 3 * n), &classifier_layers(n)?, seed)
}

pub fn build_regressor<T: Scalar>(n: usize, seed: u64) -> Result<Model<T>> {
    Model::new((1, 3 * n), &regressor_layers(n)?, seed)
}
