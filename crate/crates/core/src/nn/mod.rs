//! Small 1D convolutional networks trained with Adam.

pub mod adam;
pub mod arch;
pub mod checkpoint;
pub mod loss;
pub mod model;
pub mod scalar;
pub mod train;

pub use adam::adam_step;
pub use arch::{build_classifier, build_regressor, classifier_layers, regressor_layers};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader};
pub use loss::{loss_bce, loss_logcosh, Loss};
pub use model::{Layer, LayerSpec, Model, Shape, Tensor1D};
pub use scalar::Scalar;
pub use train::{evaluate, train, Dataset, EpochRecord, TrainConfig, TrainResult};
