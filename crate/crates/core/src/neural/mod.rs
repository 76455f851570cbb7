//! Minimal CNN with backpropagation, generic over the scalar type.

pub mod checkpoint;
mod cnn;
mod tensor;
mod train;

pub use cnn::{forward, Arch, CnnModel, Conv2d, ConvSpec, Dense};
pub use tensor::Tensor;
pub use train::{
    label_from_outcome, label_sample, online_update, pretrain_offline, train_step, CombinationOracle, Label,
    LabelThresholds, OnlineConfig, OnlineTrainer, PretrainConfig, PretrainReport, ReplayBuffer, TrainSample,
};

use crate::error::NeuralError;
use crate::scalar::Scalar;
use crate::traffic::TrafficPattern;

/// Model input: the traffic pattern with the remaining-buffer vector appended
/// as the last column, shaped `[1, rows, window + 1]`.
pub fn build_input<S: Scalar>(pattern: &TrafficPattern, buffers: &[f64]) -> Result<Tensor<S>, NeuralError> {
    if buffers.len() != pattern.rows {
        return Err(NeuralError::Shape {
            expected: vec![pattern.rows],
            got: vec![buffers.len()],
        });
    }
    let w = pattern.cols + 1;
    let mut data = Vec::with_capacity(pattern.rows * w);
    for (row, &buf) in buffers.iter().enumerate() {
        for col in 0..pattern.cols {
            data.push(S::from_f64_lossy(pattern.get(row, col).clamp(0.0, 1.0)));
        }
        data.push(S::from_f64_lossy(buf.clamp(0.0, 1.0)));
    }
    Tensor::from_vec(&[1, pattern.rows, w], data)
}
