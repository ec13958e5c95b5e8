//! Loss gradients, Adadelta training and the gradient-descent baseline.

mod gd;
mod loss;
mod train;

pub use gd::{naive_gd, GdConfig};
pub use loss::{loss_gradient_wrt_state, LossTracker, KINK_TOL};
pub use train::{
    distance, train, train_logged, Adadelta, AdadeltaConfig, EpochRecord, StopReason, TrainConfig, TrainResult,
};

use crate::error::Result;
use crate::linalg::ComplexMatrix;
use crate::model::DecompositionModel;

/// Parameter gradient of a loss whose state gradient is `grad_wrt_state`.
pub fn backward(model: &DecompositionModel, grad_wrt_state: &ComplexMatrix) -> Result<Vec<f64>> {
    model.gradient(grad_wrt_state)
}
