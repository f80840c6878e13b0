//! Minimal dense reverse-mode automatic differentiation.

mod finite_diff;
mod params;
mod tape;
mod tensor;

pub use finite_diff::{finite_diff_grad, relative_error};
pub use params::ParamSet;
pub use tape::{ComputationRecord, Tape, Var};
pub use tensor::Tensor;

use crate::Result;

/// A differentiable scalar objective evaluated on a batch of data.
///
/// Implemented by the MLP (batches of labelled examples) and by the analytic
/// landscapes (the batch is `()`; every evaluation is full-batch).
pub trait Objective {
    type Batch: ?Sized;

    fn loss(&self, params: &ParamSet, batch: &Self::Batch) -> Result<f64>;

    fn loss_and_grad(&self, params: &ParamSet, batch: &Self::Batch) -> Result<(f64, ParamSet)>;
}
