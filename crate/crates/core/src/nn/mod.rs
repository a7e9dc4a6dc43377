//! Minimal dense-network engine.
//!
//! Networks are ordered lists of fully-connected and ELU layers. Everything is
//! computed in `f64`; a forward pass records a [`Tape`] of layer inputs which
//! [`Mlp::backward`] consumes.

mod gradcheck;
mod layers;
mod loss;
mod optim;

pub use gradcheck::{grad_check, GradCheck, GradCheckReport};
pub use layers::{dense_forward, elu, DenseParams, LayerKind, Mlp, MlpParams, MlpSpec, Tape};
pub use loss::{cce_grad, cce_loss, softmax};
pub use optim::{Optimizer, OptimizerKind, OptimizerState, TrainConfig};

/// Uniform access to every trainable tensor of a model, in a fixed order.
///
/// Gradient holders implement this with the same tensor order as the model they
/// belong to, which is what the optimizer and the gradient checker rely on.
pub trait Parameters {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| crate::vector::all_finite(t))
    }
}
