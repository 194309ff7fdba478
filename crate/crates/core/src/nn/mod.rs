//! Minimal differentiable approximator stack.
//!
//! One fixed computation graph — fully connected layers with ReLU hidden
//! activations and a linear output — plus exactly the machinery the agents
//! need around it: reverse-mode gradients written out by hand, Adam,
//! tanh-squashed Gaussian sampling with the reparameterization trick, a
//! finite-difference gradient checker, and a flat text checkpoint format.
//!
//! All math runs on `f64` batches shaped `[batch, dim]`.

mod adam;
mod checkpoint;
mod gaussian;
mod gradcheck;
mod mlp;

pub use adam::AdamState;
pub use checkpoint::{load_mlp, load_mlp_from_path, save_mlp, save_mlp_to_path};
pub use gaussian::{
    normal_log_prob, squash_correction, SquashedGaussianHead, SquashedSample, LOG_STD_MAX,
    LOG_STD_MIN,
};
pub(crate) use gaussian::squash;
pub use gradcheck::{gradient_check, GradCheckReport};
pub use mlp::{Mlp, MlpBackward, MlpCache, MlpGradients};
