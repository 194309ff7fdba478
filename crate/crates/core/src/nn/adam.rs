//! Adam optimizer over flat parameter vectors.

use crate::error::{CoreError, Result};
use crate::nn::{Mlp, MlpGradients};

/// Adam state for one parameter vector: first/second moment accumulators,
/// step count, and hyperparameters.
#[derive(Clone, Debug)]
pub struct AdamState {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    /// Standard hyperparameters: β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self::with_hyperparams(n_params, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyperparams(n_params: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update, in place:
    ///
    /// `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`,
    /// `θ ← θ − lr·m̂/(√v̂ + ε)` with `m̂ = m/(1−β₁ᵗ)`, `v̂ = v/(1−β₂ᵗ)`.
    ///
    /// Rejects non-finite gradients, naming the offending parameter vector.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], param_id: &str) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(CoreError::DimensionMismatch {
                context: "AdamState::step: params length",
                expected: self.m.len(),
                got: params.len(),
            });
        }
        if grads.len() != params.len() {
            return Err(CoreError::DimensionMismatch {
                context: "AdamState::step: grads length",
                expected: params.len(),
                got: grads.len(),
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(CoreError::NonFinite(format!(
                "gradient for `{param_id}` at coordinate {i}"
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }

    /// Convenience: apply structured MLP gradients to an MLP.
    pub fn step_mlp(&mut self, net: &mut Mlp, grads: &MlpGradients, param_id: &str) -> Result<()> {
        let mut params = net.params_flat();
        let flat = grads.to_flat();
        self.step(&mut params, &flat, param_id)?;
        net.set_params_flat(&params)
    }
}
