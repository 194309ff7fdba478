//! Single-network Gaussian dynamics model.
//!
//! The network maps a state-action pair to the mean and diagonal
//! log-variance of a Gaussian over next states, `p_θ(·|s,a) =
//! N(μ_θ(s,a), Σ_θ(s,a))`. It trains on a sample-mean MSE rather than a
//! likelihood: per batch the loss draws `n` reparameterized next-state
//! batches, averages them into `s̄_gen`, scales both prediction and target by
//! each state dimension's span, and regresses
//!
//! ```text
//! L_θ = (1/(B·d)) Σ_b ‖ (ŝ^(b) − s̄_gen^(b)) ⊘ (s_max − s_min) ‖²
//! ```
//!
//! Gradients flow through the samples via the reparameterization
//! `s = μ + σ⊙ξ` (so the variance head is trained implicitly through the
//! sample mean — there is no separate likelihood term). Averaging `n` i.i.d.
//! samples collapses to `s̄_gen = μ + σ⊙ξ̄` with `ξ̄` the averaged noise,
//! which is how it is computed here.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, Result};
use crate::nn::{AdamState, Mlp, MlpGradients};

/// Number of reparameterized sample batches averaged inside the loss.
pub const MODEL_LOSS_SAMPLES: usize = 10;

pub struct GaussianDynamicsModel {
    net: Mlp,
    state_dim: usize,
    action_dim: usize,
    s_min: Array1<f64>,
    s_max: Array1<f64>,
    opt: AdamState,
    predict_calls: u64,
    train_calls: u64,
}

impl GaussianDynamicsModel {
    /// Builds the model network `[d+k, hidden…, 2d]` with per-dimension state
    /// bounds used for loss normalization and sample clamping.
    pub fn new<R: Rng>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        s_min: &[f64],
        s_max: &[f64],
        lr: f64,
        rng: &mut R,
    ) -> Result<GaussianDynamicsModel> {
        if state_dim == 0 || action_dim == 0 {
            return Err(CoreError::InvalidArgument(
                "model state and action dims must be positive".into(),
            ));
        }
        if s_min.len() != state_dim || s_max.len() != state_dim {
            return Err(CoreError::DimensionMismatch {
                context: "model state bounds",
                expected: state_dim,
                got: s_min.len(),
            });
        }
        for j in 0..state_dim {
            if !(s_max[j] > s_min[j]) {
                return Err(CoreError::InvalidArgument(format!(
                    "state bound {j} degenerate: [{}, {}]",
                    s_min[j], s_max[j]
                )));
            }
        }
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * state_dim);
        let net = Mlp::new(&sizes, rng)?;
        let opt = AdamState::new(net.n_params(), lr);
        Ok(GaussianDynamicsModel {
            net,
            state_dim,
            action_dim,
            s_min: Array1::from_vec(s_min.to_vec()),
            s_max: Array1::from_vec(s_max.to_vec()),
            opt,
            predict_calls: 0,
            train_calls: 0,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    /// Mutable access for checkpoint restore and gradient checking.
    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    /// Number of [`predict`](Self::predict) calls so far.
    pub fn predict_calls(&self) -> u64 {
        self.predict_calls
    }

    /// Number of [`train_step`](Self::train_step) calls so far.
    pub fn train_calls(&self) -> u64 {
        self.train_calls
    }

    fn check_batch(&self, states: &Array2<f64>, actions: &Array2<f64>) -> Result<()> {
        if states.ncols() != self.state_dim {
            return Err(CoreError::DimensionMismatch {
                context: "model state dim",
                expected: self.state_dim,
                got: states.ncols(),
            });
        }
        if actions.ncols() != self.action_dim || actions.nrows() != states.nrows() {
            return Err(CoreError::DimensionMismatch {
                context: "model action batch",
                expected: self.action_dim * states.nrows(),
                got: actions.len(),
            });
        }
        Ok(())
    }

    fn stack_inputs(&self, states: &Array2<f64>, actions: &Array2<f64>) -> Array2<f64> {
        let n = states.nrows();
        let mut x = Array2::zeros((n, self.state_dim + self.action_dim));
        for b in 0..n {
            for j in 0..self.state_dim {
                x[[b, j]] = states[[b, j]];
            }
            for j in 0..self.action_dim {
                x[[b, self.state_dim + j]] = actions[[b, j]];
            }
        }
        x
    }

    /// Mean and standard deviation heads for a batch (σ from the predicted
    /// log-variance).
    pub fn heads(&self, states: &Array2<f64>, actions: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        self.check_batch(states, actions)?;
        let out = self.net.forward(&self.stack_inputs(states, actions))?;
        let n = states.nrows();
        let d = self.state_dim;
        let mut mean = Array2::zeros((n, d));
        let mut std = Array2::zeros((n, d));
        for b in 0..n {
            for j in 0..d {
                mean[[b, j]] = out[[b, j]];
                std[[b, j]] = (0.5 * out[[b, d + j]]).exp();
            }
        }
        Ok((mean, std))
    }

    /// One reparameterized next-state sample per row, clamped to the state
    /// bounds. A non-finite emission (before clamping) is an error the caller
    /// can treat as a rollout truncation. Counted.
    pub fn predict<R: Rng>(
        &mut self,
        states: &Array2<f64>,
        actions: &Array2<f64>,
        rng: &mut R,
    ) -> Result<Array2<f64>> {
        self.predict_calls += 1;
        let (mean, std) = self.heads(states, actions)?;
        let n = states.nrows();
        let d = self.state_dim;
        let mut next = Array2::zeros((n, d));
        for b in 0..n {
            for j in 0..d {
                let xi: f64 = rng.sample(StandardNormal);
                let raw = mean[[b, j]] + std[[b, j]] * xi;
                if !raw.is_finite() {
                    return Err(CoreError::NonFinite(format!(
                        "dynamics model emitted {raw} for state coordinate {j}"
                    )));
                }
                next[[b, j]] = raw.clamp(self.s_min[j], self.s_max[j]);
            }
        }
        Ok(next)
    }

    /// The sample-mean MSE loss on one batch, with fresh loss noise.
    pub fn model_loss<R: Rng>(
        &self,
        states: &Array2<f64>,
        actions: &Array2<f64>,
        true_next: &Array2<f64>,
        rng: &mut R,
    ) -> Result<f64> {
        let noise = self.draw_loss_noise(states.nrows(), rng);
        self.model_loss_with_noise(states, actions, true_next, &noise)
    }

    /// Loss under explicitly supplied noise batches (one `[B,d]` array per
    /// averaged sample), for oracles and gradient checks.
    pub fn model_loss_with_noise(
        &self,
        states: &Array2<f64>,
        actions: &Array2<f64>,
        true_next: &Array2<f64>,
        noise: &[Array2<f64>],
    ) -> Result<f64> {
        let (loss, _) = self.loss_graph(states, actions, true_next, noise, false)?;
        Ok(loss)
    }

    /// Loss and its gradient with respect to the network parameters, under
    /// supplied noise.
    pub fn loss_gradients(
        &self,
        states: &Array2<f64>,
        actions: &Array2<f64>,
        true_next: &Array2<f64>,
        noise: &[Array2<f64>],
    ) -> Result<(f64, MlpGradients)> {
        let (loss, grads) = self.loss_graph(states, actions, true_next, noise, true)?;
        Ok((loss, grads.expect("gradients requested")))
    }

    pub fn draw_loss_noise<R: Rng>(&self, batch: usize, rng: &mut R) -> Vec<Array2<f64>> {
        (0..MODEL_LOSS_SAMPLES)
            .map(|_| {
                let mut arr = Array2::zeros((batch, self.state_dim));
                for v in arr.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                arr
            })
            .collect()
    }

    fn loss_graph(
        &self,
        states: &Array2<f64>,
        actions: &Array2<f64>,
        true_next: &Array2<f64>,
        noise: &[Array2<f64>],
        with_grads: bool,
    ) -> Result<(f64, Option<MlpGradients>)> {
        self.check_batch(states, actions)?;
        let n = states.nrows();
        let d = self.state_dim;
        if true_next.dim() != (n, d) {
            return Err(CoreError::DimensionMismatch {
                context: "model target batch",
                expected: n * d,
                got: true_next.len(),
            });
        }
        if noise.is_empty() {
            return Err(CoreError::InvalidArgument(
                "model loss needs at least one noise batch".into(),
            ));
        }
        for arr in noise {
            if arr.dim() != (n, d) {
                return Err(CoreError::DimensionMismatch {
                    context: "model loss noise batch",
                    expected: n * d,
                    got: arr.len(),
                });
            }
        }
        // Averaging k samples μ + σ⊙ξ_i equals μ + σ⊙ξ̄.
        let mut mean_noise = Array2::zeros((n, d));
        for arr in noise {
            mean_noise += arr;
        }
        mean_noise /= noise.len() as f64;

        let x = self.stack_inputs(states, actions);
        let cache = self.net.forward_cached(&x)?;
        let mut loss = 0.0;
        let mut grad_out = if with_grads {
            Some(Array2::zeros((n, 2 * d)))
        } else {
            None
        };
        let scale = 1.0 / (n as f64 * d as f64);
        for b in 0..n {
            for j in 0..d {
                let span = self.s_max[j] - self.s_min[j];
                let sigma = (0.5 * cache.output[[b, d + j]]).exp();
                let gen = cache.output[[b, j]] + sigma * mean_noise[[b, j]];
                let diff = (true_next[[b, j]] - gen) / span;
                loss += scale * diff * diff;
                if let Some(g) = grad_out.as_mut() {
                    // dL/dgen = −2·scale·diff/span; dgen/dμ = 1;
                    // dgen/d(logvar) = ξ̄·σ/2.
                    let dgen = -2.0 * scale * diff / span;
                    g[[b, j]] = dgen;
                    g[[b, d + j]] = dgen * mean_noise[[b, j]] * sigma * 0.5;
                }
            }
        }
        if !loss.is_finite() {
            return Err(CoreError::NonFinite(format!("model loss became {loss}")));
        }
        let grads = match grad_out {
            Some(g) => Some(self.net.backward(&cache, &g)?.grads),
            None => None,
        };
        Ok((loss, grads))
    }

    /// One Adam step on the loss over a prepared batch. Counted.
    pub fn train_step<R: Rng>(
        &mut self,
        states: &Array2<f64>,
        actions: &Array2<f64>,
        true_next: &Array2<f64>,
        rng: &mut R,
    ) -> Result<f64> {
        self.train_calls += 1;
        let noise = self.draw_loss_noise(states.nrows(), rng);
        let (loss, grads) = self.loss_gradients(states, actions, true_next, &noise)?;
        self.opt.step_mlp(&mut self.net, &grads, "dynamics_model")?;
        Ok(loss)
    }
}
