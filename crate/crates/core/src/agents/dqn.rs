//! Deep Q-learning over the three-way tilt action set {−1°, 0°, +1°}.
//!
//! Standard target `y = r + γ(1−done)·max_a Q'(s',a)` with MSE regression,
//! ε-greedy exploration decaying linearly from `ε₀` to `ε_final` over a fixed
//! number of environment steps, and Polyak-blended target network. Greedy
//! ties break toward the lowest action index, which keeps rollouts
//! deterministic under Q-value rescaling.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::mdp::{Action, Transition};
use crate::nn::{AdamState, Mlp};

/// Tilt increments (degrees) indexed by discrete action id.
pub const DQN_ACTION_DELTAS_DEG: [f64; 3] = [-1.0, 0.0, 1.0];

/// Hyperparameters for [`DqnAgent`]; defaults follow the antenna-lab
/// configuration (lr `3e-4`, `γ = 0.9`, `τ = 5e-3`, ε from 1 to 0.01 over
/// 3000 steps).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnConfig {
    pub obs_dim: usize,
    pub n_actions: usize,
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub epsilon_start: f64,
    pub epsilon_final: f64,
    pub epsilon_decay_steps: u64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            obs_dim: 4,
            n_actions: DQN_ACTION_DELTAS_DEG.len(),
            hidden: vec![64, 64, 64],
            lr: 3e-4,
            gamma: 0.9,
            tau: 5e-3,
            epsilon_start: 1.0,
            epsilon_final: 0.01,
            epsilon_decay_steps: 3000,
        }
    }
}

/// A minibatch of discrete-action transitions in dense array form.
#[derive(Clone, Debug)]
pub struct DqnBatch {
    pub states: Array2<f64>,
    pub actions: Vec<usize>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub dones: Array1<f64>,
}

impl DqnBatch {
    pub fn from_transitions(batch: &[&Transition]) -> Result<DqnBatch> {
        let first = batch.first().ok_or(CoreError::EmptyBuffer)?;
        let obs_dim = first.state.len();
        let n = batch.len();
        let mut states = Array2::zeros((n, obs_dim));
        let mut actions = Vec::with_capacity(n);
        let mut rewards = Array1::zeros(n);
        let mut next_states = Array2::zeros((n, obs_dim));
        let mut dones = Array1::zeros(n);
        for (i, tr) in batch.iter().enumerate() {
            if tr.state.len() != obs_dim || tr.next_state.len() != obs_dim {
                return Err(CoreError::DimensionMismatch {
                    context: "DQN batch state dim",
                    expected: obs_dim,
                    got: tr.state.len(),
                });
            }
            let a = match tr.action {
                Action::Discrete(a) => a,
                Action::Continuous(_) => {
                    return Err(CoreError::InvalidArgument(
                        "DQN batch requires discrete actions".into(),
                    ))
                }
            };
            actions.push(a);
            for (j, v) in tr.state.iter().enumerate() {
                states[[i, j]] = *v;
            }
            rewards[i] = tr.reward;
            for (j, v) in tr.next_state.iter().enumerate() {
                next_states[[i, j]] = *v;
            }
            dones[i] = if tr.done { 1.0 } else { 0.0 };
        }
        Ok(DqnBatch {
            states,
            actions,
            rewards,
            next_states,
            dones,
        })
    }

    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }
}

/// Index of the largest value; ties resolve to the lowest index. Invariant
/// under any positive rescaling of the values.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub struct DqnAgent {
    cfg: DqnConfig,
    pub q: Mlp,
    target: Mlp,
    opt: AdamState,
    updates: u64,
}

impl DqnAgent {
    pub fn new<R: Rng>(cfg: DqnConfig, rng: &mut R) -> Result<DqnAgent> {
        if cfg.obs_dim == 0 || cfg.n_actions == 0 {
            return Err(CoreError::InvalidArgument(
                "DQN observation dim and action count must be positive".into(),
            ));
        }
        if !(cfg.epsilon_final <= cfg.epsilon_start && cfg.epsilon_final >= 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "DQN epsilon schedule must decay: start {}, final {}",
                cfg.epsilon_start, cfg.epsilon_final
            )));
        }
        let mut sizes = vec![cfg.obs_dim];
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(cfg.n_actions);
        let q = Mlp::new(&sizes, rng)?;
        let target = q.clone();
        let opt = AdamState::new(q.n_params(), cfg.lr);
        Ok(DqnAgent {
            cfg,
            q,
            target,
            opt,
            updates: 0,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.cfg
    }

    /// Linear exploration schedule: `ε₀` at step 0 down to `ε_final` at the
    /// decay horizon, constant afterwards.
    pub fn epsilon(&self, env_step: u64) -> f64 {
        if env_step >= self.cfg.epsilon_decay_steps {
            return self.cfg.epsilon_final;
        }
        let frac = env_step as f64 / self.cfg.epsilon_decay_steps as f64;
        self.cfg.epsilon_start + frac * (self.cfg.epsilon_final - self.cfg.epsilon_start)
    }

    /// Greedy action for one state (ties to the lowest index).
    pub fn greedy(&self, state: &[f64]) -> Result<usize> {
        let states = Array2::from_shape_vec((1, state.len()), state.to_vec())
            .map_err(|e| CoreError::InvalidArgument(e.to_string()))?;
        let q = self.q.forward(&states)?;
        Ok(argmax_lowest(q.row(0).as_slice().expect("contiguous row")))
    }

    /// ε-greedy action for one state at the given environment step.
    pub fn act<R: Rng>(&self, state: &[f64], env_step: u64, rng: &mut R) -> Result<usize> {
        let eps = self.epsilon(env_step);
        if rng.random_range(0.0..1.0) < eps {
            Ok(rng.random_range(0..self.cfg.n_actions))
        } else {
            self.greedy(state)
        }
    }

    /// One TD regression step toward `y = r + γ(1−done)·max_a Q'(s',a)`.
    pub fn dqn_update(&mut self, batch: &DqnBatch) -> Result<f64> {
        let n = batch.len();
        if n == 0 {
            return Err(CoreError::EmptyBuffer);
        }
        for &a in &batch.actions {
            if a >= self.cfg.n_actions {
                return Err(CoreError::InvalidArgument(format!(
                    "action index {a} out of range (n_actions {})",
                    self.cfg.n_actions
                )));
            }
        }
        let next_q = self.target.forward(&batch.next_states)?;
        let mut y = Array1::zeros(n);
        for b in 0..n {
            let best = next_q
                .row(b)
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            y[b] = batch.rewards[b] + self.cfg.gamma * (1.0 - batch.dones[b]) * best;
        }

        let cache = self.q.forward_cached(&batch.states)?;
        let mut loss = 0.0;
        let mut grad_out = Array2::zeros((n, self.cfg.n_actions));
        for b in 0..n {
            let diff = cache.output[[b, batch.actions[b]]] - y[b];
            loss += diff * diff;
            grad_out[[b, batch.actions[b]]] = 2.0 * diff / n as f64;
        }
        loss /= n as f64;
        if !loss.is_finite() {
            return Err(CoreError::NonFinite(format!(
                "DQN loss became {loss} at update {}",
                self.updates
            )));
        }
        let back = self.q.backward(&cache, &grad_out)?;
        self.opt.step_mlp(&mut self.q, &back.grads, "dqn_q")?;
        self.updates += 1;

        // Polyak blend after every update.
        let src = self.q.params_flat();
        let mut dst = self.target.params_flat();
        for (d, s) in dst.iter_mut().zip(src.iter()) {
            *d = (1.0 - self.cfg.tau) * *d + self.cfg.tau * *s;
        }
        self.target.set_params_flat(&dst)?;
        Ok(loss)
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn epsilon_schedule_endpoints() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let agent = DqnAgent::new(DqnConfig::default(), &mut rng).unwrap();
        assert_eq!(agent.epsilon(0), 1.0);
        assert!((agent.epsilon(1500) - 0.505).abs() < 1e-12);
        assert_eq!(agent.epsilon(3000), 0.01);
        assert_eq!(agent.epsilon(100_000), 0.01);
    }

    #[test]
    fn gamma_zero_targets_equal_rewards() {
        let cfg = DqnConfig {
            obs_dim: 2,
            hidden: vec![8],
            gamma: 1e-300,
            lr: 1e-2,
            ..DqnConfig::default()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut agent = DqnAgent::new(cfg, &mut rng).unwrap();
        let batch = DqnBatch {
            states: ndarray::arr2(&[[0.5, -0.5], [1.0, 0.0]]),
            actions: vec![0, 2],
            rewards: ndarray::arr1(&[0.7, -0.3]),
            next_states: ndarray::arr2(&[[0.0, 0.0], [0.0, 0.0]]),
            dones: ndarray::arr1(&[0.0, 0.0]),
        };
        for _ in 0..600 {
            agent.dqn_update(&batch).unwrap();
        }
        let q = agent.q.forward(&batch.states).unwrap();
        assert!((q[[0, 0]] - 0.7).abs() < 0.05);
        assert!((q[[1, 2]] + 0.3).abs() < 0.05);
    }

    #[test]
    fn greedy_tie_breaks_to_lowest_index() {
        assert_eq!(argmax_lowest(&[1.0, 1.0, 1.0]), 0);
        assert_eq!(argmax_lowest(&[0.0, 2.0, 2.0]), 1);
        assert_eq!(argmax_lowest(&[0.0, -1.0, 0.0]), 0);
    }

    #[test]
    fn greedy_invariant_under_positive_rescaling() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..200 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let c = rng.random_range(1e-3..100.0);
            let scaled: Vec<f64> = q.iter().map(|v| c * v).collect();
            assert_eq!(argmax_lowest(&q), argmax_lowest(&scaled));
        }
    }

    #[test]
    fn invalid_action_index_rejected() {
        let cfg = DqnConfig {
            obs_dim: 1,
            hidden: vec![4],
            ..DqnConfig::default()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut agent = DqnAgent::new(cfg, &mut rng).unwrap();
        let batch = DqnBatch {
            states: ndarray::arr2(&[[0.0]]),
            actions: vec![7],
            rewards: ndarray::arr1(&[0.0]),
            next_states: ndarray::arr2(&[[0.0]]),
            dones: ndarray::arr1(&[0.0]),
        };
        assert!(agent.dqn_update(&batch).is_err());
    }

    #[test]
    fn action_deltas_cover_three_increments() {
        assert_eq!(DQN_ACTION_DELTAS_DEG, [-1.0, 0.0, 1.0]);
    }
}
