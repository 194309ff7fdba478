//! Soft actor-critic with twin critics, a learnable entropy coefficient and
//! optional residual composition around a frozen baseline head.
//!
//! One update step performs, in order:
//!
//! 1. critic regression of both Q-networks toward
//!    `y = r + γ(1−done)·(min(Q'₁,Q'₂)(s',a') − α·log π(a'|s'))`, `a' ~ π`;
//! 2. one actor gradient step on `E[α·log π(a|s) − min(Q₁,Q₂)(s,a)]`
//!    (skipped while a burn-in gate freezes the actor);
//! 3. one dual step on `λ = log α` with `dJ/dλ = −α·mean(log π + H̄)` where
//!    `H̄` is the entropy target;
//! 4. a Polyak target blend `θ' ← (1−τ)θ' + τθ` every `target_update_period`
//!    updates (every other update by default).
//!
//! All noise comes from a caller-supplied RNG; with a fixed seed and fixed
//! batches the update sequence is bit-for-bit reproducible.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::agents::policy::{policy_graph, policy_mean_action, BaselineHead};
use crate::error::{CoreError, Result};
use crate::mdp::Transition;
use crate::nn::{AdamState, Mlp};

/// Hyperparameters for [`SacAgent`]. Defaults mirror the antenna-lab
/// configuration: three hidden layers of 64, learning rates `3e-4`, `γ = 0.9`,
/// `τ = 5e-3`, target entropy −1, initial `α = 1`, targets blended every
/// other update.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SacConfig {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha_lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub target_entropy: f64,
    pub init_alpha: f64,
    pub target_update_period: u64,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            obs_dim: 4,
            action_dim: 1,
            hidden: vec![64, 64, 64],
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            alpha_lr: 3e-4,
            gamma: 0.9,
            tau: 5e-3,
            target_entropy: -1.0,
            init_alpha: 1.0,
            target_update_period: 2,
        }
    }
}

impl SacConfig {
    fn validate(&self) -> Result<()> {
        if self.obs_dim == 0 || self.action_dim == 0 {
            return Err(CoreError::InvalidArgument(
                "SAC observation and action dims must be positive".into(),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(CoreError::InvalidArgument(format!(
                "SAC discount must lie in (0,1), got {}",
                self.gamma
            )));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(CoreError::InvalidArgument(format!(
                "SAC soft-update rate must lie in (0,1], got {}",
                self.tau
            )));
        }
        if self.init_alpha <= 0.0 {
            return Err(CoreError::InvalidArgument(
                "initial entropy coefficient must be positive".into(),
            ));
        }
        if self.target_update_period == 0 {
            return Err(CoreError::InvalidArgument(
                "target update period must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A minibatch of continuous-action transitions in dense array form.
#[derive(Clone, Debug)]
pub struct SacBatch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub dones: Array1<f64>,
}

impl SacBatch {
    /// Packs sampled transitions into arrays. All transitions must share the
    /// same state dimension and carry continuous actions of equal length.
    pub fn from_transitions(batch: &[&Transition]) -> Result<SacBatch> {
        let first = batch.first().ok_or(CoreError::EmptyBuffer)?;
        let obs_dim = first.state.len();
        let action_dim = first
            .action
            .as_continuous()
            .ok_or_else(|| {
                CoreError::InvalidArgument("SAC batch requires continuous actions".into())
            })?
            .len();
        let n = batch.len();
        let mut states = Array2::zeros((n, obs_dim));
        let mut actions = Array2::zeros((n, action_dim));
        let mut rewards = Array1::zeros(n);
        let mut next_states = Array2::zeros((n, obs_dim));
        let mut dones = Array1::zeros(n);
        for (i, tr) in batch.iter().enumerate() {
            if tr.state.len() != obs_dim || tr.next_state.len() != obs_dim {
                return Err(CoreError::DimensionMismatch {
                    context: "SAC batch state dim",
                    expected: obs_dim,
                    got: tr.state.len(),
                });
            }
            let a = tr.action.as_continuous().ok_or_else(|| {
                CoreError::InvalidArgument("SAC batch requires continuous actions".into())
            })?;
            if a.len() != action_dim {
                return Err(CoreError::DimensionMismatch {
                    context: "SAC batch action dim",
                    expected: action_dim,
                    got: a.len(),
                });
            }
            for (j, v) in tr.state.iter().enumerate() {
                states[[i, j]] = *v;
            }
            for (j, v) in a.iter().enumerate() {
                actions[[i, j]] = *v;
            }
            rewards[i] = tr.reward;
            for (j, v) in tr.next_state.iter().enumerate() {
                next_states[[i, j]] = *v;
            }
            dones[i] = if tr.done { 1.0 } else { 0.0 };
        }
        Ok(SacBatch {
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

/// Baseline heads evaluated on a batch's states and next states, for residual
/// training. Produced by the residual wrapper; `None` everywhere for plain
/// SAC.
#[derive(Clone, Debug)]
pub struct BaselineBatch {
    pub current: BaselineHead,
    pub next: BaselineHead,
}

/// Per-update loss report.
#[derive(Clone, Copy, Debug)]
pub struct SacLosses {
    pub critic1: f64,
    pub critic2: f64,
    /// Actor loss value. Computed every update for logging, but the actor
    /// parameters only move when the update ran with the actor un-frozen.
    pub actor: f64,
    /// Whether the actor gradient step was applied.
    pub actor_stepped: bool,
    pub alpha_loss: f64,
    pub alpha: f64,
    pub mean_log_prob: f64,
}

pub struct SacAgent {
    cfg: SacConfig,
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    target1: Mlp,
    target2: Mlp,
    log_alpha: f64,
    actor_opt: AdamState,
    critic1_opt: AdamState,
    critic2_opt: AdamState,
    alpha_opt: AdamState,
    updates: u64,
}

impl SacAgent {
    pub fn new<R: Rng>(cfg: SacConfig, rng: &mut R) -> Result<SacAgent> {
        cfg.validate()?;
        let mut actor_sizes = vec![cfg.obs_dim];
        actor_sizes.extend_from_slice(&cfg.hidden);
        actor_sizes.push(2 * cfg.action_dim);
        let mut critic_sizes = vec![cfg.obs_dim + cfg.action_dim];
        critic_sizes.extend_from_slice(&cfg.hidden);
        critic_sizes.push(1);

        let actor = Mlp::new(&actor_sizes, rng)?;
        let critic1 = Mlp::new(&critic_sizes, rng)?;
        let critic2 = Mlp::new(&critic_sizes, rng)?;
        let target1 = critic1.clone();
        let target2 = critic2.clone();
        let actor_opt = AdamState::new(actor.n_params(), cfg.actor_lr);
        let critic1_opt = AdamState::new(critic1.n_params(), cfg.critic_lr);
        let critic2_opt = AdamState::new(critic2.n_params(), cfg.critic_lr);
        let alpha_opt = AdamState::new(1, cfg.alpha_lr);
        let log_alpha = cfg.init_alpha.ln();
        Ok(SacAgent {
            cfg,
            actor,
            critic1,
            critic2,
            target1,
            target2,
            log_alpha,
            actor_opt,
            critic1_opt,
            critic2_opt,
            alpha_opt,
            updates: 0,
        })
    }

    pub fn config(&self) -> &SacConfig {
        &self.cfg
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Copies the online critics into the targets (used after manual edits to
    /// the critics, e.g. tying them in tests).
    pub fn sync_targets(&mut self) {
        self.target1 = self.critic1.clone();
        self.target2 = self.critic2.clone();
    }

    /// Samples an action for a single state from the plain (non-residual)
    /// policy; `deterministic` squashes the mean instead.
    pub fn act<R: Rng>(&self, state: &[f64], deterministic: bool, rng: &mut R) -> Result<Vec<f64>> {
        let states = Array2::from_shape_vec((1, state.len()), state.to_vec())
            .map_err(|e| CoreError::InvalidArgument(e.to_string()))?;
        if deterministic {
            let a = policy_mean_action(&self.actor, self.cfg.action_dim, &states, None)?;
            return Ok(a.row(0).to_vec());
        }
        let noise = draw_noise(1, self.cfg.action_dim, rng);
        let graph = policy_graph(&self.actor, self.cfg.action_dim, &states, &noise, None)?;
        Ok(graph.actions.row(0).to_vec())
    }

    /// The deterministic (mean) action for one observation.
    pub fn mean_act(&self, state: &[f64]) -> Result<Vec<f64>> {
        let states = Array2::from_shape_vec((1, state.len()), state.to_vec())
            .map_err(|e| CoreError::InvalidArgument(e.to_string()))?;
        let a = policy_mean_action(&self.actor, self.cfg.action_dim, &states, None)?;
        Ok(a.row(0).to_vec())
    }

    /// Samples one action per row of `states` from the plain policy.
    pub fn act_batch<R: Rng>(&self, states: &Array2<f64>, rng: &mut R) -> Result<Array2<f64>> {
        let noise = draw_noise(states.nrows(), self.cfg.action_dim, rng);
        let graph = policy_graph(&self.actor, self.cfg.action_dim, states, &noise, None)?;
        Ok(graph.actions)
    }

    /// One full SAC update on `batch`. `baseline` carries the frozen-baseline
    /// heads for residual training (`None` for plain SAC); `train_actor=false`
    /// freezes the actor parameters (critics and α still train), used by the
    /// critic burn-in gate.
    pub fn sac_update<R: Rng>(
        &mut self,
        batch: &SacBatch,
        baseline: Option<&BaselineBatch>,
        train_actor: bool,
        rng: &mut R,
    ) -> Result<SacLosses> {
        let n = batch.len();
        if n == 0 {
            return Err(CoreError::EmptyBuffer);
        }
        let k = self.cfg.action_dim;
        let alpha = self.log_alpha.exp();

        // --- Critic targets from the next-state policy sample.
        let next_noise = draw_noise(n, k, rng);
        let next_graph = policy_graph(
            &self.actor,
            k,
            &batch.next_states,
            &next_noise,
            baseline.map(|b| &b.next),
        )?;
        let next_in = hstack(&batch.next_states, &next_graph.actions);
        let t1 = self.target1.forward(&next_in)?;
        let t2 = self.target2.forward(&next_in)?;
        let mut y = Array1::zeros(n);
        for b in 0..n {
            let tmin = t1[[b, 0]].min(t2[[b, 0]]);
            y[b] = batch.rewards[b]
                + self.cfg.gamma
                    * (1.0 - batch.dones[b])
                    * (tmin - alpha * next_graph.log_prob[b]);
        }

        // --- Critic regression (shared targets, independent steps).
        let critic_in = hstack(&batch.states, &batch.actions);
        let critic1_loss = {
            let cache = self.critic1.forward_cached(&critic_in)?;
            let (loss, grad_out) = mse_grad(&cache.output, &y);
            let back = self.critic1.backward(&cache, &grad_out)?;
            self.critic1_opt
                .step_mlp(&mut self.critic1, &back.grads, "critic1")?;
            loss
        };
        let critic2_loss = {
            let cache = self.critic2.forward_cached(&critic_in)?;
            let (loss, grad_out) = mse_grad(&cache.output, &y);
            let back = self.critic2.backward(&cache, &grad_out)?;
            self.critic2_opt
                .step_mlp(&mut self.critic2, &back.grads, "critic2")?;
            loss
        };

        // --- Fresh policy sample on the current states for actor and α.
        let cur_noise = draw_noise(n, k, rng);
        let cur_graph = policy_graph(
            &self.actor,
            k,
            &batch.states,
            &cur_noise,
            baseline.map(|b| &b.current),
        )?;
        let actor_in = hstack(&batch.states, &cur_graph.actions);
        let q1 = self.critic1.forward_cached(&actor_in)?;
        let q2 = self.critic2.forward_cached(&actor_in)?;

        let mut actor_loss = 0.0;
        for b in 0..n {
            let qmin = q1.output[[b, 0]].min(q2.output[[b, 0]]);
            actor_loss += alpha * cur_graph.log_prob[b] - qmin;
        }
        actor_loss /= n as f64;
        if !actor_loss.is_finite() {
            return Err(CoreError::NonFinite(format!(
                "actor loss became {actor_loss} at update {}",
                self.updates
            )));
        }

        if train_actor {
            // ∂Qmin/∂a via the min branch of each row: backprop a row mask
            // through both critics and keep only the action columns.
            let mut sel1 = Array2::zeros((n, 1));
            let mut sel2 = Array2::zeros((n, 1));
            for b in 0..n {
                if q1.output[[b, 0]] <= q2.output[[b, 0]] {
                    sel1[[b, 0]] = 1.0;
                } else {
                    sel2[[b, 0]] = 1.0;
                }
            }
            let gq = {
                let b1 = self.critic1.backward(&q1, &sel1)?;
                let b2 = self.critic2.backward(&q2, &sel2)?;
                let mut g = Array2::zeros((n, k));
                for b in 0..n {
                    for j in 0..k {
                        let col = self.cfg.obs_dim + j;
                        g[[b, j]] = b1.grad_input[[b, col]] + b2.grad_input[[b, col]];
                    }
                }
                g
            };
            // L = mean(α·logπ − Qmin): per-row logπ weight α/n, per-coordinate
            // action weight −gq/n.
            let w_logp = Array1::from_elem(n, alpha / n as f64);
            let w_act = gq.mapv(|v| -v / n as f64);
            let grad_out = cur_graph.output_grad(&w_logp, &w_act);
            let back = self.actor.backward(&cur_graph.cache, &grad_out)?;
            self.actor_opt.step_mlp(&mut self.actor, &back.grads, "actor")?;
        }

        // --- Entropy coefficient dual step on λ = log α.
        let mean_log_prob = cur_graph.log_prob.mean().unwrap_or(0.0);
        let alpha_loss = -alpha * (mean_log_prob + self.cfg.target_entropy);
        let grad_lambda = -alpha * (mean_log_prob + self.cfg.target_entropy);
        let mut lambda = [self.log_alpha];
        self.alpha_opt.step(&mut lambda, &[grad_lambda], "log_alpha")?;
        self.log_alpha = lambda[0];

        if !(critic1_loss.is_finite() && critic2_loss.is_finite() && self.log_alpha.is_finite()) {
            return Err(CoreError::NonFinite(format!(
                "SAC update {} produced a non-finite loss (critic1 {critic1_loss}, critic2 {critic2_loss}, log_alpha {})",
                self.updates, self.log_alpha
            )));
        }

        self.updates += 1;
        if self.updates % self.cfg.target_update_period == 0 {
            soft_update(&self.critic1, &mut self.target1, self.cfg.tau)?;
            soft_update(&self.critic2, &mut self.target2, self.cfg.tau)?;
        }

        Ok(SacLosses {
            critic1: critic1_loss,
            critic2: critic2_loss,
            actor: actor_loss,
            actor_stepped: train_actor,
            alpha_loss,
            alpha: self.log_alpha.exp(),
            mean_log_prob,
        })
    }
}

/// Polyak blend `target ← (1−τ)·target + τ·online`.
fn soft_update(online: &Mlp, target: &mut Mlp, tau: f64) -> Result<()> {
    let src = online.params_flat();
    let mut dst = target.params_flat();
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        *d = (1.0 - tau) * *d + tau * *s;
    }
    target.set_params_flat(&dst)
}

fn draw_noise<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let mut noise = Array2::zeros((rows, cols));
    for v in noise.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    noise
}

fn hstack(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (n, da) = a.dim();
    let db = b.ncols();
    let mut out = Array2::zeros((n, da + db));
    for i in 0..n {
        for j in 0..da {
            out[[i, j]] = a[[i, j]];
        }
        for j in 0..db {
            out[[i, da + j]] = b[[i, j]];
        }
    }
    out
}

/// Mean-squared-error loss of a `[n,1]` prediction column against targets,
/// with its gradient w.r.t. the predictions.
fn mse_grad(pred: &Array2<f64>, target: &Array1<f64>) -> (f64, Array2<f64>) {
    let n = pred.nrows();
    let mut loss = 0.0;
    let mut grad = Array2::zeros((n, 1));
    for b in 0..n {
        let diff = pred[[b, 0]] - target[b];
        loss += diff * diff;
        grad[[b, 0]] = 2.0 * diff / n as f64;
    }
    (loss / n as f64, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Action;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn small_cfg() -> SacConfig {
        SacConfig {
            obs_dim: 3,
            action_dim: 1,
            hidden: vec![16, 16],
            ..SacConfig::default()
        }
    }

    fn random_batch(n: usize, obs: usize, rng: &mut ChaCha12Rng) -> SacBatch {
        let mut states = Array2::zeros((n, obs));
        let mut next_states = Array2::zeros((n, obs));
        let mut actions = Array2::zeros((n, 1));
        let mut rewards = Array1::zeros(n);
        for v in states.iter_mut().chain(next_states.iter_mut()) {
            *v = rng.random_range(-1.0..1.0);
        }
        for v in actions.iter_mut() {
            *v = rng.random_range(-0.9..0.9);
        }
        for v in rewards.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        SacBatch {
            states,
            actions,
            rewards,
            next_states,
            dones: Array1::zeros(n),
        }
    }

    #[test]
    fn zero_reward_zero_gamma_gives_zero_targets() {
        // With r≡0, γ→0 and α pinned near 0 the critic target is identically
        // zero, so a few hundred regressions drive both critics to ~0 on the
        // batch points.
        let cfg = SacConfig {
            gamma: 1e-300,
            init_alpha: 1e-300,
            alpha_lr: 0.0,
            critic_lr: 1e-2,
            ..small_cfg()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut agent = SacAgent::new(cfg, &mut rng).unwrap();
        let mut batch = random_batch(32, 3, &mut rng);
        for v in batch.rewards.iter_mut() {
            *v = 0.0;
        }
        for _ in 0..400 {
            agent.sac_update(&batch, None, true, &mut rng).unwrap();
        }
        let qin = hstack(&batch.states, &batch.actions);
        let q = agent.critic1.forward(&qin).unwrap();
        for b in 0..batch.len() {
            assert!(q[[b, 0]].abs() < 0.05, "critic at {}", q[[b, 0]]);
        }
    }

    #[test]
    fn tied_critics_report_equal_losses() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut agent = SacAgent::new(small_cfg(), &mut rng).unwrap();
        agent.critic2 = agent.critic1.clone();
        agent.sync_targets();
        let batch = random_batch(16, 3, &mut rng);
        let losses = agent.sac_update(&batch, None, true, &mut rng).unwrap();
        assert_eq!(losses.critic1, losses.critic2);
    }

    #[test]
    fn frozen_actor_is_bitwise_unchanged() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut agent = SacAgent::new(small_cfg(), &mut rng).unwrap();
        let before = agent.actor.params_flat();
        let critic_before = agent.critic1.params_flat();
        let batch = random_batch(16, 3, &mut rng);
        for _ in 0..20 {
            agent.sac_update(&batch, None, false, &mut rng).unwrap();
        }
        assert_eq!(agent.actor.params_flat(), before);
        assert_ne!(agent.critic1.params_flat(), critic_before);
    }

    #[test]
    fn alpha_stays_positive_and_adapts() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let mut agent = SacAgent::new(small_cfg(), &mut rng).unwrap();
        let batch = random_batch(32, 3, &mut rng);
        for _ in 0..50 {
            let losses = agent.sac_update(&batch, None, true, &mut rng).unwrap();
            assert!(losses.alpha > 0.0);
        }
        // α must have moved off its initial value.
        assert!((agent.alpha() - 1.0).abs() > 1e-6);
    }

    #[test]
    fn target_update_every_other_step() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut agent = SacAgent::new(small_cfg(), &mut rng).unwrap();
        let batch = random_batch(8, 3, &mut rng);
        let t0 = agent.target1.params_flat();
        agent.sac_update(&batch, None, true, &mut rng).unwrap();
        // Update 1: targets untouched (period 2).
        assert_eq!(agent.target1.params_flat(), t0);
        agent.sac_update(&batch, None, true, &mut rng).unwrap();
        // Update 2: targets blended.
        assert_ne!(agent.target1.params_flat(), t0);
    }

    #[test]
    fn batch_from_transitions_round_trips() {
        let tr = Transition {
            state: vec![0.1, 0.2, 0.3],
            action: Action::Continuous(vec![0.5]),
            reward: -0.25,
            next_state: vec![0.4, 0.5, 0.6],
            done: true,
            agent_id: 2,
        };
        let batch = SacBatch::from_transitions(&[&tr]).unwrap();
        assert_eq!(batch.len(), 1);
        assert_eq!(batch.states[[0, 2]], 0.3);
        assert_eq!(batch.actions[[0, 0]], 0.5);
        assert_eq!(batch.dones[0], 1.0);
    }

    #[test]
    fn discrete_actions_are_rejected() {
        let tr = Transition {
            state: vec![0.0],
            action: Action::Discrete(1),
            reward: 0.0,
            next_state: vec![0.0],
            done: false,
            agent_id: 0,
        };
        assert!(SacBatch::from_transitions(&[&tr]).is_err());
    }

    #[test]
    fn actor_gradient_direction_reduces_loss() {
        // A single large-lr actor step with fixed critics and fixed noise
        // must reduce the actor loss evaluated with the same noise — a
        // coarse directional check that complements the exact finite
        // difference tests in the policy module.
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let cfg = SacConfig {
            actor_lr: 1e-3,
            ..small_cfg()
        };
        let mut agent = SacAgent::new(cfg, &mut rng).unwrap();
        let batch = random_batch(64, 3, &mut rng);

        let eval = |agent: &SacAgent, noise: &Array2<f64>| -> f64 {
            let graph = policy_graph(&agent.actor, 1, &batch.states, noise, None).unwrap();
            let qin = hstack(&batch.states, &graph.actions);
            let q1 = agent.critic1.forward(&qin).unwrap();
            let q2 = agent.critic2.forward(&qin).unwrap();
            let alpha = agent.alpha();
            (0..batch.len())
                .map(|b| alpha * graph.log_prob[b] - q1[[b, 0]].min(q2[[b, 0]]))
                .sum::<f64>()
                / batch.len() as f64
        };

        // Freeze everything except the actor by replaying the same rng
        // stream: run one update, then compare the loss on a held-out noise
        // draw before/after.
        let probe = draw_noise(64, 1, &mut ChaCha12Rng::seed_from_u64(99));
        let before = eval(&agent, &probe);
        // Several steps to dominate the (small) critic drift.
        for _ in 0..25 {
            agent.sac_update(&batch, None, true, &mut rng).unwrap();
        }
        let after = eval(&agent, &probe);
        assert!(after < before, "actor loss {before} -> {after}");
    }
}
