//! Residual policy around a frozen baseline, with critic burn-in.
//!
//! The corrected policy adds a trainable Gaussian correction to a fixed
//! baseline in pre-squash space. A deterministic baseline contributes its
//! pre-squash mean `a_b = μ_b(s)` and the combined sample is drawn from
//! `N(μ_b + μ_c, σ_c²)`; a stochastic baseline also contributes its variance,
//! giving `N(μ_b + μ_c, σ_b² + σ_c²)`. Either way the sum is squashed once by
//! tanh, so actions stay inside the environment's action box.
//!
//! During the first `cbi_steps` environment steps (critic burn-in) the
//! emitted action is the baseline's own action, bit for bit — the correction
//! is bypassed entirely — and SAC updates run with the actor frozen while the
//! critics and the entropy coefficient keep training.

use ndarray::Array2;
use rand::Rng;

use crate::agents::policy::{policy_graph, policy_mean_action, BaselineHead};
use crate::agents::sac::{BaselineBatch, SacAgent, SacBatch, SacLosses};
use crate::error::{CoreError, Result};
use crate::nn::{load_mlp_from_path, squash, squash_correction, Mlp, SquashedGaussianHead};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// How the baseline acts when queried for its own action, and how much of it
/// enters the composition.
///
/// `Mean` treats the baseline as deterministic: it emits the squashed mean
/// and contributes zero variance to the combined policy. `Sample` draws from
/// the baseline's full squashed Gaussian and contributes its variance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    Mean,
    Sample,
}

/// A pretrained actor network whose parameters can no longer change: the
/// wrapper exposes forward evaluation only. Every head evaluation is counted,
/// which lets experiment harnesses assert how often a method touched its
/// baseline.
pub struct FrozenBaseline {
    net: Mlp,
    action_dim: usize,
    queries: u64,
}

impl FrozenBaseline {
    /// Wraps an actor network; its output width must be twice the action
    /// dimension (mean block + log-std block).
    pub fn from_mlp(net: Mlp) -> Result<FrozenBaseline> {
        let out = net.output_dim();
        if out == 0 || out % 2 != 0 {
            return Err(CoreError::InvalidArgument(format!(
                "baseline actor output width must be even and positive, got {out}"
            )));
        }
        Ok(FrozenBaseline {
            action_dim: out / 2,
            net,
            queries: 0,
        })
    }

    /// Loads a baseline actor from a flat-text checkpoint.
    pub fn load(path: &Path) -> Result<FrozenBaseline> {
        FrozenBaseline::from_mlp(load_mlp_from_path(path)?)
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// Number of baseline head evaluations so far (one per state row).
    pub fn queries(&self) -> u64 {
        self.queries
    }

    /// Evaluates the baseline head on a state batch, returning pre-squash
    /// means and variances (variance from the clamped log-std).
    pub fn head(&mut self, states: &Array2<f64>) -> Result<BaselineHead> {
        let out = self.net.forward(states)?;
        self.queries += states.nrows() as u64;
        let n = states.nrows();
        let k = self.action_dim;
        let mut mean = Array2::zeros((n, k));
        let mut var = Array2::zeros((n, k));
        for b in 0..n {
            for j in 0..k {
                mean[[b, j]] = out[[b, j]];
                let std = out[[b, k + j]]
                    .clamp(crate::nn::LOG_STD_MIN, crate::nn::LOG_STD_MAX)
                    .exp();
                var[[b, j]] = std * std;
            }
        }
        Ok(BaselineHead { mean, var })
    }

    /// The baseline's own action for one state: squashed mean in `Mean` mode,
    /// a squashed Gaussian sample in `Sample` mode. Returns the action and
    /// its log-density (`0.0` for the deterministic mean, which is a point
    /// mass).
    pub fn act<R: Rng>(
        &mut self,
        state: &[f64],
        mode: BaselineMode,
        rng: &mut R,
    ) -> Result<(Vec<f64>, f64)> {
        let states = Array2::from_shape_vec((1, state.len()), state.to_vec())
            .map_err(|e| CoreError::InvalidArgument(e.to_string()))?;
        let out = self.net.forward(&states)?;
        self.queries += 1;
        let k = self.action_dim;
        match mode {
            BaselineMode::Mean => {
                let action: Vec<f64> = (0..k).map(|j| squash(out[[0, j]])).collect();
                Ok((action, 0.0))
            }
            BaselineMode::Sample => {
                let mean = Array2::from_shape_fn((1, k), |(_, j)| out[[0, j]]);
                let raw_log_std = Array2::from_shape_fn((1, k), |(_, j)| out[[0, k + j]]);
                let head = SquashedGaussianHead::new(mean, raw_log_std)?;
                let sample = head.sample(rng);
                Ok((sample.action.row(0).to_vec(), sample.log_prob[0]))
            }
        }
    }
}

/// Effective update set under the burn-in gate: which parameter groups a SAC
/// update may move right now.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UpdateGate {
    pub actor: bool,
    pub critic: bool,
    pub alpha: bool,
}

/// The residual policy: frozen baseline + trainable correction actor (owned
/// by a [`SacAgent`]) + burn-in bookkeeping.
pub struct ResidualPolicy {
    baseline: FrozenBaseline,
    mode: BaselineMode,
    cbi_steps: u64,
    steps_seen: u64,
}

impl ResidualPolicy {
    pub fn new(baseline: FrozenBaseline, mode: BaselineMode, cbi_steps: u64) -> ResidualPolicy {
        ResidualPolicy {
            baseline,
            mode,
            cbi_steps,
            steps_seen: 0,
        }
    }

    pub fn baseline(&self) -> &FrozenBaseline {
        &self.baseline
    }

    pub fn mode(&self) -> BaselineMode {
        self.mode
    }

    pub fn cbi_steps(&self) -> u64 {
        self.cbi_steps
    }

    pub fn steps_seen(&self) -> u64 {
        self.steps_seen
    }

    /// Restores the step counter when resuming from a checkpoint.
    pub fn resume_steps(&mut self, steps_seen: u64) {
        self.steps_seen = steps_seen;
    }

    pub fn in_burn_in(&self) -> bool {
        self.steps_seen < self.cbi_steps
    }

    /// Call once per environment step taken with this policy.
    pub fn note_env_step(&mut self) {
        self.steps_seen += 1;
    }

    /// Which parameter groups may train right now: the critics and the
    /// entropy coefficient always, the actor only after burn-in.
    pub fn burn_in_gate(&self) -> UpdateGate {
        UpdateGate {
            actor: !self.in_burn_in(),
            critic: true,
            alpha: true,
        }
    }

    /// Baseline heads for a batch's states and next states, adjusted for the
    /// baseline mode (a `Mean` baseline contributes zero variance).
    pub fn baseline_batch(&mut self, batch: &SacBatch) -> Result<BaselineBatch> {
        let mut current = self.baseline.head(&batch.states)?;
        let mut next = self.baseline.head(&batch.next_states)?;
        if self.mode == BaselineMode::Mean {
            current.var.fill(0.0);
            next.var.fill(0.0);
        }
        Ok(BaselineBatch { current, next })
    }

    /// Samples the corrected policy for one state. During burn-in this is the
    /// baseline's own action, bit for bit; afterwards a sample from the
    /// combined squashed Gaussian. Returns `(action, log_prob)`.
    pub fn act<R: Rng>(
        &mut self,
        agent: &SacAgent,
        state: &[f64],
        rng: &mut R,
    ) -> Result<(Vec<f64>, f64)> {
        if self.in_burn_in() {
            return self.baseline.act(state, self.mode, rng);
        }
        let states = Array2::from_shape_vec((1, state.len()), state.to_vec())
            .map_err(|e| CoreError::InvalidArgument(e.to_string()))?;
        let mut head = self.baseline.head(&states)?;
        if self.mode == BaselineMode::Mean {
            head.var.fill(0.0);
        }
        let k = agent.config().action_dim;
        let noise = {
            let mut n = Array2::zeros((1, k));
            for v in n.iter_mut() {
                *v = rng.sample(rand_distr::StandardNormal);
            }
            n
        };
        let graph = policy_graph(&agent.actor, k, &states, &noise, Some(&head))?;
        Ok((graph.actions.row(0).to_vec(), graph.log_prob[0]))
    }

    /// Samples one corrected action per row of `states` (burn-in bypass
    /// applies batchwise: during burn-in these are baseline samples).
    pub fn act_batch<R: Rng>(
        &mut self,
        agent: &SacAgent,
        states: &Array2<f64>,
        rng: &mut R,
    ) -> Result<Array2<f64>> {
        let k = agent.config().action_dim;
        let mut head = self.baseline.head(states)?;
        let n = states.nrows();
        if self.in_burn_in() {
            let mut actions = Array2::zeros((n, k));
            for b in 0..n {
                for j in 0..k {
                    let u = match self.mode {
                        BaselineMode::Mean => head.mean[[b, j]],
                        BaselineMode::Sample => {
                            let xi: f64 = rng.sample(rand_distr::StandardNormal);
                            head.mean[[b, j]] + head.var[[b, j]].sqrt() * xi
                        }
                    };
                    actions[[b, j]] = squash(u);
                }
            }
            return Ok(actions);
        }
        if self.mode == BaselineMode::Mean {
            head.var.fill(0.0);
        }
        let mut noise = Array2::zeros((n, k));
        for v in noise.iter_mut() {
            *v = rng.sample(rand_distr::StandardNormal);
        }
        let graph = policy_graph(&agent.actor, k, states, &noise, Some(&head))?;
        Ok(graph.actions)
    }

    /// Deterministic action of the corrected policy: `tanh(μ_b + μ_c)`.
    /// (During burn-in the correction mean is ignored and this is the
    /// baseline's squashed mean.)
    pub fn mean_action(&mut self, agent: &SacAgent, state: &[f64]) -> Result<Vec<f64>> {
        let states = Array2::from_shape_vec((1, state.len()), state.to_vec())
            .map_err(|e| CoreError::InvalidArgument(e.to_string()))?;
        let head = self.baseline.head(&states)?;
        let k = agent.config().action_dim;
        if self.in_burn_in() {
            return Ok((0..k).map(|j| squash(head.mean[[0, j]])).collect());
        }
        let actions = policy_mean_action(&agent.actor, k, &states, Some(&head.mean))?;
        Ok(actions.row(0).to_vec())
    }

    /// One SAC update of the correction through the composed policy, with the
    /// actor gated by burn-in.
    pub fn update<R: Rng>(
        &mut self,
        agent: &mut SacAgent,
        batch: &SacBatch,
        rng: &mut R,
    ) -> Result<SacLosses> {
        let baseline = self.baseline_batch(batch)?;
        let gate = self.burn_in_gate();
        agent.sac_update(batch, Some(&baseline), gate.actor, rng)
    }

    /// Log-density of the combined policy at a squashed action (post
    /// burn-in). Exposed for diagnostics and tests.
    pub fn log_prob(&mut self, agent: &SacAgent, state: &[f64], action: &[f64]) -> Result<f64> {
        let states = Array2::from_shape_vec((1, state.len()), state.to_vec())
            .map_err(|e| CoreError::InvalidArgument(e.to_string()))?;
        let mut head = self.baseline.head(&states)?;
        if self.mode == BaselineMode::Mean {
            head.var.fill(0.0);
        }
        let k = agent.config().action_dim;
        if action.len() != k {
            return Err(CoreError::DimensionMismatch {
                context: "residual log_prob action dim",
                expected: k,
                got: action.len(),
            });
        }
        let out = agent.actor.forward(&states)?;
        let mut lp = 0.0;
        for j in 0..k {
            let sigma_c = out[[0, k + j]]
                .clamp(crate::nn::LOG_STD_MIN, crate::nn::LOG_STD_MAX)
                .exp();
            let var = head.var[[0, j]] + sigma_c * sigma_c;
            let s = var.sqrt();
            let mu = head.mean[[0, j]] + out[[0, j]];
            let a = action[j].clamp(-1.0 + 1e-12, 1.0 - 1e-12);
            let u = a.atanh();
            lp += crate::nn::normal_log_prob(u, mu, s) - squash_correction(a);
        }
        Ok(lp)
    }
}

/// Re-initializes the final layer of a correction actor so the correction
/// starts negligibly small: mean-head weights and biases from
/// `Uniform(−1e-3, 1e-3)`, log-std-head weights likewise near zero with the
/// bias set to `ln σ₀`.
pub fn init_near_zero<R: Rng>(net: &mut Mlp, sigma0: f64, rng: &mut R) -> Result<()> {
    if sigma0 <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "initial correction std must be positive, got {sigma0}"
        )));
    }
    let out = net.output_dim();
    if out == 0 || out % 2 != 0 {
        return Err(CoreError::InvalidArgument(format!(
            "correction actor output width must be even, got {out}"
        )));
    }
    let action_dim = out / 2;
    let last = net.n_layers() - 1;
    let (w, b) = net.layer_mut(last);
    for mut row in w.rows_mut() {
        for v in row.iter_mut() {
            *v = rng.random_range(-1e-3..1e-3);
        }
    }
    for j in 0..action_dim {
        b[j] = rng.random_range(-1e-3..1e-3);
        b[action_dim + j] = sigma0.ln();
    }
    Ok(())
}
