//! The outer training loop shared by all five methods, and the model-based
//! rollout/policy-learning step.
//!
//! Per environment step the loop:
//!
//! 1. samples one action per antenna from the behavior policy and steps the
//!    environment, collecting one transition per antenna (parameter sharing:
//!    all antennas feed one replay buffer and one set of networks);
//! 2. pushes every transition into the real-experience buffer;
//! 3. once past the learning-starts threshold, performs one dynamics-model
//!    training step (model-based methods only) and one policy-learning step:
//!    a SAC (or DQN) update on a real batch, plus — for model-based methods —
//!    `H` further SAC updates on model-generated batches branched from the
//!    real states.
//!
//! Model-generated transitions live only inside the policy-learning step;
//! they are never written to the real buffer. Ablation switches carve the
//! paper's methods out of the same loop: SRPL drops the model (its counters
//! stay at zero), MBSAC drops the baseline, plain SAC drops both, DQN swaps
//! the learner.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{
    init_near_zero, BaselineMode, DqnAgent, DqnBatch, DqnConfig, FrozenBaseline, ResidualPolicy,
    SacAgent, SacBatch, SacConfig, SacLosses, DQN_ACTION_DELTAS_DEG,
};
use crate::env::{reward_from_state, state_bounds, AntennaEnv, ACTION_BOUND_DEG, OBS_DIM};
use crate::error::{CoreError, Result};
use crate::mdp::{Action, ReplayBuffer};
#[cfg(test)]
use crate::mdp::Transition;
use crate::model::GaussianDynamicsModel;
use crate::nn::save_mlp_to_path;

/// Which learner drives the run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Plain soft actor-critic, learning from scratch.
    Sac,
    /// Deep Q-learning over the discrete tilt increments.
    Dqn,
    /// Stochastic residual policy on a frozen baseline, no dynamics model.
    Srpl,
    /// Model-based SAC: dynamics model, no baseline.
    Mbsac,
    /// Model-based residual policy learning: baseline + dynamics model.
    Mbrpl,
}

impl Method {
    pub fn uses_model(self) -> bool {
        matches!(self, Method::Mbsac | Method::Mbrpl)
    }

    pub fn uses_baseline(self) -> bool {
        matches!(self, Method::Srpl | Method::Mbrpl)
    }

    pub fn is_discrete(self) -> bool {
        matches!(self, Method::Dqn)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Sac => "sac",
            Method::Dqn => "dqn",
            Method::Srpl => "srpl",
            Method::Mbsac => "mbsac",
            Method::Mbrpl => "mbrpl",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Method> {
        match s {
            "sac" => Ok(Method::Sac),
            "dqn" => Ok(Method::Dqn),
            "srpl" => Ok(Method::Srpl),
            "mbsac" => Ok(Method::Mbsac),
            "mbrpl" => Ok(Method::Mbrpl),
            other => Err(CoreError::InvalidArgument(format!(
                "unknown method '{other}' (expected sac|dqn|srpl|mbsac|mbrpl)"
            ))),
        }
    }
}

/// Initial std of the residual correction head set by near-zero init.
pub const CORRECTION_SIGMA0: f64 = 0.1;

/// Training-loop hyperparameters (agent hyperparameters ride along inside
/// [`SacConfig`]/[`DqnConfig`]).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub method: Method,
    pub total_steps: u64,
    /// Environment step at which updates begin.
    pub learning_starts: u64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Generated-batch SAC updates per environment step (model-based methods
    /// only): `H` rollout iterations of `B` transitions each, branched from
    /// the real batch's states.
    pub rollout_horizon: usize,
    pub model_hidden: Vec<usize>,
    pub model_lr: f64,
    /// Critic burn-in length in environment steps (residual methods).
    pub cbi_steps: u64,
    pub baseline_mode: BaselineMode,
    pub sac: SacConfig,
    pub dqn: DqnConfig,
    /// Steps per epoch; checkpoints are written at epoch boundaries.
    pub epoch_length: u64,
    /// Trailing window (in env steps) for the logged reward running average.
    pub reward_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: Method::Mbrpl,
            total_steps: 10_000,
            learning_starts: 100,
            batch_size: 128,
            buffer_capacity: 10_000,
            rollout_horizon: 10,
            model_hidden: vec![64, 64, 64],
            model_lr: 1e-3,
            cbi_steps: 0,
            baseline_mode: BaselineMode::Mean,
            sac: SacConfig::default(),
            dqn: DqnConfig::default(),
            epoch_length: 500,
            reward_window: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 {
            return Err(CoreError::InvalidArgument(
                "total_steps must be positive".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(CoreError::InvalidArgument(
                "batch_size must be positive".into(),
            ));
        }
        if self.method.uses_model() && self.rollout_horizon == 0 {
            return Err(CoreError::InvalidArgument(
                "model-based methods need rollout_horizon ≥ 1".into(),
            ));
        }
        if self.epoch_length == 0 {
            return Err(CoreError::InvalidArgument(
                "epoch_length must be positive".into(),
            ));
        }
        if self.reward_window == 0 {
            return Err(CoreError::InvalidArgument(
                "reward_window must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The continuous-action behavior policy: a SAC agent, optionally wrapped by
/// a residual policy around a frozen baseline.
pub struct ContinuousPolicy {
    pub agent: SacAgent,
    pub residual: Option<ResidualPolicy>,
}

impl ContinuousPolicy {
    /// Samples an action in `(−1,1)` for one observation.
    pub fn act<R: Rng>(&mut self, state: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        match self.residual.as_mut() {
            Some(res) => Ok(res.act(&self.agent, state, rng)?.0),
            None => self.agent.act(state, false, rng),
        }
    }

    /// Samples actions for a state batch.
    pub fn act_batch<R: Rng>(&mut self, states: &Array2<f64>, rng: &mut R) -> Result<Array2<f64>> {
        match self.residual.as_mut() {
            Some(res) => res.act_batch(&self.agent, states, rng),
            None => self.agent.act_batch(states, rng),
        }
    }

    /// Deterministic (mean) action for evaluation.
    pub fn mean_action(&mut self, state: &[f64]) -> Result<Vec<f64>> {
        match self.residual.as_mut() {
            Some(res) => res.mean_action(&self.agent, state),
            None => self.agent.mean_act(state),
        }
    }

    /// One SAC update, respecting residual composition and the burn-in gate.
    pub fn update<R: Rng>(&mut self, batch: &SacBatch, rng: &mut R) -> Result<SacLosses> {
        match self.residual.as_mut() {
            Some(res) => res.update(&mut self.agent, batch, rng),
            None => self.agent.sac_update(batch, None, true, rng),
        }
    }

    pub fn note_env_step(&mut self) {
        if let Some(res) = self.residual.as_mut() {
            res.note_env_step();
        }
    }
}

/// What one rollout/policy-learning step did.
#[derive(Clone, Copy, Debug)]
pub struct RolloutReport {
    /// SAC updates performed (1 on the real batch + one per generated batch).
    pub sac_updates: usize,
    /// Model-generated transitions consumed this step.
    pub generated_transitions: usize,
    /// True if the rollout stopped early on a non-finite model emission.
    pub truncated: bool,
    /// Mean critic-1 loss across the updates.
    pub critic_loss: f64,
    /// Mean actor loss across the updates.
    pub actor_loss: f64,
    /// Entropy coefficient after the last update.
    pub alpha: f64,
}

/// One policy-learning step: a SAC update on a batch of real transitions,
/// then — when a model is supplied — `horizon` further updates on generated
/// batches. Generation branches from the real batch's states: actions come
/// from the current policy, next states from the model (clamped to the state
/// bounds), rewards from the environment's reward function, done flags are
/// always false (the model cannot predict termination). A non-finite model
/// emission truncates the rollout and is reported, not fatal.
pub fn rollout_policy_learning_step<R: Rng>(
    model: Option<&mut GaussianDynamicsModel>,
    policy: &mut ContinuousPolicy,
    buffer: &ReplayBuffer,
    horizon: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<RolloutReport> {
    let real = SacBatch::from_transitions(&buffer.sample(batch_size, rng)?)?;
    let losses = policy.update(&real, rng)?;
    let mut critic_sum = losses.critic1;
    let mut actor_sum = losses.actor;
    let mut alpha = losses.alpha;
    let mut sac_updates = 1usize;
    let mut generated = 0usize;
    let mut truncated = false;

    if let Some(model) = model {
        let mut states = real.states.clone();
        for _ in 0..horizon {
            let actions = policy.act_batch(&states, rng)?;
            let next = match model.predict(&states, &actions, rng) {
                Ok(next) => next,
                Err(CoreError::NonFinite(_)) => {
                    truncated = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            let n = states.nrows();
            let mut rewards = ndarray::Array1::zeros(n);
            for b in 0..n {
                let row: Vec<f64> = next.row(b).to_vec();
                rewards[b] = reward_from_state(&row);
            }
            let gen_batch = SacBatch {
                states,
                actions,
                rewards,
                next_states: next.clone(),
                dones: ndarray::Array1::zeros(n),
            };
            let losses = policy.update(&gen_batch, rng)?;
            critic_sum += losses.critic1;
            actor_sum += losses.actor;
            alpha = losses.alpha;
            sac_updates += 1;
            generated += n;
            states = next;
        }
    }

    Ok(RolloutReport {
        sac_updates,
        generated_transitions: generated,
        truncated,
        critic_loss: critic_sum / sac_updates as f64,
        actor_loss: actor_sum / sac_updates as f64,
        alpha,
    })
}

/// One logged row of the training loop.
#[derive(Clone, Copy, Debug)]
pub struct StepRecord {
    /// Environment step index, 1-based in the log.
    pub step: u64,
    /// Mean per-antenna reward at this step.
    pub reward: f64,
    /// Trailing-window running average of `reward`.
    pub env_reward_running_avg: f64,
    pub model_loss: Option<f64>,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub alpha: Option<f64>,
}

/// Everything a finished run hands back to the harness.
pub struct TrainResult {
    pub records: Vec<StepRecord>,
    /// Total transitions pushed into the real buffer (one per antenna per
    /// env step).
    pub insert_count: u64,
    pub model_predict_calls: u64,
    pub model_train_calls: u64,
    pub baseline_queries: u64,
    /// Rollouts cut short by non-finite model emissions.
    pub truncated_rollouts: u64,
    pub diagnostics: Vec<String>,
    pub policy: Option<ContinuousPolicy>,
    pub dqn: Option<DqnAgent>,
    pub model: Option<GaussianDynamicsModel>,
}

fn write_csv_row(w: &mut impl Write, rec: &StepRecord) -> std::io::Result<()> {
    fn opt(v: Option<f64>) -> String {
        v.map(|x| x.to_string()).unwrap_or_default()
    }
    writeln!(
        w,
        "{},{},{},{},{},{}",
        rec.step,
        rec.env_reward_running_avg,
        opt(rec.model_loss),
        opt(rec.critic_loss),
        opt(rec.actor_loss),
        opt(rec.alpha),
    )
}

struct CheckpointSink<'a> {
    dir: Option<&'a Path>,
}

impl CheckpointSink<'_> {
    fn save(
        &self,
        tag: &str,
        policy: Option<&ContinuousPolicy>,
        dqn: Option<&DqnAgent>,
        model: Option<&GaussianDynamicsModel>,
    ) -> Result<Vec<PathBuf>> {
        let Some(dir) = self.dir else {
            return Ok(Vec::new());
        };
        let mut written = Vec::new();
        if let Some(p) = policy {
            let path = dir.join(format!("{tag}.actor.ck"));
            save_mlp_to_path(&path, &p.agent.actor)?;
            written.push(path);
            let path = dir.join(format!("{tag}.critic1.ck"));
            save_mlp_to_path(&path, &p.agent.critic1)?;
            written.push(path);
        }
        if let Some(d) = dqn {
            let path = dir.join(format!("{tag}.q.ck"));
            save_mlp_to_path(&path, &d.q)?;
            written.push(path);
        }
        if let Some(m) = model {
            let path = dir.join(format!("{tag}.model.ck"));
            save_mlp_to_path(&path, m.net())?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Per-step learning outputs for the log.
struct LearnStats {
    model_loss: Option<f64>,
    critic_loss: Option<f64>,
    actor_loss: Option<f64>,
    alpha: Option<f64>,
    truncated: bool,
    generated: usize,
}

/// Model step + policy-learning step. All mutable borrows end here, so the
/// caller can snapshot crash checkpoints when this fails.
fn learn_phase<R: Rng>(
    cfg: &TrainConfig,
    buffer: &ReplayBuffer,
    policy: &mut Option<ContinuousPolicy>,
    dqn: &mut Option<DqnAgent>,
    model: &mut Option<GaussianDynamicsModel>,
    rng: &mut R,
) -> Result<LearnStats> {
    let mut stats = LearnStats {
        model_loss: None,
        critic_loss: None,
        actor_loss: None,
        alpha: None,
        truncated: false,
        generated: 0,
    };
    if let Some(m) = model.as_mut() {
        let batch = buffer.sample(cfg.batch_size, rng)?;
        let real = SacBatch::from_transitions(&batch)?;
        stats.model_loss =
            Some(m.train_step(&real.states, &real.actions, &real.next_states, rng)?);
    }
    match (policy.as_mut(), dqn.as_mut()) {
        (Some(p), _) => {
            let report = rollout_policy_learning_step(
                model.as_mut(),
                p,
                buffer,
                cfg.rollout_horizon,
                cfg.batch_size,
                rng,
            )?;
            stats.truncated = report.truncated;
            stats.generated = report.generated_transitions;
            stats.critic_loss = Some(report.critic_loss);
            stats.actor_loss = Some(report.actor_loss);
            stats.alpha = Some(report.alpha);
        }
        (None, Some(d)) => {
            let batch = DqnBatch::from_transitions(&buffer.sample(cfg.batch_size, rng)?)?;
            stats.critic_loss = Some(d.dqn_update(&batch)?);
        }
        (None, None) => unreachable!("one learner is always constructed"),
    }
    Ok(stats)
}

/// Runs the full training loop for any of the five methods.
///
/// `baseline` must be supplied exactly when the method uses one (SRPL,
/// MBRPL). When `out_dir` is given, a `steps.csv` training log and per-epoch
/// checkpoints land there; on a non-finite loss the loop writes `crash.*.ck`
/// checkpoints and returns the error.
pub fn mbrpl_train(
    env: &mut AntennaEnv,
    cfg: &TrainConfig,
    baseline: Option<FrozenBaseline>,
    out_dir: Option<&Path>,
    seed: u64,
) -> Result<TrainResult> {
    cfg.validate()?;
    if cfg.method.uses_baseline() != baseline.is_some() {
        return Err(CoreError::InvalidArgument(format!(
            "method {} {} a baseline checkpoint",
            cfg.method.name(),
            if cfg.method.uses_baseline() {
                "requires"
            } else {
                "does not take"
            }
        )));
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n_agents = env.n_agents();
    let (lo, hi) = state_bounds(env.config().clip_sigmas);

    // Component construction order is fixed so a seed means the same initial
    // networks for every method that uses them: learner, residual init,
    // model.
    let mut policy: Option<ContinuousPolicy> = None;
    let mut dqn: Option<DqnAgent> = None;
    if cfg.method.is_discrete() {
        dqn = Some(DqnAgent::new(cfg.dqn.clone(), &mut rng)?);
    } else {
        let mut agent = SacAgent::new(cfg.sac.clone(), &mut rng)?;
        let residual = match baseline {
            Some(b) => {
                init_near_zero(&mut agent.actor, CORRECTION_SIGMA0, &mut rng)?;
                Some(ResidualPolicy::new(b, cfg.baseline_mode, cfg.cbi_steps))
            }
            None => None,
        };
        policy = Some(ContinuousPolicy { agent, residual });
    }
    let mut model = if cfg.method.uses_model() {
        Some(GaussianDynamicsModel::new(
            OBS_DIM,
            1,
            &cfg.model_hidden,
            &lo,
            &hi,
            cfg.model_lr,
            &mut rng,
        )?)
    } else {
        None
    };

    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
    let mut records = Vec::with_capacity(cfg.total_steps as usize);
    let mut window: VecDeque<f64> = VecDeque::with_capacity(cfg.reward_window);
    let mut window_sum = 0.0;
    let mut diagnostics = Vec::new();
    let mut truncated_rollouts = 0u64;

    let mut csv = match out_dir {
        Some(dir) => {
            let mut w = BufWriter::new(File::create(dir.join("steps.csv"))?);
            writeln!(
                w,
                "step,env_reward_running_avg,model_loss,critic_loss,actor_loss,alpha"
            )?;
            Some(w)
        }
        None => None,
    };
    let sink = CheckpointSink { dir: out_dir };

    for t in 0..cfg.total_steps {
        // --- Act on every antenna and step the world.
        let obs = env.observations();
        let mut deltas = Vec::with_capacity(n_agents);
        let mut dqn_choices = Vec::with_capacity(n_agents);
        for ob in &obs {
            let state = ob.to_vec();
            match (policy.as_mut(), dqn.as_mut()) {
                (Some(p), _) => {
                    let a = p.act(&state, &mut rng)?;
                    deltas.push(a[0] * ACTION_BOUND_DEG);
                }
                (None, Some(d)) => {
                    let idx = d.act(&state, t, &mut rng)?;
                    dqn_choices.push(idx);
                    deltas.push(DQN_ACTION_DELTAS_DEG[idx]);
                }
                (None, None) => unreachable!("one learner is always constructed"),
            }
        }
        let mut transitions = env.step(&deltas)?;
        if cfg.method.is_discrete() {
            for (tr, idx) in transitions.iter_mut().zip(dqn_choices.iter()) {
                tr.action = Action::Discrete(*idx);
            }
        }
        let step_reward =
            transitions.iter().map(|tr| tr.reward).sum::<f64>() / transitions.len() as f64;
        for tr in transitions {
            buffer.push(tr)?;
        }
        if let Some(p) = policy.as_mut() {
            p.note_env_step();
        }

        // --- Learn.
        let learning = t + 1 >= cfg.learning_starts && buffer.len() >= cfg.batch_size;
        let stats = if learning {
            match learn_phase(cfg, &buffer, &mut policy, &mut dqn, &mut model, &mut rng) {
                Ok(stats) => stats,
                Err(e) => {
                    match sink.save("crash", policy.as_ref(), dqn.as_ref(), model.as_ref()) {
                        Ok(paths) if !paths.is_empty() => {
                            eprintln!("crash checkpoints written: {paths:?}");
                        }
                        Ok(_) => {}
                        Err(save_err) => {
                            eprintln!("failed to write crash checkpoint: {save_err}");
                        }
                    }
                    return Err(e);
                }
            }
        } else {
            LearnStats {
                model_loss: None,
                critic_loss: None,
                actor_loss: None,
                alpha: None,
                truncated: false,
                generated: 0,
            }
        };
        if stats.truncated {
            truncated_rollouts += 1;
            diagnostics.push(format!(
                "step {}: rollout truncated after {} generated transitions (non-finite model emission)",
                t + 1,
                stats.generated
            ));
        }

        // --- Log.
        if window.len() == cfg.reward_window {
            window_sum -= window.pop_front().expect("window non-empty");
        }
        window.push_back(step_reward);
        window_sum += step_reward;
        let rec = StepRecord {
            step: t + 1,
            reward: step_reward,
            env_reward_running_avg: window_sum / window.len() as f64,
            model_loss: stats.model_loss,
            critic_loss: stats.critic_loss,
            actor_loss: stats.actor_loss,
            alpha: stats.alpha,
        };
        if let Some(w) = csv.as_mut() {
            write_csv_row(w, &rec)?;
        }
        records.push(rec);

        if (t + 1) % cfg.epoch_length == 0 {
            let epoch = (t + 1) / cfg.epoch_length;
            sink.save(
                &format!("epoch_{epoch:04}"),
                policy.as_ref(),
                dqn.as_ref(),
                model.as_ref(),
            )?;
        }
    }

    if let Some(w) = csv.as_mut() {
        w.flush()?;
    }

    Ok(TrainResult {
        records,
        insert_count: buffer.insert_count(),
        model_predict_calls: model.as_ref().map_or(0, |m| m.predict_calls()),
        model_train_calls: model.as_ref().map_or(0, |m| m.train_calls()),
        baseline_queries: policy
            .as_ref()
            .and_then(|p| p.residual.as_ref())
            .map_or(0, |r| r.baseline().queries()),
        truncated_rollouts,
        diagnostics,
        policy,
        dqn,
        model,
    })
}

/// Average total episode reward (mean per-antenna reward summed over an
/// episode) of the current policy acting deterministically, over `episodes`
/// episodes on `env`, without mutating the learner. The environment's tilts
/// are restored to their entry values before each episode and on exit.
pub fn evaluate_mean_policy(
    env: &mut AntennaEnv,
    policy: &mut ContinuousPolicy,
    episodes: usize,
) -> Result<f64> {
    let saved = env.tilts();
    let episode_length = env.config().episode_length;
    let mut total = 0.0;
    for _ in 0..episodes {
        env.set_tilts(&saved)?;
        let mut ep = 0.0;
        for _ in 0..episode_length {
            let obs = env.observations();
            let mut deltas = Vec::with_capacity(obs.len());
            for ob in &obs {
                let a = policy.mean_action(&ob.to_vec())?;
                deltas.push(a[0] * ACTION_BOUND_DEG);
            }
            let transitions = env.step(&deltas)?;
            ep += transitions.iter().map(|t| t.reward).sum::<f64>() / transitions.len() as f64;
        }
        total += ep;
    }
    env.set_tilts(&saved)?;
    Ok(total / episodes as f64)
}

/// Same protocol as [`evaluate_mean_policy`] for a uniformly random policy:
/// i.i.d. tilt deltas in the action box per antenna per step.
pub fn evaluate_random_policy<R: Rng>(
    env: &mut AntennaEnv,
    episodes: usize,
    rng: &mut R,
) -> Result<f64> {
    let saved = env.tilts();
    let episode_length = env.config().episode_length;
    let mut total = 0.0;
    for _ in 0..episodes {
        env.set_tilts(&saved)?;
        let mut ep = 0.0;
        for _ in 0..episode_length {
            let n = env.n_agents();
            let deltas: Vec<f64> = (0..n)
                .map(|_| rng.random_range(-ACTION_BOUND_DEG..ACTION_BOUND_DEG))
                .collect();
            let transitions = env.step(&deltas)?;
            ep += transitions.iter().map(|t| t.reward).sum::<f64>() / transitions.len() as f64;
        }
        total += ep;
    }
    env.set_tilts(&saved)?;
    Ok(total / episodes as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvConfig, KpiNormalizer};

    fn tiny_env(seed: u64) -> AntennaEnv {
        let cfg = EnvConfig {
            n_rings: 0,
            n_users: 30,
            building_count: 0,
            buildings_enabled: false,
            episode_length: 25,
            ..EnvConfig::default()
        };
        AntennaEnv::new(cfg, KpiNormalizer::identity(3.0), seed).unwrap()
    }

    fn tiny_cfg(method: Method) -> TrainConfig {
        TrainConfig {
            method,
            total_steps: 40,
            learning_starts: 10,
            batch_size: 16,
            buffer_capacity: 2000,
            rollout_horizon: 2,
            model_hidden: vec![16, 16],
            sac: SacConfig {
                hidden: vec![16, 16],
                ..SacConfig::default()
            },
            dqn: DqnConfig {
                hidden: vec![16, 16],
                ..DqnConfig::default()
            },
            epoch_length: 20,
            ..TrainConfig::default()
        }
    }

    fn tiny_baseline() -> FrozenBaseline {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let mut net = crate::nn::Mlp::new(&[OBS_DIM, 16, 2], &mut rng).unwrap();
        // Keep the baseline std moderate regardless of random init.
        let (_, b) = net.layer_mut(1);
        b[1] = -1.0;
        FrozenBaseline::from_mlp(net).unwrap()
    }

    #[test]
    fn buffer_accounting_is_one_insert_per_antenna_per_step() {
        let mut env = tiny_env(1);
        let n = env.n_agents();
        assert_eq!(n, 3); // single site = 3 antennas in the tiny env
        let result = mbrpl_train(&mut env, &tiny_cfg(Method::Sac), None, None, 5).unwrap();
        assert_eq!(result.insert_count, 40 * n as u64);
    }

    #[test]
    fn srpl_never_touches_the_model() {
        let mut env = tiny_env(2);
        let result =
            mbrpl_train(&mut env, &tiny_cfg(Method::Srpl), Some(tiny_baseline()), None, 6).unwrap();
        assert_eq!(result.model_predict_calls, 0);
        assert_eq!(result.model_train_calls, 0);
        assert!(result.model.is_none());
        assert!(result.baseline_queries > 0);
    }

    #[test]
    fn mbsac_never_queries_a_baseline() {
        let mut env = tiny_env(3);
        let result = mbrpl_train(&mut env, &tiny_cfg(Method::Mbsac), None, None, 7).unwrap();
        assert_eq!(result.baseline_queries, 0);
        assert!(result.model_train_calls > 0);
        assert!(result.model_predict_calls > 0);
    }

    #[test]
    fn mbrpl_rollout_and_model_call_accounting() {
        let mut env = tiny_env(4);
        let cfg = tiny_cfg(Method::Mbrpl);
        let result = mbrpl_train(&mut env, &cfg, Some(tiny_baseline()), None, 8).unwrap();
        // Learning runs on steps 10..=40 → 31 update steps, each with one
        // model training step and H=2 batched predictions.
        let steps_learning = 40 - 10 + 1;
        assert_eq!(result.model_train_calls, steps_learning);
        assert_eq!(result.model_predict_calls, steps_learning * 2);
        assert_eq!(result.truncated_rollouts, 0);
        assert_eq!(result.insert_count, 40 * 3);
    }

    #[test]
    fn method_baseline_pairing_is_enforced() {
        let mut env = tiny_env(5);
        assert!(mbrpl_train(&mut env, &tiny_cfg(Method::Mbrpl), None, None, 9).is_err());
        assert!(
            mbrpl_train(&mut env, &tiny_cfg(Method::Sac), Some(tiny_baseline()), None, 10).is_err()
        );
    }

    #[test]
    fn dqn_runs_and_logs_td_loss() {
        let mut env = tiny_env(6);
        let result = mbrpl_train(&mut env, &tiny_cfg(Method::Dqn), None, None, 11).unwrap();
        let last = result.records.last().unwrap();
        assert!(last.critic_loss.is_some());
        assert!(last.actor_loss.is_none());
        assert!(last.alpha.is_none());
        assert!(result.dqn.is_some());
    }

    #[test]
    fn training_log_and_checkpoints_land_in_out_dir() {
        let dir = std::env::temp_dir().join(format!("tiltlab_train_{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let mut env = tiny_env(7);
        let result =
            mbrpl_train(&mut env, &tiny_cfg(Method::Mbsac), None, Some(&dir), 12).unwrap();
        let csv = std::fs::read_to_string(dir.join("steps.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "step,env_reward_running_avg,model_loss,critic_loss,actor_loss,alpha"
        );
        assert_eq!(lines.count(), result.records.len());
        // Epochs at steps 20 and 40.
        assert!(dir.join("epoch_0001.actor.ck").exists());
        assert!(dir.join("epoch_0002.model.ck").exists());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn identical_seeds_reproduce_the_run() {
        let run = |seed| {
            let mut env = tiny_env(8);
            let result = mbrpl_train(&mut env, &tiny_cfg(Method::Sac), None, None, seed).unwrap();
            result
                .records
                .iter()
                .map(|r| r.env_reward_running_avg)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(13), run(13));
        assert_ne!(run(13), run(14));
    }

    #[test]
    fn rollout_step_without_model_is_single_update() {
        let mut rng = ChaCha12Rng::seed_from_u64(20);
        let mut buffer = ReplayBuffer::new(100).unwrap();
        for i in 0..50 {
            buffer
                .push(Transition {
                    state: vec![0.1 * i as f64, 0.0, 0.0, 0.0],
                    action: Action::Continuous(vec![0.2]),
                    reward: 0.5,
                    next_state: vec![0.1 * i as f64, 0.0, 0.0, 0.0],
                    done: false,
                    agent_id: 0,
                })
                .unwrap();
        }
        let mut policy = ContinuousPolicy {
            agent: SacAgent::new(
                SacConfig {
                    hidden: vec![8],
                    ..SacConfig::default()
                },
                &mut rng,
            )
            .unwrap(),
            residual: None,
        };
        let report =
            rollout_policy_learning_step(None, &mut policy, &buffer, 10, 16, &mut rng).unwrap();
        assert_eq!(report.sac_updates, 1);
        assert_eq!(report.generated_transitions, 0);
        assert!(!report.truncated);
    }

    #[test]
    fn generated_rewards_share_the_env_reward_path() {
        // The rewards inside generated batches must equal reward_from_state
        // of the model's emission; probe by running one rollout step with a
        // model pinned to a constant emission and checking the policy sees
        // that exact reward (via the critic target drift toward it under
        // γ≈0 — here simply recompute on the clamped prediction).
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let (lo, hi) = state_bounds(3.0);
        let mut model =
            GaussianDynamicsModel::new(OBS_DIM, 1, &[], &lo, &hi, 1e-3, &mut rng).unwrap();
        // Bias-only network: emission mean fixed, log-variance tiny.
        *model.net_mut() = crate::nn::Mlp::zeros(&[OBS_DIM + 1, 2 * OBS_DIM]).unwrap();
        {
            let (_, b) = model.net_mut().layer_mut(0);
            b[0] = 7.0;
            b[1] = 0.5;
            b[2] = -0.25;
            b[3] = 1.5;
            for j in OBS_DIM..2 * OBS_DIM {
                b[j] = -700.0;
            }
        }
        let states = Array2::zeros((5, OBS_DIM));
        let actions = Array2::zeros((5, 1));
        let next = model.predict(&states, &actions, &mut rng).unwrap();
        for b in 0..5 {
            let row: Vec<f64> = next.row(b).to_vec();
            assert_eq!(reward_from_state(&row), 0.5 - 0.25 + 1.5);
        }
    }
}
