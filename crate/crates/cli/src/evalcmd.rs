//! Policy evaluation: roll episodes from randomized start tilts and report
//! the per-step reward level (mean across antennas, averaged over the
//! episode), which is directly comparable with the training log's running
//! average.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use tiltlab::agents::{BaselineMode, FrozenBaseline};
use tiltlab::env::{AntennaEnv, ACTION_BOUND_DEG, TILT_RANGE_DEG};

use crate::config::ExperimentConfig;
use crate::run::build_env;
use crate::CliResult;

/// Mean ± sample standard deviation of per-episode reward levels.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EvalStats {
    pub mean: f64,
    pub std: f64,
    pub episodes: usize,
}

impl EvalStats {
    fn from_episodes(values: &[f64]) -> EvalStats {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        EvalStats {
            mean,
            std,
            episodes: n,
        }
    }
}

/// Runs `episodes` episodes; each starts from tilts drawn uniformly in the
/// tilt range by `tilt_rng`, so two policies evaluated with identically
/// seeded tilt generators face the same start configurations. `act` maps one
/// antenna's observation vector to its tilt delta in degrees. The
/// environment's tilts are restored afterwards.
pub fn evaluate_episodes<F>(
    env: &mut AntennaEnv,
    episodes: usize,
    tilt_rng: &mut ChaCha12Rng,
    mut act: F,
) -> tiltlab::Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> tiltlab::Result<f64>,
{
    let saved = env.tilts();
    let n = env.n_agents();
    let episode_length = env.config().episode_length;
    let mut values = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let start: Vec<f64> = (0..n)
            .map(|_| tilt_rng.random_range(TILT_RANGE_DEG.0..TILT_RANGE_DEG.1))
            .collect();
        env.set_tilts(&start)?;
        let mut total = 0.0;
        for _ in 0..episode_length {
            let obs = env.observations();
            let mut deltas = Vec::with_capacity(n);
            for ob in &obs {
                deltas.push(act(&ob.to_vec())?);
            }
            let transitions = env.step(&deltas)?;
            total +=
                transitions.iter().map(|t| t.reward).sum::<f64>() / transitions.len() as f64;
        }
        values.push(total / episode_length as f64);
    }
    env.set_tilts(&saved)?;
    Ok(values)
}

/// Deterministic baseline evaluation (squashed-mean actions) under the
/// shared start-tilt protocol.
pub fn evaluate_baseline(
    env: &mut AntennaEnv,
    baseline: &mut FrozenBaseline,
    episodes: usize,
    tilt_seed: u64,
) -> tiltlab::Result<EvalStats> {
    let mut tilt_rng = ChaCha12Rng::seed_from_u64(tilt_seed);
    let mut noise = ChaCha12Rng::seed_from_u64(tilt_seed ^ 0x5eed);
    let values = evaluate_episodes(env, episodes, &mut tilt_rng, |state| {
        let (a, _) = baseline.act(state, BaselineMode::Mean, &mut noise)?;
        Ok(a[0] * ACTION_BOUND_DEG)
    })?;
    Ok(EvalStats::from_episodes(&values))
}

/// Uniform-random tilt deltas under the same start-tilt protocol.
pub fn evaluate_random(
    env: &mut AntennaEnv,
    episodes: usize,
    tilt_seed: u64,
    action_seed: u64,
) -> tiltlab::Result<EvalStats> {
    let mut tilt_rng = ChaCha12Rng::seed_from_u64(tilt_seed);
    let mut action_rng = ChaCha12Rng::seed_from_u64(action_seed);
    let values = evaluate_episodes(env, episodes, &mut tilt_rng, |_| {
        Ok(action_rng.random_range(-ACTION_BOUND_DEG..ACTION_BOUND_DEG))
    })?;
    Ok(EvalStats::from_episodes(&values))
}

/// One-episode deterministic evaluation from the environment's current
/// tilts — the reference level for the burn-in dip statistic.
pub fn evaluate_baseline_from_current(
    env: &mut AntennaEnv,
    baseline: &mut FrozenBaseline,
) -> tiltlab::Result<f64> {
    let saved = env.tilts();
    let episode_length = env.config().episode_length;
    let n = env.n_agents();
    let mut rng = ChaCha12Rng::seed_from_u64(0);
    let mut total = 0.0;
    for _ in 0..episode_length {
        let obs = env.observations();
        let mut deltas = Vec::with_capacity(n);
        for ob in &obs {
            let (a, _) = baseline.act(&ob.to_vec(), BaselineMode::Mean, &mut rng)?;
            deltas.push(a[0] * ACTION_BOUND_DEG);
        }
        let transitions = env.step(&deltas)?;
        total += transitions.iter().map(|t| t.reward).sum::<f64>() / transitions.len() as f64;
    }
    env.set_tilts(&saved)?;
    Ok(total / episode_length as f64)
}

/// What the `eval` subcommand writes and prints.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub checkpoint: PathBuf,
    pub buildings_enabled: bool,
    pub env_seed: u64,
    pub policy: EvalStats,
    pub random: EvalStats,
}

/// Evaluates a frozen actor checkpoint against a uniform-random policy on
/// the configured environment (same start tilts for both).
pub fn eval_command(cfg: &ExperimentConfig, checkpoint: &Path) -> CliResult<EvalReport> {
    cfg.validate()?;
    let seed = cfg.seeds[0];
    let mut baseline = FrozenBaseline::load(checkpoint)?;
    let mut env = build_env(&cfg.env, seed)?;
    let tilt_seed = seed.wrapping_add(0x7e57);
    let policy = evaluate_baseline(&mut env, &mut baseline, cfg.eval_episodes, tilt_seed)?;
    let random = evaluate_random(&mut env, cfg.eval_episodes, tilt_seed, seed ^ 0xac71)?;
    let report = EvalReport {
        checkpoint: checkpoint.to_path_buf(),
        buildings_enabled: cfg.env.buildings_enabled,
        env_seed: seed,
        policy,
        random,
    };
    println!(
        "policy  {:.4} ± {:.4}  ({} episodes, buildings {})",
        report.policy.mean,
        report.policy.std,
        report.policy.episodes,
        if report.buildings_enabled { "on" } else { "off" },
    );
    println!(
        "random  {:.4} ± {:.4}",
        report.random.mean, report.random.std,
    );
    Ok(report)
}
