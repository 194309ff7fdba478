//! Seeded experiment execution: one training run per seed, per-seed logs,
//! and the per-run aggregate with 95% confidence intervals.
//!
//! Layout of a finished run directory:
//!
//! ```text
//! <out_dir>/
//!   manifest.json            config snapshot, content hash, per-seed stats
//!   aggregate.csv            step,mean,ci_low,ci_high over completed seeds
//!   seed_0000/
//!     steps.csv              per-step training log
//!     episodes.csv           episode,reward,avg5,avg100
//!     epoch_0001.*.ck …      per-epoch checkpoints
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, StudentsT};
use tiltlab::agents::FrozenBaseline;
use tiltlab::env::{calibrate_normalizer, AntennaEnv, EnvConfig};
use tiltlab::model::{mbrpl_train, StepRecord};

use crate::config::ExperimentConfig;
use crate::{CliError, CliResult};

/// Environment construction shared by every command: the seed fixes the
/// world layout and the normalizer calibration rollout.
pub fn build_env(cfg: &EnvConfig, seed: u64) -> tiltlab::Result<AntennaEnv> {
    let normalizer = calibrate_normalizer(cfg, seed, cfg.calibration_samples)?;
    AntennaEnv::new(cfg.clone(), normalizer, seed)
}

/// Counters and summary numbers for one completed seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedStats {
    pub seed: u64,
    pub final_running_avg: f64,
    pub insert_count: u64,
    pub model_train_calls: u64,
    pub model_predict_calls: u64,
    pub baseline_queries: u64,
    pub truncated_rollouts: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FailedSeed {
    pub seed: u64,
    pub error: String,
}

/// Everything recorded about a run besides the CSVs themselves.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    /// SHA-256 over the canonical config snapshot plus the baseline
    /// checkpoint bytes (when one is configured); together with the seed
    /// list this determines every per-seed CSV bit-for-bit.
    pub content_hash: String,
    pub config: ExperimentConfig,
    pub n_agents: usize,
    pub completed_seeds: Vec<u64>,
    pub failed_seeds: Vec<FailedSeed>,
    pub seed_stats: Vec<SeedStats>,
}

/// In-memory result of [`run_experiment`] for callers that keep going
/// (sweeps, acceptance checks).
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    /// Per completed seed, the full step series (same order as
    /// `manifest.completed_seeds`).
    pub series: Vec<Vec<StepRecord>>,
}

impl RunOutcome {
    pub fn stats_for(&self, seed: u64) -> Option<&SeedStats> {
        self.manifest.seed_stats.iter().find(|s| s.seed == seed)
    }
}

/// Hash of everything that determines a run's outputs besides the seeds.
pub fn content_hash(cfg: &ExperimentConfig) -> CliResult<String> {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(cfg).map_err(anyhow::Error::new)?);
    if let Some(path) = &cfg.baseline_checkpoint {
        hasher.update(fs::read(path)?);
    }
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Executes every seed to completion (sequentially, in list order — each
/// seed is fully isolated, so order never changes results), then writes the
/// aggregate CSV and manifest. A crashed seed is recorded and the remaining
/// seeds still run; the caller decides how to surface partial failure.
pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)?;
    let hash = content_hash(cfg)?;

    let mut completed = Vec::new();
    let mut failed = Vec::new();
    let mut stats = Vec::new();
    let mut series = Vec::new();
    let mut n_agents = 0;
    for &seed in &cfg.seeds {
        let seed_dir = cfg.out_dir.join(format!("seed_{seed:04}"));
        match run_one_seed(cfg, seed, &seed_dir) {
            Ok((st, records, agents)) => {
                n_agents = agents;
                completed.push(seed);
                stats.push(st);
                series.push(records);
            }
            Err(e) => failed.push(FailedSeed {
                seed,
                error: format!("{e:#}"),
            }),
        }
    }

    if !series.is_empty() {
        write_aggregate_csv(&cfg.out_dir.join("aggregate.csv"), &series)?;
    }
    let manifest = Manifest {
        content_hash: hash,
        config: cfg.clone(),
        n_agents,
        completed_seeds: completed,
        failed_seeds: failed,
        seed_stats: stats,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(anyhow::Error::new)?;
    fs::write(cfg.out_dir.join("manifest.json"), json)?;

    Ok(RunOutcome {
        dir: cfg.out_dir.clone(),
        manifest,
        series,
    })
}

fn run_one_seed(
    cfg: &ExperimentConfig,
    seed: u64,
    dir: &Path,
) -> anyhow::Result<(SeedStats, Vec<StepRecord>, usize)> {
    fs::create_dir_all(dir)?;
    let mut env = build_env(&cfg.env, seed)?;
    let n_agents = env.n_agents();
    let baseline = match &cfg.baseline_checkpoint {
        Some(path) if cfg.train.method.uses_baseline() => Some(FrozenBaseline::load(path)?),
        _ => None,
    };
    let result = mbrpl_train(&mut env, &cfg.train, baseline, Some(dir), seed)?;
    write_episodes_csv(
        &dir.join("episodes.csv"),
        &result.records,
        cfg.env.episode_length,
    )?;
    for line in &result.diagnostics {
        eprintln!("seed {seed}: {line}");
    }
    let stats = SeedStats {
        seed,
        final_running_avg: result
            .records
            .last()
            .map(|r| r.env_reward_running_avg)
            .unwrap_or(f64::NAN),
        insert_count: result.insert_count,
        model_train_calls: result.model_train_calls,
        model_predict_calls: result.model_predict_calls,
        baseline_queries: result.baseline_queries,
        truncated_rollouts: result.truncated_rollouts,
    };
    Ok((stats, result.records, n_agents))
}

/// Episode log: raw per-episode reward (per-step rewards summed over the
/// episode) plus trailing 5- and 100-episode means, so both smoothing views
/// of the same series are on disk. A trailing partial episode is dropped.
pub fn write_episodes_csv(
    path: &Path,
    records: &[StepRecord],
    episode_length: usize,
) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "episode,reward,avg5,avg100")?;
    let rewards: Vec<f64> = records
        .chunks_exact(episode_length)
        .map(|ep| ep.iter().map(|r| r.reward).sum())
        .collect();
    for (i, &r) in rewards.iter().enumerate() {
        let avg5 = trailing_mean(&rewards[..=i], 5);
        let avg100 = trailing_mean(&rewards[..=i], 100);
        writeln!(w, "{},{},{},{}", i + 1, r, avg5, avg100)?;
    }
    w.flush()?;
    Ok(())
}

fn trailing_mean(values: &[f64], window: usize) -> f64 {
    let tail = &values[values.len().saturating_sub(window)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Mean and two-sided 95% Student-t confidence interval of the per-seed
/// running-average series at each step. With a single seed the CI columns
/// are left empty (an interval from one sample would be fiction).
pub fn write_aggregate_csv(path: &Path, series: &[Vec<StepRecord>]) -> CliResult<()> {
    let steps = series.iter().map(Vec::len).min().unwrap_or(0);
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "step,mean,ci_low,ci_high")?;
    for i in 0..steps {
        let values: Vec<f64> = series.iter().map(|s| s[i].env_reward_running_avg).collect();
        let (mean, half) = mean_and_ci_half_width(&values);
        match half {
            Some(h) => writeln!(w, "{},{},{},{}", series[0][i].step, mean, mean - h, mean + h)?,
            None => writeln!(w, "{},{},,", series[0][i].step, mean)?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Sample mean and the 95% t-interval half width (`None` below two samples).
pub fn mean_and_ci_half_width(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("valid t distribution")
        .inverse_cdf(0.975);
    (mean, Some(t * var.sqrt() / (n as f64).sqrt()))
}

/// Thin wrapper for the `train` subcommand: run, report, and fail the
/// process if any seed crashed.
pub fn train_command(cfg: &ExperimentConfig) -> CliResult<RunOutcome> {
    let outcome = run_experiment(cfg)?;
    for st in &outcome.manifest.seed_stats {
        println!(
            "seed {:>4}  final running avg {:.4}  inserts {}  model train/predict {}/{}  baseline queries {}",
            st.seed,
            st.final_running_avg,
            st.insert_count,
            st.model_train_calls,
            st.model_predict_calls,
            st.baseline_queries,
        );
    }
    println!(
        "run {} → {} ({} seeds ok, {} failed)",
        outcome.manifest.config.train.method.name(),
        outcome.dir.display(),
        outcome.manifest.completed_seeds.len(),
        outcome.manifest.failed_seeds.len(),
    );
    if !outcome.manifest.failed_seeds.is_empty() {
        for f in &outcome.manifest.failed_seeds {
            eprintln!("seed {} failed: {}", f.seed, f.error);
        }
        return Err(CliError::Run(anyhow::anyhow!(
            "{} of {} seeds failed",
            outcome.manifest.failed_seeds.len(),
            outcome.manifest.config.seeds.len()
        )));
    }
    Ok(outcome)
}
