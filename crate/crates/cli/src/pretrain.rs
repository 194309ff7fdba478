//! Baseline pretraining: plain SAC in the building-free world, saved as a
//! frozen actor checkpoint for the residual methods to correct.

use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use tiltlab::agents::FrozenBaseline;
use tiltlab::env::KpiNormalizer;
use tiltlab::model::{mbrpl_train, Method};
use tiltlab::nn::save_mlp_to_path;

use crate::config::ExperimentConfig;
use crate::evalcmd::{evaluate_baseline, evaluate_random, EvalStats};
use crate::run::build_env;
use crate::{CliError, CliResult};

/// Sidecar record written next to the checkpoint.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PretrainMeta {
    pub seed: u64,
    pub total_steps: u64,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub hidden: Vec<usize>,
    /// Normalizer the baseline was trained against (building-free world).
    pub normalizer: KpiNormalizer,
    pub eval_episodes: usize,
    /// Deterministic baseline actions, buildings removed.
    pub eval_building_free: EvalStats,
    /// Same checkpoint facing the full world it never saw.
    pub eval_with_buildings: EvalStats,
    /// Uniform-random policy on the building-free world, same start tilts.
    pub random_building_free: EvalStats,
}

pub struct PretrainReport {
    pub checkpoint: PathBuf,
    pub meta_path: PathBuf,
    pub meta: PretrainMeta,
}

/// Trains plain SAC with `buildings_enabled` forced off, saves the actor as
/// `baseline.actor.ck` plus a `baseline.meta.json` evaluation record in both
/// environment variants. Uses the first configured seed.
pub fn pretrain_baseline(cfg: &ExperimentConfig) -> CliResult<PretrainReport> {
    let mut train_cfg = cfg.clone();
    train_cfg.env.buildings_enabled = false;
    train_cfg.train.method = Method::Sac;
    train_cfg.train.cbi_steps = 0;
    train_cfg.baseline_checkpoint = None;
    train_cfg.validate()?;

    let seed = train_cfg.seeds[0];
    fs::create_dir_all(&train_cfg.out_dir)?;
    let seed_dir = train_cfg.out_dir.join(format!("seed_{seed:04}"));
    fs::create_dir_all(&seed_dir)?;

    let mut env = build_env(&train_cfg.env, seed)?;
    let normalizer = env.normalizer().clone();
    let result = mbrpl_train(&mut env, &train_cfg.train, None, Some(&seed_dir), seed)?;
    let policy = result
        .policy
        .ok_or_else(|| CliError::Run(anyhow::anyhow!("SAC training returned no policy")))?;

    let checkpoint = train_cfg.out_dir.join("baseline.actor.ck");
    save_mlp_to_path(&checkpoint, &policy.agent.actor)?;
    let mut baseline = FrozenBaseline::load(&checkpoint)?;

    // Evaluate in both worlds under the shared start-tilt protocol; the
    // with-buildings environment gets its own calibrated normalizer, exactly
    // as a later training run would see it.
    let tilt_seed = seed.wrapping_add(0x7e57);
    let episodes = train_cfg.eval_episodes;
    let eval_building_free =
        evaluate_baseline(&mut env, &mut baseline, episodes, tilt_seed)?;
    let random_building_free = evaluate_random(&mut env, episodes, tilt_seed, seed ^ 0xac71)?;
    let mut full_env_cfg = cfg.env.clone();
    full_env_cfg.buildings_enabled = true;
    let mut full_env = build_env(&full_env_cfg, seed)?;
    let eval_with_buildings =
        evaluate_baseline(&mut full_env, &mut baseline, episodes, tilt_seed)?;

    let meta = PretrainMeta {
        seed,
        total_steps: train_cfg.train.total_steps,
        obs_dim: baseline.obs_dim(),
        action_dim: baseline.action_dim(),
        hidden: train_cfg.train.sac.hidden.clone(),
        normalizer,
        eval_episodes: episodes,
        eval_building_free,
        eval_with_buildings,
        random_building_free,
    };
    let meta_path = train_cfg.out_dir.join("baseline.meta.json");
    fs::write(
        &meta_path,
        serde_json::to_string_pretty(&meta).map_err(anyhow::Error::new)?,
    )?;

    println!("baseline checkpoint → {}", checkpoint.display());
    println!(
        "eval (buildings off)  {:.4} ± {:.4}",
        meta.eval_building_free.mean, meta.eval_building_free.std
    );
    println!(
        "eval (buildings on)   {:.4} ± {:.4}",
        meta.eval_with_buildings.mean, meta.eval_with_buildings.std
    );
    println!(
        "random (buildings off) {:.4} ± {:.4}",
        meta.random_building_free.mean, meta.random_building_free.std
    );
    if meta.eval_building_free.mean <= meta.random_building_free.mean {
        eprintln!("warning: baseline does not beat the random policy — train longer");
    }

    Ok(PretrainReport {
        checkpoint,
        meta_path,
        meta,
    })
}
