//! Critic burn-in sweep: one full experiment per burn-in length, plus the
//! "initial dip" statistic that quantifies early training damage.
//!
//! The dip for one seed is
//!
//! ```text
//! dip = baseline_eval − min over the first 2·cbi_max steps of the
//!                        running-average reward
//! ```
//!
//! where `baseline_eval` is the frozen baseline's deterministic per-step
//! reward level on that seed's world (from the world's initial tilts) and
//! `cbi_max` is the largest swept burn-in value. A policy that never falls
//! below the baseline level yields a dip ≤ 0; the statistic is defined
//! either way.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use tiltlab::agents::FrozenBaseline;
use tiltlab::model::Method;

use crate::config::ExperimentConfig;
use crate::evalcmd::evaluate_baseline_from_current;
use crate::run::{build_env, run_experiment};
use crate::{config_error, CliError, CliResult};

pub struct SweepSeedRow {
    pub cbi: u64,
    pub seed: u64,
    pub baseline_eval: f64,
    pub min_early_running_avg: f64,
    pub dip: f64,
}

pub struct SweepRow {
    pub cbi: u64,
    pub dir: PathBuf,
    pub median_dip: f64,
    pub mean_dip: f64,
    pub final_running_avg_mean: f64,
}

pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub seed_rows: Vec<SweepSeedRow>,
    pub csv_path: PathBuf,
    pub seeds_csv_path: PathBuf,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One [`run_experiment`] per burn-in value (into `out_dir/cbi_<v>/`), then
/// `sweep.csv` with one row per value and `sweep_seeds.csv` with the
/// per-seed detail.
pub fn burn_in_sweep(cfg: &ExperimentConfig, cbi_values: &[u64]) -> CliResult<SweepReport> {
    cfg.validate()?;
    if !matches!(cfg.train.method, Method::Mbrpl | Method::Srpl) {
        return Err(config_error(format!(
            "burn-in sweep requires a residual method (srpl or mbrpl), got {}",
            cfg.train.method.name()
        )));
    }
    if cbi_values.is_empty() {
        return Err(config_error("burn-in sweep needs at least one cbi value"));
    }
    let mut sorted = cbi_values.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != cbi_values.len() {
        return Err(config_error("cbi values must be distinct"));
    }
    let cbi_max = *cbi_values.iter().max().expect("non-empty");
    let window = (2 * cbi_max).clamp(1, cfg.train.total_steps) as usize;
    let baseline_path = cfg
        .baseline_checkpoint
        .as_ref()
        .expect("validated residual config has a baseline");

    // Per-seed baseline reward level, computed once on each seed's world.
    let mut baseline_eval = Vec::new();
    for &seed in &cfg.seeds {
        let mut env = build_env(&cfg.env, seed)?;
        let mut baseline = FrozenBaseline::load(baseline_path)?;
        baseline_eval.push(evaluate_baseline_from_current(&mut env, &mut baseline)?);
    }

    fs::create_dir_all(&cfg.out_dir)?;
    let mut rows = Vec::new();
    let mut seed_rows = Vec::new();
    let mut failures = 0usize;
    for &cbi in cbi_values {
        let mut sub = cfg.clone();
        sub.train.cbi_steps = cbi;
        sub.out_dir = cfg.out_dir.join(format!("cbi_{cbi}"));
        let outcome = run_experiment(&sub)?;
        failures += outcome.manifest.failed_seeds.len();

        let mut dips = Vec::new();
        let mut finals = Vec::new();
        for (i, &seed) in outcome.manifest.completed_seeds.iter().enumerate() {
            let series = &outcome.series[i];
            let min_early = series[..window.min(series.len())]
                .iter()
                .map(|r| r.env_reward_running_avg)
                .fold(f64::INFINITY, f64::min);
            let base = baseline_eval[cfg.seeds.iter().position(|&s| s == seed).expect("seed")];
            let dip = base - min_early;
            dips.push(dip);
            finals.push(series.last().expect("non-empty run").env_reward_running_avg);
            seed_rows.push(SweepSeedRow {
                cbi,
                seed,
                baseline_eval: base,
                min_early_running_avg: min_early,
                dip,
            });
        }
        if dips.is_empty() {
            return Err(CliError::Run(anyhow::anyhow!(
                "cbi {cbi}: every seed failed"
            )));
        }
        rows.push(SweepRow {
            cbi,
            dir: sub.out_dir,
            median_dip: median(&dips),
            mean_dip: dips.iter().sum::<f64>() / dips.len() as f64,
            final_running_avg_mean: finals.iter().sum::<f64>() / finals.len() as f64,
        });
    }

    let csv_path = cfg.out_dir.join("sweep.csv");
    let mut w = BufWriter::new(File::create(&csv_path)?);
    writeln!(w, "cbi,median_dip,mean_dip,final_running_avg_mean")?;
    for r in &rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.cbi, r.median_dip, r.mean_dip, r.final_running_avg_mean
        )?;
    }
    w.flush()?;

    let seeds_csv_path = cfg.out_dir.join("sweep_seeds.csv");
    let mut w = BufWriter::new(File::create(&seeds_csv_path)?);
    writeln!(w, "cbi,seed,baseline_eval,min_early_running_avg,dip")?;
    for r in &seed_rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.cbi, r.seed, r.baseline_eval, r.min_early_running_avg, r.dip
        )?;
    }
    w.flush()?;

    for r in &rows {
        println!(
            "cbi {:>6}  median dip {:+.4}  mean dip {:+.4}  final {:.4}",
            r.cbi, r.median_dip, r.mean_dip, r.final_running_avg_mean
        );
    }
    if failures > 0 {
        return Err(CliError::Run(anyhow::anyhow!(
            "{failures} seed runs failed during the sweep"
        )));
    }
    Ok(SweepReport {
        rows,
        seed_rows,
        csv_path,
        seeds_csv_path,
    })
}
