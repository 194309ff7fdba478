//! Cross-run comparison: merge finished run directories onto an aligned
//! step grid and estimate convergence speed.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::run::Manifest;
use crate::{CliError, CliResult};

/// One run's aggregate series as read back from disk.
pub struct RunSeries {
    pub name: String,
    pub method: String,
    pub n_seeds: usize,
    pub steps: Vec<u64>,
    pub mean: Vec<f64>,
    pub ci_low: Vec<Option<f64>>,
    pub ci_high: Vec<Option<f64>>,
    pub env_fingerprint: String,
}

/// Reads `manifest.json` + `aggregate.csv` from a run directory.
pub fn load_run(dir: &Path) -> CliResult<RunSeries> {
    let manifest_text = fs::read_to_string(dir.join("manifest.json"))
        .map_err(|e| CliError::Run(anyhow::anyhow!("{}: {e}", dir.display())))?;
    let manifest: Manifest =
        serde_json::from_str(&manifest_text).map_err(anyhow::Error::new)?;
    let csv = fs::read_to_string(dir.join("aggregate.csv"))
        .map_err(|e| CliError::Run(anyhow::anyhow!("{}: {e}", dir.display())))?;

    let mut steps = Vec::new();
    let mut mean = Vec::new();
    let mut ci_low = Vec::new();
    let mut ci_high = Vec::new();
    for (i, line) in csv.lines().enumerate() {
        if i == 0 {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(CliError::Run(anyhow::anyhow!(
                "{}: aggregate.csv line {} has {} fields",
                dir.display(),
                i + 1,
                fields.len()
            )));
        }
        steps.push(fields[0].parse::<u64>().map_err(anyhow::Error::new)?);
        mean.push(fields[1].parse::<f64>().map_err(anyhow::Error::new)?);
        ci_low.push(parse_optional(fields[2])?);
        ci_high.push(parse_optional(fields[3])?);
    }

    let env_fingerprint =
        serde_json::to_string(&manifest.config.env).map_err(anyhow::Error::new)?;
    Ok(RunSeries {
        name: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string()),
        method: manifest.config.train.method.name().to_string(),
        n_seeds: manifest.completed_seeds.len(),
        steps,
        mean,
        ci_low,
        ci_high,
        env_fingerprint,
    })
}

fn parse_optional(field: &str) -> CliResult<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        Ok(Some(field.parse::<f64>().map_err(anyhow::Error::new)?))
    }
}

/// First index (0-based) at which the series reaches 95% of its final
/// plateau, the plateau being the mean of the last 10% of entries. A series
/// that starts at the threshold — a constant one in particular — converges
/// at 0. `None` when the threshold is never reached.
pub fn convergence_step(series: &[f64]) -> Option<usize> {
    if series.is_empty() {
        return None;
    }
    let threshold = 0.95 * plateau(series);
    series.iter().position(|&v| v >= threshold)
}

/// Mean of the last 10% of the series (at least one entry).
pub fn plateau(series: &[f64]) -> f64 {
    let n = series.len();
    let tail = &series[n - (n / 10).max(1)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Steps until the series first covers `frac` of the climb from its minimum
/// to its final plateau. Offset- and sign-robust, which makes it the right
/// yardstick for ordinal "who converges faster" comparisons; a flat series
/// counts as converged at 0.
pub fn steps_to_fraction(series: &[f64], frac: f64) -> usize {
    if series.is_empty() {
        return 0;
    }
    let top = plateau(series);
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let range = top - lo;
    if !(range > 1e-12) {
        return 0;
    }
    let threshold = lo + frac * range;
    series
        .iter()
        .position(|&v| v >= threshold)
        .unwrap_or(series.len())
}

/// Merges runs into `comparison.csv` (long format, aligned on the common
/// step prefix) and `summary.csv` (one row per run). Mismatched environment
/// configurations across runs are reported as a warning, not an error.
pub fn aggregate_command(run_dirs: &[PathBuf], out_dir: &Path) -> CliResult<Vec<RunSeries>> {
    if run_dirs.is_empty() {
        return Err(crate::config_error("aggregate needs at least one run directory"));
    }
    let mut runs = Vec::new();
    for dir in run_dirs {
        runs.push(load_run(dir)?);
    }
    if runs
        .iter()
        .any(|r| r.env_fingerprint != runs[0].env_fingerprint)
    {
        eprintln!("warning: run directories use different environment configurations");
    }

    fs::create_dir_all(out_dir)?;
    let grid = runs.iter().map(|r| r.steps.len()).min().unwrap_or(0);
    let comparison = out_dir.join("comparison.csv");
    let mut w = BufWriter::new(File::create(&comparison)?);
    writeln!(w, "step,run,method,mean,ci_low,ci_high")?;
    for i in 0..grid {
        for r in &runs {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.steps[i],
                r.name,
                r.method,
                r.mean[i],
                r.ci_low[i].map(|v| v.to_string()).unwrap_or_default(),
                r.ci_high[i].map(|v| v.to_string()).unwrap_or_default(),
            )?;
        }
    }
    w.flush()?;

    let summary = out_dir.join("summary.csv");
    let mut w = BufWriter::new(File::create(&summary)?);
    writeln!(w, "run,method,seeds,final_mean,convergence_step")?;
    for r in &runs {
        let conv = convergence_step(&r.mean);
        writeln!(
            w,
            "{},{},{},{},{}",
            r.name,
            r.method,
            r.n_seeds,
            r.mean.last().copied().unwrap_or(f64::NAN),
            conv.map(|c| c.to_string()).unwrap_or_default(),
        )?;
        println!(
            "{:<24} {:<6} seeds {}  final {:.4}  convergence step {}",
            r.name,
            r.method,
            r.n_seeds,
            r.mean.last().copied().unwrap_or(f64::NAN),
            conv.map(|c| c.to_string()).unwrap_or_else(|| "—".into()),
        );
    }
    w.flush()?;
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_converges_at_zero() {
        assert_eq!(convergence_step(&[2.0; 40]), Some(0));
        assert_eq!(steps_to_fraction(&[2.0; 40], 0.9), 0);
    }

    #[test]
    fn ramp_converges_where_it_crosses() {
        // 0,1,…,99: plateau = mean(90..=99) = 94.5 → threshold 89.775.
        let series: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(convergence_step(&series), Some(90));
        // Range-based: min 0, climb to 94.5, 90% → 85.05 → index 86.
        assert_eq!(steps_to_fraction(&series, 0.9), 86);
    }

    #[test]
    fn negative_offset_breaks_the_ratio_but_not_the_range_metric() {
        let series: Vec<f64> = (0..100).map(|i| -100.0 + i as f64).collect();
        // Threshold 0.95·(−5.5) = −5.225; first v ≥ −5.225 is index 95.
        assert_eq!(convergence_step(&series), Some(95));
        // Range metric unaffected by the shift.
        assert_eq!(steps_to_fraction(&series, 0.9), 86);
    }

    #[test]
    fn late_spike_is_the_first_crossing() {
        // Flat at 0 until a final jump: the jump itself sets the plateau
        // and is the first point over the threshold.
        let mut series = vec![0.0; 9];
        series.push(100.0);
        assert_eq!(steps_to_fraction(&series, 0.9), 9);
    }
}
