//! KPI normalization: mean 0, std 1, clipped.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::sim::{cell_kpis, generate_layout};

use super::antenna::{apply_actions, EnvConfig};

/// Stream salt so calibration action noise is independent of the training
/// run's RNG, while the world layout still comes from the run seed itself.
const CALIBRATION_SALT: u64 = 0x6b70_695f_6361_6c69;

/// Frozen per-KPI affine normalizer with symmetric clipping.
///
/// Values map to `clamp((v − mean)/std, ±clip_sigmas)`; an empty cell
/// (no KPI at all) maps to the clip floor `−clip_sigmas`, so a cell nobody
/// attaches to reads as maximally bad rather than missing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpiNormalizer {
    /// Means for [cov, cap, qual].
    pub mean: [f64; 3],
    /// Standard deviations for [cov, cap, qual].
    pub std: [f64; 3],
    pub clip_sigmas: f64,
}

impl KpiNormalizer {
    pub fn new(mean: [f64; 3], std: [f64; 3], clip_sigmas: f64) -> Result<Self> {
        for (i, s) in std.iter().enumerate() {
            if !(*s > 1e-9) {
                return Err(CoreError::DegenerateStatistics(format!(
                    "KPI {i} std {s} below 1e-9"
                )));
            }
        }
        if !(clip_sigmas > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "clip_sigmas must be positive, got {clip_sigmas}"
            )));
        }
        Ok(Self {
            mean,
            std,
            clip_sigmas,
        })
    }

    /// Pass-through normalizer (mean 0, std 1) — handy in tests.
    pub fn identity(clip_sigmas: f64) -> Self {
        Self {
            mean: [0.0; 3],
            std: [1.0; 3],
            clip_sigmas,
        }
    }

    /// Normalize KPI `idx` (0 = cov, 1 = cap, 2 = qual). `None` (empty
    /// cell) maps to the clip floor.
    pub fn normalize(&self, idx: usize, value: Option<f64>) -> f64 {
        match value {
            None => -self.clip_sigmas,
            Some(v) => {
                let z = (v - self.mean[idx]) / self.std[idx];
                z.clamp(-self.clip_sigmas, self.clip_sigmas)
            }
        }
    }
}

/// Estimate KPI statistics from `n_samples` random-tilt steps on a fresh
/// world drawn from `seed`, then freeze them.
///
/// Every non-empty cell contributes one sample per KPI per step. Requires
/// `n_samples ≥ 100`; errors if any KPI stream is degenerate (std < 1e-9).
pub fn calibrate_normalizer(cfg: &EnvConfig, seed: u64, n_samples: usize) -> Result<KpiNormalizer> {
    if n_samples < 100 {
        return Err(CoreError::InvalidArgument(format!(
            "calibration needs at least 100 samples, got {n_samples}"
        )));
    }
    cfg.validate()?;
    let mut layout = generate_layout(seed, cfg.n_rings, cfg.n_users, cfg.building_count);
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ CALIBRATION_SALT);

    let mut samples: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut actions = vec![0.0; layout.n_cells()];
    for _ in 0..n_samples {
        for a in actions.iter_mut() {
            *a = rng.random_range(-1.0..=1.0);
        }
        apply_actions(&mut layout, &actions)?;
        for k in cell_kpis(&layout, &cfg.propagation, cfg.buildings_enabled)? {
            if let (Some(cov), Some(cap), Some(qual)) = (k.cov, k.cap, k.qual) {
                samples[0].push(cov);
                samples[1].push(cap);
                samples[2].push(qual);
            }
        }
    }

    let mut mean = [0.0; 3];
    let mut std = [0.0; 3];
    for i in 0..3 {
        let n = samples[i].len();
        if n < 2 {
            return Err(CoreError::DegenerateStatistics(format!(
                "KPI {i}: only {n} calibration samples (all cells empty?)"
            )));
        }
        let m = samples[i].iter().sum::<f64>() / n as f64;
        let var = samples[i].iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
        mean[i] = m;
        std[i] = var.sqrt();
    }
    KpiNormalizer::new(mean, std, cfg.clip_sigmas)
}
