//! Numerical self-checks behind the `bounds-check` and `gradcheck`
//! subcommands.
//!
//! `bounds-check` certifies the two value-difference bounds on large batches
//! of randomized tabular instances (mixed sizes, discounts, and perturbation
//! scales, with exact-zero perturbations mixed in), re-derives the value gap
//! through its occupancy expansion, and writes per-family tightness CSVs.
//! Any violation makes the command fail.
//!
//! `gradcheck` verifies every hand-written gradient path against central
//! finite differences: the critic regression loss, the squashed-Gaussian
//! entropy objective, and the dynamics-model loss (deterministic under fixed
//! noise, and averaged over 10³ noise draws).

use std::fs;
use std::path::PathBuf;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use tiltlab::bounds::{
    bound_tightness_report, random_mdp_pair, random_policy_pair, random_tabular_policy,
    transfer_bound_check, value_gap_check, value_gap_expansion, BoundFamily, TightnessParams,
};
use tiltlab::mdp::value_of_policy;
use tiltlab::model::GaussianDynamicsModel;
use tiltlab::nn::{gradient_check, Mlp, SquashedGaussianHead};

use crate::{CliError, CliResult};

const GAMMAS: [f64; 3] = [0.5, 0.9, 0.95];

/// Outcome of the full bound certification.
#[derive(Clone, Debug)]
pub struct BoundsCheckReport {
    pub value_gap_instances: usize,
    pub value_gap_violations: usize,
    /// Worst `lhs − bound` over all value-gap instances (negative when every
    /// instance holds).
    pub value_gap_worst_excess: f64,
    pub transfer_instances: usize,
    pub transfer_violations: usize,
    pub transfer_worst_excess: f64,
    pub expansion_instances: usize,
    pub expansion_max_error: f64,
    pub expansion_violations: usize,
    pub tightness_violations: usize,
    pub csv_paths: Vec<PathBuf>,
}

impl BoundsCheckReport {
    pub fn total_violations(&self) -> usize {
        self.value_gap_violations
            + self.transfer_violations
            + self.expansion_violations
            + self.tightness_violations
    }
}

/// Instance sizes cycle through states 2–8 × actions 2–4; perturbations are
/// log-uniform over [1e-3, 10^0.5] with every tenth instance exactly zero.
fn instance_shape(i: usize) -> (usize, usize, f64) {
    (2 + i % 7, 2 + i % 3, GAMMAS[i % GAMMAS.len()])
}

fn mixed_perturbation<R: Rng>(i: usize, period: usize, rng: &mut R) -> f64 {
    if i % period == 0 {
        0.0
    } else {
        10f64.powf(rng.random_range(-3.0..0.5))
    }
}

/// Certifies both bounds on `instances` randomized instances each, checks
/// the occupancy expansion identity, and writes tightness CSVs to `out_dir`
/// (if given). Violations are counted, never masked.
pub fn bounds_check(
    instances: usize,
    seed: u64,
    out_dir: Option<&PathBuf>,
) -> CliResult<BoundsCheckReport> {
    if instances == 0 {
        return Err(crate::config_error("bounds-check needs at least one instance"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let mut report = BoundsCheckReport {
        value_gap_instances: instances,
        value_gap_violations: 0,
        value_gap_worst_excess: f64::NEG_INFINITY,
        transfer_instances: instances,
        transfer_violations: 0,
        transfer_worst_excess: f64::NEG_INFINITY,
        expansion_instances: 30,
        expansion_max_error: 0.0,
        expansion_violations: 0,
        tightness_violations: 0,
        csv_paths: Vec::new(),
    };

    for i in 0..instances {
        let (n_s, n_a, gamma) = instance_shape(i);
        let pert = mixed_perturbation(i, 10, &mut rng);
        let pair = random_mdp_pair(n_s, n_a, gamma, pert, &mut rng)?;
        let pi = random_tabular_policy(n_s, n_a, &mut rng)?;
        let rep = value_gap_check(&pair, &pi)?;
        let excess = rep.lhs.max(rep.lhs_pointwise) - rep.bound;
        report.value_gap_worst_excess = report.value_gap_worst_excess.max(excess);
        if !rep.holds {
            report.value_gap_violations += 1;
        }
    }

    for i in 0..instances {
        let (n_s, n_a, gamma) = instance_shape(i);
        let kernel_pert = mixed_perturbation(i, 10, &mut rng);
        let policy_pert = mixed_perturbation(i, 7, &mut rng);
        let pair = random_mdp_pair(n_s, n_a, gamma, kernel_pert, &mut rng)?;
        let policies = random_policy_pair(n_s, n_a, policy_pert, &mut rng)?;
        let rep = transfer_bound_check(&pair, &policies)?;
        report.transfer_worst_excess = report.transfer_worst_excess.max(rep.rhs - rep.lhs);
        if !rep.holds {
            report.transfer_violations += 1;
        }
    }

    for i in 0..report.expansion_instances {
        let (n_s, n_a, gamma) = instance_shape(i);
        let pair = random_mdp_pair(n_s, n_a, gamma, 10f64.powf(-2.0 + i as f64 * 0.08), &mut rng)?;
        let pi = random_tabular_policy(n_s, n_a, &mut rng)?;
        let expansion = value_gap_expansion(&pair, &pi)?;
        let v0 = value_of_policy(&pair.m_b, &pi)?.v;
        let v1 = value_of_policy(&pair.m, &pi)?.v;
        for s in 0..n_s {
            let err = (expansion[s] - (v0[s] - v1[s])).abs();
            report.expansion_max_error = report.expansion_max_error.max(err);
            if err > 1e-10 {
                report.expansion_violations += 1;
            }
        }
    }

    for family in [BoundFamily::ValueGap, BoundFamily::TransferBound] {
        let tightness = bound_tightness_report(&TightnessParams {
            family,
            n_states: 6,
            n_actions: 3,
            gamma: 0.9,
            perturbations: vec![0.0, 1e-3, 1e-2, 1e-1, 0.5],
            instances_per_level: 40,
            seed: seed ^ 0xccc,
        })?;
        report.tightness_violations += tightness.violations;
        if let Some(dir) = out_dir {
            fs::create_dir_all(dir)?;
            let path = dir.join(format!("{}_tightness.csv", family.name()));
            fs::write(&path, tightness.to_csv_string())?;
            report.csv_paths.push(path);
        }
    }

    Ok(report)
}

/// Runs [`bounds_check`], prints the summary, and fails on any violation.
pub fn bounds_check_command(
    instances: usize,
    seed: u64,
    out_dir: Option<&PathBuf>,
) -> CliResult<()> {
    let report = bounds_check(instances, seed, out_dir)?;
    println!(
        "value gap:      {} instances, {} violations (worst lhs−bound {:+.3e})",
        report.value_gap_instances, report.value_gap_violations, report.value_gap_worst_excess
    );
    println!(
        "transfer bound: {} instances, {} violations (worst rhs−lhs {:+.3e})",
        report.transfer_instances, report.transfer_violations, report.transfer_worst_excess
    );
    println!(
        "expansion:      {} instances, {} violations (max error {:.3e})",
        report.expansion_instances, report.expansion_violations, report.expansion_max_error
    );
    println!("tightness:      {} violations", report.tightness_violations);
    for path in &report.csv_paths {
        println!("wrote {}", path.display());
    }
    if report.total_violations() > 0 {
        return Err(CliError::Run(anyhow::anyhow!(
            "{} bound violations",
            report.total_violations()
        )));
    }
    println!("all bounds hold");
    Ok(())
}

/// One verified gradient path.
#[derive(Clone, Debug)]
pub struct GradCheckRow {
    pub name: &'static str,
    pub max_rel_error: f64,
    pub threshold: f64,
}

impl GradCheckRow {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.threshold
    }
}

/// Number of noise draws averaged for the stochastic model-loss check.
pub const STOCHASTIC_LOSS_DRAWS: usize = 1000;

/// Verifies all four gradient paths; returns one row per check.
pub fn gradcheck(seed: u64) -> CliResult<Vec<GradCheckRow>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut rows = Vec::new();

    // Critic regression: L = mean over the batch of (Q(s,a) − y)².
    {
        let mut net = Mlp::new(&[5, 16, 16, 1], &mut rng)?;
        let x = Array2::from_shape_fn((32, 5), |_| rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_fn((32, 1), |_| rng.random_range(-2.0..2.0));
        let batch = x.nrows() as f64;
        let cache = net.forward_cached(&x)?;
        let grad_out = (&cache.output - &y) * (2.0 / batch);
        let analytic = net.backward(&cache, &grad_out)?.grads.to_flat();
        let (xc, yc) = (x.clone(), y.clone());
        let rep = gradient_check(
            &mut net,
            move |n| {
                let d = &n.forward(&xc)? - &yc;
                Ok(d.iter().map(|v| v * v).sum::<f64>() / batch)
            },
            &analytic,
            250,
            &mut rng,
        )?;
        rows.push(GradCheckRow {
            name: "critic td loss",
            max_rel_error: rep.max_rel_error,
            threshold: 1e-4,
        });
    }

    // Actor entropy objective: L = α·mean(log π(a|s)) with fixed noise —
    // the entropy side of the actor update, through the squashed-Gaussian
    // reparameterization.
    {
        let action_dim = 2;
        let alpha = 0.7;
        let mut net = Mlp::new(&[4, 16, 16, 2 * action_dim], &mut rng)?;
        let x = Array2::from_shape_fn((16, 4), |_| rng.random_range(-1.0..1.0));
        let noise = Array2::from_shape_fn((16, action_dim), |_| rng.random_range(-1.5..1.5));
        let batch = x.nrows() as f64;

        let split = |out: &Array2<f64>| {
            let mean = out.slice(ndarray::s![.., 0..action_dim]).to_owned();
            let raw = out.slice(ndarray::s![.., action_dim..]).to_owned();
            SquashedGaussianHead::new(mean, raw)
        };
        let cache = net.forward_cached(&x)?;
        let head = split(&cache.output)?;
        let sample = head.sample_with_noise(&noise)?;
        let mut grad_out = Array2::zeros(cache.output.dim());
        for b in 0..x.nrows() {
            for k in 0..action_dim {
                let a = sample.action[[b, k]];
                let s2 = 1.0 - a * a;
                let d_mean = 2.0 * a * s2 / (s2 + 1e-6);
                let sigma = head.log_std[[b, k]].exp();
                let d_t = -1.0 + d_mean * sigma * noise[[b, k]];
                grad_out[[b, k]] = alpha * d_mean / batch;
                grad_out[[b, action_dim + k]] = alpha * d_t / batch;
            }
        }
        let analytic = net.backward(&cache, &grad_out)?.grads.to_flat();
        let (xc, nc) = (x.clone(), noise.clone());
        let rep = gradient_check(
            &mut net,
            move |n| {
                let head = split(&n.forward(&xc)?)?;
                let s = head.sample_with_noise(&nc)?;
                Ok(alpha * s.log_prob.sum() / batch)
            },
            &analytic,
            250,
            &mut rng,
        )?;
        rows.push(GradCheckRow {
            name: "actor entropy objective",
            max_rel_error: rep.max_rel_error,
            threshold: 1e-4,
        });
    }

    // Dynamics-model loss under one fixed noise set (deterministic).
    let lo = [-2.0, -2.0, -2.0, -2.0];
    let hi = [2.0, 2.0, 2.0, 2.0];
    let model = GaussianDynamicsModel::new(4, 1, &[16, 16], &lo, &hi, 1e-3, &mut rng)?;
    let states = Array2::from_shape_fn((16, 4), |_| rng.random_range(-1.5..1.5));
    let actions = Array2::from_shape_fn((16, 1), |_| rng.random_range(-1.0..1.0));
    let targets = Array2::from_shape_fn((16, 4), |_| rng.random_range(-1.5..1.5));
    {
        let noise = model.draw_loss_noise(16, &mut rng);
        let (_, grads) = model.loss_gradients(&states, &actions, &targets, &noise)?;
        let analytic = grads.to_flat();
        let mut probe = model.net().clone();
        let mut scratch = GaussianDynamicsModel::new(4, 1, &[16, 16], &lo, &hi, 1e-3, &mut rng)?;
        let (sc, ac, tc) = (states.clone(), actions.clone(), targets.clone());
        let rep = gradient_check(
            &mut probe,
            move |n| {
                scratch.net_mut().set_params_flat(&n.params_flat())?;
                scratch.model_loss_with_noise(&sc, &ac, &tc, &noise)
            },
            &analytic,
            250,
            &mut rng,
        )?;
        rows.push(GradCheckRow {
            name: "model loss (fixed noise)",
            max_rel_error: rep.max_rel_error,
            threshold: 1e-4,
        });
    }

    // The same loss as an expectation, approximated with common random
    // numbers over 10³ independent noise sets.
    {
        let sets: Vec<_> = (0..STOCHASTIC_LOSS_DRAWS)
            .map(|_| model.draw_loss_noise(8, &mut rng))
            .collect();
        let s8 = states.slice(ndarray::s![..8, ..]).to_owned();
        let a8 = actions.slice(ndarray::s![..8, ..]).to_owned();
        let t8 = targets.slice(ndarray::s![..8, ..]).to_owned();
        let mut analytic = vec![0.0; model.net().n_params()];
        for noise in &sets {
            let (_, grads) = model.loss_gradients(&s8, &a8, &t8, noise)?;
            for (acc, g) in analytic.iter_mut().zip(grads.to_flat()) {
                *acc += g / STOCHASTIC_LOSS_DRAWS as f64;
            }
        }
        let mut probe = model.net().clone();
        let mut scratch = GaussianDynamicsModel::new(4, 1, &[16, 16], &lo, &hi, 1e-3, &mut rng)?;
        let rep = gradient_check(
            &mut probe,
            move |n| {
                scratch.net_mut().set_params_flat(&n.params_flat())?;
                let mut total = 0.0;
                for noise in &sets {
                    total += scratch.model_loss_with_noise(&s8, &a8, &t8, noise)?;
                }
                Ok(total / STOCHASTIC_LOSS_DRAWS as f64)
            },
            &analytic,
            60,
            &mut rng,
        )?;
        rows.push(GradCheckRow {
            name: "model loss (10^3-draw average)",
            max_rel_error: rep.max_rel_error,
            threshold: 1e-3,
        });
    }

    Ok(rows)
}

/// Runs [`gradcheck`], prints one line per path, and fails if any exceeds
/// its threshold.
pub fn gradcheck_command(seed: u64) -> CliResult<()> {
    let rows = gradcheck(seed)?;
    let mut failed = 0;
    for row in &rows {
        println!(
            "{:<32} max rel error {:.3e} (threshold {:.0e}) {}",
            row.name,
            row.max_rel_error,
            row.threshold,
            if row.passed() { "ok" } else { "FAIL" }
        );
        if !row.passed() {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(CliError::Run(anyhow::anyhow!(
            "{failed} gradient checks failed"
        )));
    }
    Ok(())
}
