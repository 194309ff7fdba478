//! Slack diagnostics: how far from tight the certified bounds run across a
//! perturbation sweep, emitted as CSV for plotting.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::checks::{transfer_bound_check, value_gap_check};
use crate::bounds::pairs::{random_mdp_pair, random_policy_pair, random_tabular_policy};
use crate::error::{CoreError, Result};

/// Which bound family a sweep exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFamily {
    /// Kernel-shift value gap: slack = bound − |gap|.
    ValueGap,
    /// Baseline-transfer floor (policy divergence pinned to zero so the
    /// kernel term is isolated): slack = value − floor.
    TransferBound,
}

impl BoundFamily {
    pub fn name(self) -> &'static str {
        match self {
            BoundFamily::ValueGap => "value_gap",
            BoundFamily::TransferBound => "transfer_bound",
        }
    }
}

/// Sweep configuration.
#[derive(Clone, Debug)]
pub struct TightnessParams {
    pub family: BoundFamily,
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    /// Kernel perturbation levels, one group of instances per level.
    pub perturbations: Vec<f64>,
    pub instances_per_level: usize,
    pub seed: u64,
}

/// One instance's outcome. For the transfer family `bound` holds the floor
/// (the right-hand side) and `slack` the margin above it.
#[derive(Clone, Copy, Debug)]
pub struct TightnessRow {
    pub perturbation: f64,
    pub epsilon: f64,
    pub lhs: f64,
    pub bound: f64,
    pub slack: f64,
}

/// The full sweep plus summary statistics over the slack column.
#[derive(Clone, Debug)]
pub struct TightnessReport {
    pub family: BoundFamily,
    pub rows: Vec<TightnessRow>,
    pub median_slack: f64,
    pub max_slack: f64,
    /// Rows whose check did not hold — always zero if the bounds are sound.
    pub violations: usize,
}

impl TightnessReport {
    /// `epsilon,lhs,bound,slack` rows in sweep order.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("epsilon,lhs,bound,slack\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.epsilon, row.lhs, row.bound, row.slack
            ));
        }
        out
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Runs the sweep: for each perturbation level, generates
/// `instances_per_level` seeded instances, checks the selected bound, and
/// records `(epsilon, lhs, bound, slack)` per instance.
pub fn bound_tightness_report(params: &TightnessParams) -> Result<TightnessReport> {
    if params.perturbations.is_empty() {
        return Err(CoreError::InvalidArgument(
            "tightness sweep needs at least one perturbation level".into(),
        ));
    }
    if params.instances_per_level == 0 {
        return Err(CoreError::InvalidArgument(
            "tightness sweep needs at least one instance per level".into(),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(params.seed);
    let mut rows = Vec::with_capacity(params.perturbations.len() * params.instances_per_level);
    let mut violations = 0usize;
    for &pert in &params.perturbations {
        for _ in 0..params.instances_per_level {
            let pair = random_mdp_pair(params.n_states, params.n_actions, params.gamma, pert, &mut rng)?;
            let row = match params.family {
                BoundFamily::ValueGap => {
                    let pi = random_tabular_policy(params.n_states, params.n_actions, &mut rng)?;
                    let rep = value_gap_check(&pair, &pi)?;
                    if !rep.holds {
                        violations += 1;
                    }
                    TightnessRow {
                        perturbation: pert,
                        epsilon: pair.epsilon,
                        lhs: rep.lhs,
                        bound: rep.bound,
                        slack: rep.bound - rep.lhs,
                    }
                }
                BoundFamily::TransferBound => {
                    let policies =
                        random_policy_pair(params.n_states, params.n_actions, 0.0, &mut rng)?;
                    let rep = transfer_bound_check(&pair, &policies)?;
                    if !rep.holds {
                        violations += 1;
                    }
                    TightnessRow {
                        perturbation: pert,
                        epsilon: pair.epsilon,
                        lhs: rep.lhs,
                        bound: rep.rhs,
                        slack: rep.lhs - rep.rhs,
                    }
                }
            };
            rows.push(row);
        }
    }
    let mut slacks: Vec<f64> = rows.iter().map(|r| r.slack).collect();
    slacks.sort_by(|a, b| a.total_cmp(b));
    Ok(TightnessReport {
        family: params.family,
        median_slack: median(&slacks),
        max_slack: *slacks.last().expect("rows non-empty"),
        rows,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(family: BoundFamily) -> TightnessParams {
        TightnessParams {
            family,
            n_states: 5,
            n_actions: 3,
            gamma: 0.9,
            perturbations: vec![0.0, 0.01, 0.1, 0.5],
            instances_per_level: 25,
            seed: 40,
        }
    }

    #[test]
    fn every_row_has_nonnegative_slack_in_both_families() {
        for family in [BoundFamily::ValueGap, BoundFamily::TransferBound] {
            let report = bound_tightness_report(&params(family)).unwrap();
            assert_eq!(report.violations, 0);
            assert_eq!(report.rows.len(), 4 * 25);
            for row in &report.rows {
                assert!(row.slack >= 0.0, "{family:?}: slack {}", row.slack);
            }
            assert!(report.max_slack >= report.median_slack);
        }
    }

    #[test]
    fn slack_vanishes_exactly_at_zero_perturbation() {
        for family in [BoundFamily::ValueGap, BoundFamily::TransferBound] {
            let report = bound_tightness_report(&params(family)).unwrap();
            for row in report.rows.iter().filter(|r| r.perturbation == 0.0) {
                assert_eq!(row.epsilon, 0.0);
                assert_eq!(row.slack, 0.0);
            }
        }
    }

    /// Group means across the sweep: epsilon and slack both climb with the
    /// perturbation level, making the √ε growth of the bound visible.
    #[test]
    fn per_level_means_grow_with_perturbation() {
        let report = bound_tightness_report(&params(BoundFamily::ValueGap)).unwrap();
        let level_mean = |f: &dyn Fn(&TightnessRow) -> f64| -> Vec<f64> {
            report
                .rows
                .chunks(25)
                .map(|chunk| chunk.iter().map(|r| f(r)).sum::<f64>() / 25.0)
                .collect()
        };
        let eps = level_mean(&|r| r.epsilon);
        let bound = level_mean(&|r| r.bound);
        let slack = level_mean(&|r| r.slack);
        for i in 1..4 {
            assert!(eps[i] > eps[i - 1]);
            assert!(bound[i] > bound[i - 1]);
            assert!(slack[i] > slack[i - 1]);
        }
    }

    #[test]
    fn csv_has_fixed_header_and_one_line_per_instance() {
        let report = bound_tightness_report(&params(BoundFamily::ValueGap)).unwrap();
        let csv = report.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "epsilon,lhs,bound,slack");
        let mut count = 0;
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 4);
            for f in fields {
                f.parse::<f64>().unwrap();
            }
            count += 1;
        }
        assert_eq!(count, 100);
    }

    #[test]
    fn degenerate_sweeps_are_rejected() {
        let mut p = params(BoundFamily::ValueGap);
        p.perturbations.clear();
        assert!(bound_tightness_report(&p).is_err());
        let mut p = params(BoundFamily::ValueGap);
        p.instances_per_level = 0;
        assert!(bound_tightness_report(&p).is_err());
    }
}
