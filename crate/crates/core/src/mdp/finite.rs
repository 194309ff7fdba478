//! Exact tabular MDPs: explicit kernels, direct policy evaluation, and
//! categorical KL divergence.

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::mdp::linalg::solve_linear;

const ROW_SUM_TOL: f64 = 1e-12;

/// A finite MDP `(S, A, r, P, ρ₀, γ)` with everything stored explicitly.
///
/// `p[[s, a, s']]` is the transition probability, `r[[s, a, s']]` the reward
/// (kept in `[0, 1]` so the value bounds certified by the bounds lab apply),
/// `rho0` the initial state distribution and `gamma ∈ (0, 1)` the discount.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "FiniteMdpRepr", into = "FiniteMdpRepr")]
pub struct FiniteMDP {
    pub n_states: usize,
    pub n_actions: usize,
    pub p: Array3<f64>,
    pub r: Array3<f64>,
    pub gamma: f64,
    pub rho0: Array1<f64>,
}

impl FiniteMDP {
    /// Build and validate: kernel rows and `rho0` must sum to 1 within
    /// 1e-12, rewards must lie in `[0, 1]`, and `gamma` must be in `(0, 1)`.
    pub fn new(p: Array3<f64>, r: Array3<f64>, gamma: f64, rho0: Array1<f64>) -> Result<Self> {
        let (n_states, n_actions, n_next) = p.dim();
        if n_next != n_states {
            return Err(CoreError::DimensionMismatch {
                context: "FiniteMDP: kernel next-state axis",
                expected: n_states,
                got: n_next,
            });
        }
        if r.dim() != p.dim() {
            return Err(CoreError::InvalidArgument(format!(
                "reward tensor shape {:?} does not match kernel shape {:?}",
                r.dim(),
                p.dim()
            )));
        }
        if rho0.len() != n_states {
            return Err(CoreError::DimensionMismatch {
                context: "FiniteMDP: rho0 length",
                expected: n_states,
                got: rho0.len(),
            });
        }
        let mdp = Self {
            n_states,
            n_actions,
            p,
            r,
            gamma,
            rho0,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    /// Re-check all structural invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(CoreError::InvalidArgument(format!(
                "gamma must be in (0,1), got {}",
                self.gamma
            )));
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = self.p.slice(ndarray::s![s, a, ..]);
                let sum: f64 = row.sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(CoreError::InvalidArgument(format!(
                        "kernel row P[{s}][{a}] sums to {sum}, not 1"
                    )));
                }
                if row.iter().any(|&v| v < 0.0) {
                    return Err(CoreError::InvalidArgument(format!(
                        "kernel row P[{s}][{a}] has a negative entry"
                    )));
                }
            }
        }
        if self.r.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(CoreError::InvalidArgument(
                "rewards must lie in [0,1]".into(),
            ));
        }
        let rho_sum: f64 = self.rho0.sum();
        if (rho_sum - 1.0).abs() > ROW_SUM_TOL || self.rho0.iter().any(|&v| v < 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "rho0 must be a probability vector (sum {rho_sum})"
            )));
        }
        Ok(())
    }

    /// Serialize to pretty JSON with explicit nested arrays.
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parse from the JSON produced by [`Self::to_json_string`], re-running
    /// all invariant checks.
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// On-disk shape of [`FiniteMDP`]: plain nested arrays so fixtures are
/// readable and editable by hand.
#[derive(Serialize, Deserialize)]
struct FiniteMdpRepr {
    n_states: usize,
    n_actions: usize,
    p: Vec<Vec<Vec<f64>>>,
    r: Vec<Vec<Vec<f64>>>,
    gamma: f64,
    rho0: Vec<f64>,
}

impl From<FiniteMDP> for FiniteMdpRepr {
    fn from(m: FiniteMDP) -> Self {
        let nested = |t: &Array3<f64>| -> Vec<Vec<Vec<f64>>> {
            (0..m.n_states)
                .map(|s| {
                    (0..m.n_actions)
                        .map(|a| t.slice(ndarray::s![s, a, ..]).to_vec())
                        .collect()
                })
                .collect()
        };
        FiniteMdpRepr {
            n_states: m.n_states,
            n_actions: m.n_actions,
            p: nested(&m.p),
            r: nested(&m.r),
            gamma: m.gamma,
            rho0: m.rho0.to_vec(),
        }
    }
}

impl TryFrom<FiniteMdpRepr> for FiniteMDP {
    type Error = CoreError;

    fn try_from(repr: FiniteMdpRepr) -> Result<Self> {
        let (ns, na) = (repr.n_states, repr.n_actions);
        let flatten = |t: &[Vec<Vec<f64>>], name: &str| -> Result<Array3<f64>> {
            let mut flat = Vec::with_capacity(ns * na * ns);
            if t.len() != ns {
                return Err(CoreError::CheckpointFormat(format!(
                    "{name}: expected {ns} state rows, got {}",
                    t.len()
                )));
            }
            for row_a in t {
                if row_a.len() != na {
                    return Err(CoreError::CheckpointFormat(format!(
                        "{name}: expected {na} action rows, got {}",
                        row_a.len()
                    )));
                }
                for row in row_a {
                    if row.len() != ns {
                        return Err(CoreError::CheckpointFormat(format!(
                            "{name}: expected {ns} next-state entries, got {}",
                            row.len()
                        )));
                    }
                    flat.extend_from_slice(row);
                }
            }
            Array3::from_shape_vec((ns, na, ns), flat)
                .map_err(|e| CoreError::CheckpointFormat(e.to_string()))
        };
        let p = flatten(&repr.p, "P")?;
        let r = flatten(&repr.r, "r")?;
        FiniteMDP::new(p, r, repr.gamma, Array1::from_vec(repr.rho0))
    }
}

/// A stationary stochastic policy `π(a|s)` stored as a row-stochastic matrix.
#[derive(Clone, Debug)]
pub struct TabularPolicy {
    pub probs: Array2<f64>,
}

impl TabularPolicy {
    /// Build and validate: rows must be probability vectors.
    pub fn new(probs: Array2<f64>) -> Result<Self> {
        for (s, row) in probs.outer_iter().enumerate() {
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(CoreError::InvalidArgument(format!(
                    "policy row {s} sums to {sum}, not 1"
                )));
            }
            if row.iter().any(|&v| v < 0.0) {
                return Err(CoreError::InvalidArgument(format!(
                    "policy row {s} has a negative entry"
                )));
            }
        }
        Ok(Self { probs })
    }

    /// Deterministic policy putting all mass on `actions[s]`.
    pub fn deterministic(n_states: usize, n_actions: usize, actions: &[usize]) -> Result<Self> {
        if actions.len() != n_states {
            return Err(CoreError::DimensionMismatch {
                context: "TabularPolicy::deterministic: actions length",
                expected: n_states,
                got: actions.len(),
            });
        }
        let mut probs = Array2::zeros((n_states, n_actions));
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(CoreError::InvalidArgument(format!(
                    "action index {a} out of range for {n_actions} actions"
                )));
            }
            probs[[s, a]] = 1.0;
        }
        Ok(Self { probs })
    }

    pub fn n_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.ncols()
    }
}

/// Result of exact policy evaluation: the state-value vector and its average
/// under the initial distribution.
#[derive(Clone, Debug)]
pub struct PolicyValue {
    /// `V^π(s)` for every state.
    pub v: Array1<f64>,
    /// `V^π(ρ₀) = Σ_s ρ₀(s) V^π(s)`.
    pub v_rho0: f64,
}

fn check_dims(mdp: &FiniteMDP, pi: &TabularPolicy) -> Result<()> {
    if pi.n_states() != mdp.n_states {
        return Err(CoreError::DimensionMismatch {
            context: "policy states vs MDP states",
            expected: mdp.n_states,
            got: pi.n_states(),
        });
    }
    if pi.n_actions() != mdp.n_actions {
        return Err(CoreError::DimensionMismatch {
            context: "policy actions vs MDP actions",
            expected: mdp.n_actions,
            got: pi.n_actions(),
        });
    }
    Ok(())
}

/// Policy-conditioned kernel `P_π[s][s'] = Σ_a π(a|s) P[s][a][s']` and
/// expected one-step reward `r_π[s]`.
fn policy_kernel(mdp: &FiniteMDP, pi: &TabularPolicy) -> (Array2<f64>, Array1<f64>) {
    let n = mdp.n_states;
    let mut p_pi = Array2::zeros((n, n));
    let mut r_pi = Array1::zeros(n);
    for s in 0..n {
        for a in 0..mdp.n_actions {
            let w = pi.probs[[s, a]];
            if w == 0.0 {
                continue;
            }
            for s2 in 0..n {
                let pr = mdp.p[[s, a, s2]];
                p_pi[[s, s2]] += w * pr;
                r_pi[s] += w * pr * mdp.r[[s, a, s2]];
            }
        }
    }
    (p_pi, r_pi)
}

/// Exact policy evaluation: solve `(I − γ P_π) V = r_π` directly.
///
/// With γ < 1 the system matrix is strictly diagonally dominant, so the
/// solve cannot fail for a valid MDP; the returned value satisfies the
/// Bellman identity to solver precision (‖V − (r_π + γ P_π V)‖∞ < 1e-10).
pub fn value_of_policy(mdp: &FiniteMDP, pi: &TabularPolicy) -> Result<PolicyValue> {
    check_dims(mdp, pi)?;
    let n = mdp.n_states;
    let (p_pi, r_pi) = policy_kernel(mdp, pi);
    let a = Array2::eye(n) - &(p_pi * mdp.gamma);
    let v = solve_linear(&a, &r_pi)?;
    let v_rho0 = mdp.rho0.dot(&v);
    Ok(PolicyValue { v, v_rho0 })
}

/// Action values under π: `Q^π(s,a) = Σ_s' P[s][a][s'] (r[s][a][s'] + γ V^π(s'))`.
pub fn action_values(mdp: &FiniteMDP, pi: &TabularPolicy) -> Result<Array2<f64>> {
    let value = value_of_policy(mdp, pi)?;
    let mut q = Array2::zeros((mdp.n_states, mdp.n_actions));
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let mut acc = 0.0;
            for s2 in 0..mdp.n_states {
                acc += mdp.p[[s, a, s2]] * (mdp.r[[s, a, s2]] + mdp.gamma * value.v[s2]);
            }
            q[[s, a]] = acc;
        }
    }
    Ok(q)
}

/// Discounted state-occupancy of π started from `start`:
///
/// `d(z) = (1−γ) Σ_t γ^t Pr(s_t = z | s₀ = start)`,
///
/// computed exactly by solving `(I − γ P_πᵀ) d = (1−γ) e_start`. The result
/// is a probability vector over states.
pub fn occupancy(mdp: &FiniteMDP, pi: &TabularPolicy, start: usize) -> Result<Array1<f64>> {
    check_dims(mdp, pi)?;
    if start >= mdp.n_states {
        return Err(CoreError::InvalidArgument(format!(
            "start state {start} out of range for {} states",
            mdp.n_states
        )));
    }
    let n = mdp.n_states;
    let (p_pi, _) = policy_kernel(mdp, pi);
    let a = Array2::eye(n) - &(p_pi.t().to_owned() * mdp.gamma);
    let mut b = Array1::zeros(n);
    b[start] = 1.0 - mdp.gamma;
    solve_linear(&a, &b)
}

/// Categorical KL divergence with an explicit marker for support violations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum KlDivergence {
    Finite(f64),
    /// `p` puts mass where `q` has none: KL is +∞.
    Infinite,
}

impl KlDivergence {
    pub fn finite(self) -> Option<f64> {
        match self {
            KlDivergence::Finite(v) => Some(v),
            KlDivergence::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, KlDivergence::Infinite)
    }

    /// Collapse to `f64`, mapping the marker to `f64::INFINITY`.
    pub fn as_f64(self) -> f64 {
        match self {
            KlDivergence::Finite(v) => v,
            KlDivergence::Infinite => f64::INFINITY,
        }
    }
}

/// `KL(p‖q) = Σᵢ p[i] ln(p[i]/q[i])` with the convention `0·ln(0/q) = 0`.
///
/// Both arguments must be probability vectors of equal length. A support
/// violation (`p[i] > 0` with `q[i] = 0`) yields [`KlDivergence::Infinite`]
/// rather than an error so callers can filter such pairs.
pub fn kl_categorical(p: &[f64], q: &[f64]) -> Result<KlDivergence> {
    if p.len() != q.len() {
        return Err(CoreError::DimensionMismatch {
            context: "kl_categorical: vector lengths",
            expected: p.len(),
            got: q.len(),
        });
    }
    for (name, v) in [("p", p), ("q", q)] {
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || v.iter().any(|&x| x < 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "kl_categorical: {name} is not a probability vector (sum {sum})"
            )));
        }
    }
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(KlDivergence::Infinite);
        }
        kl += pi * (pi / qi).ln();
    }
    // Rounding can push tiny KLs a hair below zero; clamp to the theory.
    Ok(KlDivergence::Finite(kl.max(0.0)))
}
