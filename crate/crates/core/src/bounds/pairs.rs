//! Instance generators: pairs of finite MDPs differing only in their
//! kernels, and pairs of tabular policies, each carrying its exactly
//! computed maximum KL divergence.

use ndarray::{Array1, Array3};
use rand::Rng;
use rand_distr::Exp1;

use crate::error::{CoreError, Result};
use crate::mdp::{kl_categorical, FiniteMDP, TabularPolicy};

/// Reference/shifted MDP pair for the kernel-shift bounds.
///
/// `m_b` is the reference (kernel `P₀`), `m` the shifted MDP (kernel `P₁`).
/// Both share the reward tensor, discount and start distribution —
/// [`Self::validate`] enforces bitwise agreement. `epsilon` is
/// `max_{s,a} KL(P₀(·|s,a) ‖ P₁(·|s,a))`, finite by the full-support
/// construction of the generators.
#[derive(Clone, Debug)]
pub struct MdpPair {
    pub m: FiniteMDP,
    pub m_b: FiniteMDP,
    pub epsilon: f64,
}

/// `max_{s,a} KL(P₀(·|s,a) ‖ P₁(·|s,a))`; a support violation is an error
/// because every bound here requires a finite divergence.
fn max_kernel_kl(reference: &FiniteMDP, shifted: &FiniteMDP) -> Result<f64> {
    let mut eps = 0.0_f64;
    for s in 0..reference.n_states {
        for a in 0..reference.n_actions {
            let p0: Vec<f64> = reference.p.slice(ndarray::s![s, a, ..]).to_vec();
            let p1: Vec<f64> = shifted.p.slice(ndarray::s![s, a, ..]).to_vec();
            let kl = kl_categorical(&p0, &p1)?.finite().ok_or_else(|| {
                CoreError::InvalidArgument(format!(
                    "kernel divergence is infinite at state {s}, action {a} \
                     (shifted kernel loses support)"
                ))
            })?;
            eps = eps.max(kl);
        }
    }
    Ok(eps)
}

impl MdpPair {
    /// Pair up a reference and a shifted MDP, computing `epsilon` exactly.
    pub fn new(m_b: FiniteMDP, m: FiniteMDP) -> Result<MdpPair> {
        let epsilon = max_kernel_kl(&m_b, &m)?;
        let pair = MdpPair { m, m_b, epsilon };
        pair.validate()?;
        Ok(pair)
    }

    pub fn gamma(&self) -> f64 {
        self.m_b.gamma
    }

    /// Re-check every structural invariant, including that the stored
    /// `epsilon` matches a fresh recomputation (fields are public, so a
    /// caller could have edited the kernels).
    pub fn validate(&self) -> Result<()> {
        self.m.validate()?;
        self.m_b.validate()?;
        if self.m.n_states != self.m_b.n_states || self.m.n_actions != self.m_b.n_actions {
            return Err(CoreError::InvalidArgument(
                "paired MDPs must have identical state and action counts".into(),
            ));
        }
        if self.m.gamma != self.m_b.gamma {
            return Err(CoreError::InvalidArgument(
                "paired MDPs must share the discount".into(),
            ));
        }
        if self.m.rho0 != self.m_b.rho0 {
            return Err(CoreError::InvalidArgument(
                "paired MDPs must share the start distribution".into(),
            ));
        }
        if self.m.r != self.m_b.r {
            return Err(CoreError::InvalidArgument(
                "paired MDPs must share the reward tensor".into(),
            ));
        }
        let eps = max_kernel_kl(&self.m_b, &self.m)?;
        if (eps - self.epsilon).abs() > 1e-12 {
            return Err(CoreError::InvalidArgument(format!(
                "stored epsilon {} is stale (kernels give {})",
                self.epsilon, eps
            )));
        }
        Ok(())
    }
}

/// Baseline/corrected policy pair for the transfer bound.
///
/// `epsilon_pi = max_s KL(pi(·|s) ‖ pi_b(·|s))` — corrected policy first,
/// matching the direction the bound is stated in.
#[derive(Clone, Debug)]
pub struct PolicyPair {
    pub pi_b: TabularPolicy,
    pub pi: TabularPolicy,
    pub epsilon_pi: f64,
}

fn max_policy_kl(pi: &TabularPolicy, pi_b: &TabularPolicy) -> Result<f64> {
    if pi.n_states() != pi_b.n_states() || pi.n_actions() != pi_b.n_actions() {
        return Err(CoreError::InvalidArgument(
            "paired policies must have identical shapes".into(),
        ));
    }
    let mut eps = 0.0_f64;
    for s in 0..pi.n_states() {
        let p: Vec<f64> = pi.probs.row(s).to_vec();
        let q: Vec<f64> = pi_b.probs.row(s).to_vec();
        let kl = kl_categorical(&p, &q)?.finite().ok_or_else(|| {
            CoreError::InvalidArgument(format!(
                "policy divergence is infinite at state {s} \
                 (baseline loses support)"
            ))
        })?;
        eps = eps.max(kl);
    }
    Ok(eps)
}

impl PolicyPair {
    /// Pair up a baseline and a corrected policy, computing `epsilon_pi`
    /// exactly.
    pub fn new(pi_b: TabularPolicy, pi: TabularPolicy) -> Result<PolicyPair> {
        let epsilon_pi = max_policy_kl(&pi, &pi_b)?;
        Ok(PolicyPair {
            pi_b,
            pi,
            epsilon_pi,
        })
    }

    /// Re-check shapes and that `epsilon_pi` matches a recomputation.
    pub fn validate(&self) -> Result<()> {
        let eps = max_policy_kl(&self.pi, &self.pi_b)?;
        if (eps - self.epsilon_pi).abs() > 1e-12 {
            return Err(CoreError::InvalidArgument(format!(
                "stored epsilon_pi {} is stale (policies give {})",
                self.epsilon_pi, eps
            )));
        }
        Ok(())
    }
}

/// One draw from a flat Dirichlet over `k` categories: normalized unit-rate
/// exponentials. Full support with probability one.
fn dirichlet_row<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    let mut row: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let sum: f64 = row.iter().sum();
    for v in &mut row {
        *v /= sum;
    }
    row
}

/// `base + perturbation·noise`, renormalized. A zero perturbation returns
/// `base` bitwise so that a zero divergence is exact, not merely tiny.
fn perturbed_row<R: Rng>(base: &[f64], perturbation: f64, rng: &mut R) -> Vec<f64> {
    if perturbation == 0.0 {
        return base.to_vec();
    }
    let noise = dirichlet_row(base.len(), rng);
    let mut row: Vec<f64> = base
        .iter()
        .zip(&noise)
        .map(|(&b, &n)| b + perturbation * n)
        .collect();
    let sum: f64 = row.iter().sum();
    for v in &mut row {
        *v /= sum;
    }
    row
}

/// A random full-support stochastic policy (Dirichlet rows).
pub fn random_tabular_policy<R: Rng>(
    n_states: usize,
    n_actions: usize,
    rng: &mut R,
) -> Result<TabularPolicy> {
    let mut probs = ndarray::Array2::zeros((n_states, n_actions));
    for s in 0..n_states {
        let row = dirichlet_row(n_actions, rng);
        for (a, v) in row.into_iter().enumerate() {
            probs[[s, a]] = v;
        }
    }
    TabularPolicy::new(probs)
}

/// Generates a reference MDP with Dirichlet kernel rows, rewards uniform in
/// `[0,1]` that depend only on `(s,a)` (the value-gap bound needs rewards
/// shared across kernels, which a next-state-dependent reward would break),
/// a Dirichlet start distribution — and a shifted copy whose kernel rows are
/// `normalize(P₀ + perturbation·Dirichlet noise)`. Full support on both
/// sides keeps every divergence finite without rejection sampling.
pub fn random_mdp_pair<R: Rng>(
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    perturbation: f64,
    rng: &mut R,
) -> Result<MdpPair> {
    if perturbation < 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "perturbation must be ≥ 0, got {perturbation}"
        )));
    }
    let mut p0 = Array3::zeros((n_states, n_actions, n_states));
    let mut p1 = Array3::zeros((n_states, n_actions, n_states));
    let mut r = Array3::zeros((n_states, n_actions, n_states));
    for s in 0..n_states {
        for a in 0..n_actions {
            let base = dirichlet_row(n_states, rng);
            let shifted = perturbed_row(&base, perturbation, rng);
            let reward = rng.random_range(0.0..1.0);
            for s2 in 0..n_states {
                p0[[s, a, s2]] = base[s2];
                p1[[s, a, s2]] = shifted[s2];
                r[[s, a, s2]] = reward;
            }
        }
    }
    let rho0 = Array1::from_vec(dirichlet_row(n_states, rng));
    let m_b = FiniteMDP::new(p0, r.clone(), gamma, rho0.clone())?;
    let m = FiniteMDP::new(p1, r, gamma, rho0)?;
    MdpPair::new(m_b, m)
}

/// Generates a Dirichlet baseline policy and a corrected policy whose rows
/// are `normalize(π_b + perturbation·Dirichlet noise)`.
pub fn random_policy_pair<R: Rng>(
    n_states: usize,
    n_actions: usize,
    perturbation: f64,
    rng: &mut R,
) -> Result<PolicyPair> {
    if perturbation < 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "perturbation must be ≥ 0, got {perturbation}"
        )));
    }
    let mut base = ndarray::Array2::zeros((n_states, n_actions));
    let mut corrected = ndarray::Array2::zeros((n_states, n_actions));
    for s in 0..n_states {
        let b = dirichlet_row(n_actions, rng);
        let c = perturbed_row(&b, perturbation, rng);
        for a in 0..n_actions {
            base[[s, a]] = b[a];
            corrected[[s, a]] = c[a];
        }
    }
    PolicyPair::new(TabularPolicy::new(base)?, TabularPolicy::new(corrected)?)
}
