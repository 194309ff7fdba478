//! Differentiable view of a (possibly residual) squashed-Gaussian policy.
//!
//! The actor network maps a state batch to `2k` outputs per row: columns
//! `0..k` are the pre-squash mean `μ_c`, columns `k..2k` the raw log-std,
//! clamped to `[LOG_STD_MIN, LOG_STD_MAX]`. A plain policy samples
//!
//! ```text
//! u = μ_c + σ_c ξ,          a = tanh(u),       ξ ~ N(0, I).
//! ```
//!
//! When a baseline head `(μ_b, σ_b²)` is supplied the correction is combined
//! in pre-squash space: `u = μ_b + μ_c + √(σ_b² + σ_c²) ξ`, i.e. the combined
//! pre-squash distribution is `N(μ_b + μ_c, σ_b² + σ_c²)` and the squash is
//! applied once. A deterministic baseline is the `σ_b² = 0` special case.
//!
//! Alongside the sample, [`policy_graph`] returns the exact partial
//! derivatives of the per-coordinate log-density and of the action with
//! respect to the actor outputs, so callers can assemble arbitrary losses
//! (`α·log π − Q` etc.) and push them through [`Mlp::backward`]. Writing
//! `s2 = 1 − a²`, `V = σ_b² + σ_c²`, `s = √V` and `D = 2a·s2/(s2 + ε)`:
//!
//! ```text
//! ∂logπ/∂μ_c = D                    ∂a/∂μ_c = s2
//! ∂logπ/∂t_c = −σ_c²/V + D·ξ·σ_c²/s  ∂a/∂t_c = s2·ξ·σ_c²/s
//! ```
//!
//! where `t_c` is the clamped log-std (the derivative is zeroed where the raw
//! output sits outside the clamp range, matching the flat clamp). For the
//! plain policy (`σ_b = 0`) these reduce to the usual tanh-Gaussian
//! reparameterization gradients.

use ndarray::{Array1, Array2};

use crate::error::{CoreError, Result};
use crate::nn::{squash_correction, Mlp, MlpCache, LOG_STD_MAX, LOG_STD_MIN};
use crate::nn::squash;

const SQUASH_EPS: f64 = 1e-6;
const LN_2PI: f64 = 1.8378770664093453;

/// Baseline head evaluated on a state batch: pre-squash means and variances.
#[derive(Clone, Debug)]
pub struct BaselineHead {
    /// Pre-squash mean `μ_b`, shape `[batch, action_dim]`.
    pub mean: Array2<f64>,
    /// Pre-squash variance `σ_b²`, shape `[batch, action_dim]`. All zeros for
    /// a deterministic baseline.
    pub var: Array2<f64>,
}

/// One reparameterized sample of the policy on a state batch, together with
/// everything needed to differentiate through it.
pub(crate) struct PolicyGraph {
    /// Actor trunk activations (for [`Mlp::backward`]).
    pub cache: MlpCache,
    /// Combined pre-squash mean (baseline + correction). Diagnostic; only
    /// exercised by tests.
    #[allow(dead_code)]
    pub mean: Array2<f64>,
    /// Combined pre-squash std `√(σ_b² + σ_c²)`. Diagnostic; only exercised
    /// by tests.
    #[allow(dead_code)]
    pub std: Array2<f64>,
    /// Squashed actions, strictly inside `(−1, 1)`.
    pub actions: Array2<f64>,
    /// Per-row log-density `log π(a|s)` including the tanh correction.
    pub log_prob: Array1<f64>,
    /// `∂logπ_row/∂μ_c[b,k]`.
    pub dlogp_dmean: Array2<f64>,
    /// `∂logπ_row/∂t_c[b,k]` (zero where the raw log-std is clamped).
    pub dlogp_dt: Array2<f64>,
    /// `∂a[b,k]/∂μ_c[b,k]`.
    pub da_dmean: Array2<f64>,
    /// `∂a[b,k]/∂t_c[b,k]` (zero where the raw log-std is clamped).
    pub da_dt: Array2<f64>,
}

impl PolicyGraph {
    /// Assembles the gradient of a scalar loss with respect to the raw actor
    /// outputs from per-coordinate weights on `log π` and on the action:
    /// `dL = Σ_{b,k} w_logp[b]·dlogπ_b + w_act[b,k]·da[b,k]`.
    ///
    /// `w_logp` is per-row because `log π` is a row quantity; `w_act` is per
    /// coordinate. Returns a `[batch, 2k]` array ready for `Mlp::backward`.
    pub fn output_grad(&self, w_logp: &Array1<f64>, w_act: &Array2<f64>) -> Array2<f64> {
        let (batch, k) = self.actions.dim();
        let mut grad = Array2::zeros((batch, 2 * k));
        for b in 0..batch {
            for j in 0..k {
                let gl = w_logp[b];
                let ga = w_act[[b, j]];
                grad[[b, j]] = gl * self.dlogp_dmean[[b, j]] + ga * self.da_dmean[[b, j]];
                grad[[b, k + j]] = gl * self.dlogp_dt[[b, j]] + ga * self.da_dt[[b, j]];
            }
        }
        grad
    }
}

/// Splits the raw `[batch, 2k]` actor output into the mean block and the
/// clamped log-std block, returning `(μ_c, t_c, in_range_mask)`.
fn split_head(raw: &Array2<f64>, action_dim: usize) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let batch = raw.nrows();
    let mut mean = Array2::zeros((batch, action_dim));
    let mut log_std = Array2::zeros((batch, action_dim));
    let mut mask = Array2::zeros((batch, action_dim));
    for b in 0..batch {
        for j in 0..action_dim {
            mean[[b, j]] = raw[[b, j]];
            let t = raw[[b, action_dim + j]];
            log_std[[b, j]] = t.clamp(LOG_STD_MIN, LOG_STD_MAX);
            mask[[b, j]] = if t > LOG_STD_MIN && t < LOG_STD_MAX { 1.0 } else { 0.0 };
        }
    }
    (mean, log_std, mask)
}

/// Runs the actor on `states`, combines it with an optional baseline head,
/// and draws one reparameterized sample per row using `noise` (`ξ`, shape
/// `[batch, action_dim]`).
pub(crate) fn policy_graph(
    net: &Mlp,
    action_dim: usize,
    states: &Array2<f64>,
    noise: &Array2<f64>,
    baseline: Option<&BaselineHead>,
) -> Result<PolicyGraph> {
    if net.output_dim() != 2 * action_dim {
        return Err(CoreError::DimensionMismatch {
            context: "policy_graph actor output",
            expected: 2 * action_dim,
            got: net.output_dim(),
        });
    }
    let batch = states.nrows();
    if noise.dim() != (batch, action_dim) {
        return Err(CoreError::DimensionMismatch {
            context: "policy_graph noise rows",
            expected: batch * action_dim,
            got: noise.len(),
        });
    }
    if let Some(b) = baseline {
        if b.mean.dim() != (batch, action_dim) || b.var.dim() != (batch, action_dim) {
            return Err(CoreError::DimensionMismatch {
                context: "policy_graph baseline head",
                expected: batch * action_dim,
                got: b.mean.len(),
            });
        }
    }

    let cache = net.forward_cached(states)?;
    let (mean_c, log_std_c, mask) = split_head(&cache.output, action_dim);

    let mut mean = Array2::zeros((batch, action_dim));
    let mut std = Array2::zeros((batch, action_dim));
    let mut actions = Array2::zeros((batch, action_dim));
    let mut log_prob = Array1::zeros(batch);
    let mut dlogp_dmean = Array2::zeros((batch, action_dim));
    let mut dlogp_dt = Array2::zeros((batch, action_dim));
    let mut da_dmean = Array2::zeros((batch, action_dim));
    let mut da_dt = Array2::zeros((batch, action_dim));

    for b in 0..batch {
        let mut lp = 0.0;
        for j in 0..action_dim {
            let sigma_c = log_std_c[[b, j]].exp();
            let var_c = sigma_c * sigma_c;
            let (mu_b, var_b) = match baseline {
                Some(head) => (head.mean[[b, j]], head.var[[b, j]]),
                None => (0.0, 0.0),
            };
            let var = var_b + var_c;
            let s = var.sqrt();
            let mu = mu_b + mean_c[[b, j]];
            let xi = noise[[b, j]];
            let u = mu + s * xi;
            let a = squash(u);
            let s2 = 1.0 - a * a;

            mean[[b, j]] = mu;
            std[[b, j]] = s;
            actions[[b, j]] = a;
            lp += -0.5 * xi * xi - s.ln() - 0.5 * LN_2PI - squash_correction(a);

            let d = 2.0 * a * s2 / (s2 + SQUASH_EPS);
            // ds/dt_c = σ_c²/s; d(ln s)/dt_c = σ_c²/V.
            let ds_dt = var_c / s;
            let m = mask[[b, j]];
            dlogp_dmean[[b, j]] = d;
            dlogp_dt[[b, j]] = m * (-var_c / var + d * xi * ds_dt);
            da_dmean[[b, j]] = s2;
            da_dt[[b, j]] = m * s2 * xi * ds_dt;
        }
        log_prob[b] = lp;
    }

    Ok(PolicyGraph {
        cache,
        mean,
        std,
        actions,
        log_prob,
        dlogp_dmean,
        dlogp_dt,
        da_dmean,
        da_dt,
    })
}

/// Deterministic action of the (possibly residual) policy: the squashed
/// combined pre-squash mean, `tanh(μ_b + μ_c)`.
pub(crate) fn policy_mean_action(
    net: &Mlp,
    action_dim: usize,
    states: &Array2<f64>,
    baseline_mean: Option<&Array2<f64>>,
) -> Result<Array2<f64>> {
    let out = net.forward(states)?;
    let batch = states.nrows();
    let mut actions = Array2::zeros((batch, action_dim));
    for b in 0..batch {
        for j in 0..action_dim {
            let mu_b = baseline_mean.map_or(0.0, |m| m[[b, j]]);
            actions[[b, j]] = squash(mu_b + out[[b, j]]);
        }
    }
    Ok(actions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    /// A bias-only net: zero weights, bias = per-output constants.
    fn bias_net(in_dim: usize, bias: &[f64]) -> Mlp {
        let mut net = Mlp::zeros(&[in_dim, bias.len()]).unwrap();
        let (_, b) = net.layer_mut(0);
        for (i, v) in bias.iter().enumerate() {
            b[i] = *v;
        }
        net
    }

    #[test]
    fn plain_graph_matches_squashed_head() {
        // Bias-only actor: μ_c = 0.4, log σ = −1. Compare against the
        // standalone SquashedGaussianHead on the same noise.
        let net = bias_net(3, &[0.4, -1.0]);
        let states = Array2::zeros((5, 3));
        let noise = arr2(&[[0.3], [-1.2], [0.0], [2.5], [-0.7]]);
        let graph = policy_graph(&net, 1, &states, &noise, None).unwrap();

        let head = crate::nn::SquashedGaussianHead::new(
            Array2::from_elem((5, 1), 0.4),
            Array2::from_elem((5, 1), -1.0),
        )
        .unwrap();
        let sample = head.sample_with_noise(&noise).unwrap();
        for b in 0..5 {
            assert!((graph.actions[[b, 0]] - sample.action[[b, 0]]).abs() < 1e-15);
            assert!((graph.log_prob[b] - sample.log_prob[b]).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_composition_adds_means_and_variances() {
        // Correction N(0.1, 0.04) on top of a Gaussian baseline N(0.2, 0.01)
        // must sample pre-squash from N(0.3, 0.05).
        let net = bias_net(2, &[0.1, (0.04f64).sqrt().ln()]);
        let states = Array2::zeros((1, 2));
        let noise = arr2(&[[1.0]]);
        let head = BaselineHead {
            mean: Array2::from_elem((1, 1), 0.2),
            var: Array2::from_elem((1, 1), 0.01),
        };
        let graph = policy_graph(&net, 1, &states, &noise, Some(&head)).unwrap();
        assert!((graph.mean[[0, 0]] - 0.3).abs() < 1e-12);
        assert!((graph.std[[0, 0]] - (0.05f64).sqrt()).abs() < 1e-12);
        let expect_u = 0.3 + (0.05f64).sqrt();
        assert!((graph.actions[[0, 0]] - expect_u.tanh()).abs() < 1e-12);
    }

    #[test]
    fn residual_gradients_match_finite_differences() {
        // Random small net, random baseline head; check ∂logπ/∂params and
        // ∂a/∂params via the assembled output_grad against central
        // differences through a scalar probe loss.
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut net = Mlp::new(&[3, 8, 4], &mut rng).unwrap();
        let states = {
            let mut s = Array2::zeros((6, 3));
            for v in s.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            s
        };
        let noise = {
            let mut n = Array2::zeros((6, 2));
            for v in n.iter_mut() {
                *v = rng.random_range(-1.5..1.5);
            }
            n
        };
        let head = BaselineHead {
            mean: Array2::from_elem((6, 2), 0.15),
            var: Array2::from_elem((6, 2), 0.02),
        };
        // Probe loss: mean over rows of (logπ + Σ_k a_k).
        let loss = |net: &Mlp| -> crate::Result<f64> {
            let g = policy_graph(net, 2, &states, &noise, Some(&head))?;
            let mut total = 0.0;
            for b in 0..6 {
                total += g.log_prob[b];
                for j in 0..2 {
                    total += g.actions[[b, j]];
                }
            }
            Ok(total / 6.0)
        };
        let graph = policy_graph(&net, 2, &states, &noise, Some(&head)).unwrap();
        let w_logp = Array1::from_elem(6, 1.0 / 6.0);
        let w_act = Array2::from_elem((6, 2), 1.0 / 6.0);
        let grad_out = graph.output_grad(&w_logp, &w_act);
        let back = net.backward(&graph.cache, &grad_out).unwrap();
        let analytic = back.grads.to_flat();
        let report =
            crate::nn::gradient_check(&mut net, loss, &analytic, 60, &mut rng).unwrap();
        assert!(
            report.max_rel_error < 1e-4,
            "max rel error {}",
            report.max_rel_error
        );
    }

    #[test]
    fn clamped_log_std_has_zero_gradient() {
        // Raw log-std way below the clamp floor: t-gradients must be exactly
        // zero, matching the flat clamp.
        let net = bias_net(2, &[0.0, -50.0]);
        let states = Array2::zeros((1, 2));
        let noise = arr2(&[[0.9]]);
        let graph = policy_graph(&net, 1, &states, &noise, None).unwrap();
        assert_eq!(graph.dlogp_dt[[0, 0]], 0.0);
        assert_eq!(graph.da_dt[[0, 0]], 0.0);
        // Mean gradient still live.
        assert!(graph.dlogp_dmean[[0, 0]].abs() > 0.0);
    }

    #[test]
    fn mean_action_squashes_combined_mean() {
        let net = bias_net(2, &[0.25, -1.0]);
        let states = Array2::zeros((3, 2));
        let base = Array2::from_elem((3, 1), 0.5);
        let acts = policy_mean_action(&net, 1, &states, Some(&base)).unwrap();
        for b in 0..3 {
            assert!((acts[[b, 0]] - 0.75f64.tanh()).abs() < 1e-15);
        }
    }
}
