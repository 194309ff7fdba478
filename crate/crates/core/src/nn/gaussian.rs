//! Tanh-squashed diagonal Gaussian sampling with reparameterization.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, Result};

/// Lower clamp for log standard deviations.
pub const LOG_STD_MIN: f64 = -20.0;
/// Upper clamp for log standard deviations.
pub const LOG_STD_MAX: f64 = 2.0;
/// Guard inside the squash correction logarithm.
pub const SQUASH_EPS: f64 = 1e-6;

const LN_2PI: f64 = 1.8378770664093453;

/// Log density of `N(mean, std²)` at `x` (scalar helper for oracles).
pub fn normal_log_prob(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - std.ln() - 0.5 * LN_2PI
}

/// Tanh change-of-variable correction `ln(1 − a² + ε)` for one squashed
/// coordinate.
pub fn squash_correction(action: f64) -> f64 {
    (1.0 - action * action + SQUASH_EPS).ln()
}

/// `tanh` that respects the open interval: for |u| ≳ 19 the f64 result
/// rounds to exactly ±1, so saturated values are nudged to the nearest
/// representable number strictly inside (−1, 1).
pub(crate) fn squash(u: f64) -> f64 {
    let a = u.tanh();
    if a >= 1.0 {
        1.0f64.next_down()
    } else if a <= -1.0 {
        (-1.0f64).next_up()
    } else {
        a
    }
}

/// Batched head of a stochastic policy: per-coordinate mean and clamped
/// log-std. Actions are `a = tanh(u)` with `u = mean + std·ξ`, `ξ ~ N(0,1)`.
#[derive(Clone, Debug)]
pub struct SquashedGaussianHead {
    pub mean: Array2<f64>,
    pub log_std: Array2<f64>,
}

/// A reparameterized draw: the noise `ξ`, the pre-squash value `u`, the
/// action `tanh(u) ∈ (−1,1)`, and the per-row log density
///
/// `log π(a) = Σ_k [ log N(u_k; mean_k, std_k²) − ln(1 − tanh(u_k)² + ε) ]`.
#[derive(Clone, Debug)]
pub struct SquashedSample {
    pub noise: Array2<f64>,
    pub pre_tanh: Array2<f64>,
    pub action: Array2<f64>,
    pub log_prob: Array1<f64>,
}

impl SquashedGaussianHead {
    /// Build a head, clamping raw log-std outputs to
    /// `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub fn new(mean: Array2<f64>, raw_log_std: Array2<f64>) -> Result<Self> {
        if mean.dim() != raw_log_std.dim() {
            return Err(CoreError::DimensionMismatch {
                context: "SquashedGaussianHead: mean vs log_std cells",
                expected: mean.len(),
                got: raw_log_std.len(),
            });
        }
        let log_std = raw_log_std.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
        Ok(Self { mean, log_std })
    }

    pub fn batch_size(&self) -> usize {
        self.mean.nrows()
    }

    pub fn action_dim(&self) -> usize {
        self.mean.ncols()
    }

    pub fn std(&self) -> Array2<f64> {
        self.log_std.mapv(f64::exp)
    }

    /// Draw standard normal noise and apply [`Self::sample_with_noise`].
    pub fn sample<R: Rng>(&self, rng: &mut R) -> SquashedSample {
        let noise = Array2::from_shape_fn(self.mean.dim(), |_| rng.sample(StandardNormal));
        self.sample_with_noise(&noise)
            .expect("noise shaped from own mean")
    }

    /// Deterministic squashed transform of explicit noise: `u = mean + std·ξ`,
    /// `a = tanh(u)`. Exposing the noise keeps gradients and bitwise
    /// replay (burn-in identity checks) possible.
    pub fn sample_with_noise(&self, noise: &Array2<f64>) -> Result<SquashedSample> {
        if noise.dim() != self.mean.dim() {
            return Err(CoreError::DimensionMismatch {
                context: "SquashedGaussianHead::sample_with_noise: noise cells",
                expected: self.mean.len(),
                got: noise.len(),
            });
        }
        let std = self.std();
        let pre_tanh = &self.mean + &(&std * noise);
        let action = pre_tanh.mapv(squash);
        let mut log_prob = Array1::zeros(self.mean.nrows());
        for b in 0..self.mean.nrows() {
            let mut lp = 0.0;
            for k in 0..self.mean.ncols() {
                let xi = noise[[b, k]];
                // log N(u; mean, std²) with u = mean + std·ξ reduces to the
                // standardized form below.
                lp += -0.5 * xi * xi - self.log_std[[b, k]] - 0.5 * LN_2PI;
                lp -= squash_correction(action[[b, k]]);
            }
            log_prob[b] = lp;
        }
        Ok(SquashedSample {
            noise: noise.clone(),
            pre_tanh,
            action,
            log_prob,
        })
    }

    /// The deterministic greedy action `tanh(mean)`.
    pub fn mean_action(&self) -> Array2<f64> {
        self.mean.mapv(squash)
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    use super::*;

    /// mean = 0, σ = 1, forced u = 0 → a = 0 and
    /// log π = −½ln(2π) − ln(1 + ε) ≈ −0.9189.
    #[test]
    fn forced_zero_noise_closed_form() {
        let head =
            SquashedGaussianHead::new(array![[0.0]], array![[0.0]]).unwrap();
        let s = head.sample_with_noise(&array![[0.0]]).unwrap();
        assert_eq!(s.action[[0, 0]], 0.0);
        let expect = -0.5 * LN_2PI - (1.0f64 + SQUASH_EPS).ln();
        assert!((s.log_prob[0] - expect).abs() < 1e-12);
        assert!((s.log_prob[0] + 0.9189).abs() < 1e-4);
    }

    /// As σ → 0 the sample collapses to tanh(mean).
    #[test]
    fn tiny_std_is_deterministic() {
        let head =
            SquashedGaussianHead::new(array![[0.7]], array![[-1000.0]]).unwrap();
        assert_eq!(head.log_std[[0, 0]], LOG_STD_MIN);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        for _ in 0..32 {
            let s = head.sample(&mut rng);
            assert!((s.action[[0, 0]] - 0.7f64.tanh()).abs() < 1e-7);
        }
    }

    #[test]
    fn log_std_clamped_above() {
        let head = SquashedGaussianHead::new(array![[0.0]], array![[5.0]]).unwrap();
        assert_eq!(head.log_std[[0, 0]], LOG_STD_MAX);
    }

    #[test]
    fn actions_stay_in_open_interval() {
        let head = SquashedGaussianHead::new(
            array![[3.0, -3.0], [0.0, 10.0]],
            array![[1.0, 1.0], [2.0, 2.0]],
        )
        .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..64 {
            let s = head.sample(&mut rng);
            assert!(s.action.iter().all(|&a| a > -1.0 && a < 1.0));
            assert!(s.log_prob.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn sampling_deterministic_given_seed() {
        let head = SquashedGaussianHead::new(
            array![[0.2, -0.4]],
            array![[-1.0, 0.5]],
        )
        .unwrap();
        let a = head.sample(&mut ChaCha12Rng::seed_from_u64(77));
        let b = head.sample(&mut ChaCha12Rng::seed_from_u64(77));
        assert_eq!(a.action, b.action);
        assert_eq!(a.log_prob, b.log_prob);
    }

    /// The log-prob must equal the two-term textbook expression evaluated
    /// independently from u.
    #[test]
    fn log_prob_matches_independent_expression() {
        let head = SquashedGaussianHead::new(
            array![[0.3, -0.8]],
            array![[-0.2, 0.4]],
        )
        .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let s = head.sample(&mut rng);
        let mut expect = 0.0;
        for k in 0..2 {
            let u = s.pre_tanh[[0, k]];
            let std = head.log_std[[0, k]].exp();
            expect += normal_log_prob(u, head.mean[[0, k]], std);
            expect -= squash_correction(u.tanh());
        }
        assert!((s.log_prob[0] - expect).abs() < 1e-10);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        assert!(SquashedGaussianHead::new(array![[0.0, 1.0]], array![[0.0]]).is_err());
        let head = SquashedGaussianHead::new(array![[0.0]], array![[0.0]]).unwrap();
        assert!(head.sample_with_noise(&array![[0.0, 0.0]]).is_err());
    }
}
