//! Central finite-difference verification of analytic gradients.

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::nn::Mlp;

/// Step used for central differences.
const FD_STEP: f64 = 1e-5;

/// Outcome of a gradient check over a random subset of coordinates.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    pub checked_coords: usize,
    pub worst_coord: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

/// Compare `analytic` (flat, in [`Mlp::params_flat`] layout) against central
/// finite differences of `loss` at the network's current parameters.
///
/// `n_coords` coordinates are sampled without replacement (all of them if
/// `n_coords ≥ n_params`). The relative error per coordinate is
/// `|num − ana| / max(|num|, |ana|, 1e-6)`; the report carries the max and
/// mean. The network is restored to its original parameters afterwards.
///
/// `loss` must be deterministic — stochastic objectives are checked by
/// fixing their noise inside the closure.
pub fn gradient_check<L>(
    net: &mut Mlp,
    mut loss: L,
    analytic: &[f64],
    n_coords: usize,
    rng: &mut impl Rng,
) -> Result<GradCheckReport>
where
    L: FnMut(&Mlp) -> Result<f64>,
{
    let n_params = net.n_params();
    if analytic.len() != n_params {
        return Err(CoreError::DimensionMismatch {
            context: "gradient_check: analytic gradient length",
            expected: n_params,
            got: analytic.len(),
        });
    }
    let original = net.params_flat();
    let coords: Vec<usize> = if n_coords >= n_params {
        (0..n_params).collect()
    } else {
        rand::seq::index::sample(rng, n_params, n_coords).into_vec()
    };

    let mut max_rel: f64 = 0.0;
    let mut sum_rel = 0.0;
    let mut worst = (0usize, 0.0f64, 0.0f64);
    let mut probe = original.clone();
    for &i in &coords {
        probe[i] = original[i] + FD_STEP;
        net.set_params_flat(&probe)?;
        let l_plus = loss(net)?;
        probe[i] = original[i] - FD_STEP;
        net.set_params_flat(&probe)?;
        let l_minus = loss(net)?;
        probe[i] = original[i];

        let numeric = (l_plus - l_minus) / (2.0 * FD_STEP);
        let ana = analytic[i];
        let rel = (numeric - ana).abs() / numeric.abs().max(ana.abs()).max(1e-6);
        sum_rel += rel;
        if rel > max_rel {
            max_rel = rel;
            worst = (i, ana, numeric);
        }
    }
    net.set_params_flat(&original)?;
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        mean_rel_error: sum_rel / coords.len().max(1) as f64,
        checked_coords: coords.len(),
        worst_coord: worst.0,
        worst_analytic: worst.1,
        worst_numeric: worst.2,
    })
}
