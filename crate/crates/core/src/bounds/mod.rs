//! Numerical certification of the value-difference bounds behind
//! model-based residual training, on families of finite MDPs.
//!
//! Two analytic statements are checked by exact policy evaluation rather
//! than proved symbolically:
//!
//! * the **kernel-shift value gap**: two MDPs sharing rewards, discount and
//!   start distribution but running different transition kernels `P₀`/`P₁`
//!   give values satisfying
//!   `|V₀^π(ρ₀) − V₁^π(ρ₀)| ≤ √(2ε)·γ/(1−γ)·max_s V₀^π(s)` where
//!   `ε = max_{s,a} KL(P₀(·|s,a) ‖ P₁(·|s,a))`;
//! * the **baseline-transfer lower bound**: a corrected policy `π` run on
//!   the shifted kernel keeps
//!   `V₁^π(ρ₀) ≥ V₀^{π_b}(ρ₀) − √2/(1−γ)·(√ε_π/(1−γ) + γ·√ε·max_s V₀^{π_b}(s))`
//!   with `ε_π = max_s KL(π(·|s) ‖ π_b(·|s))`.
//!
//! Both require rewards in `[0,1]` and rewards that do not depend on the
//! next state. Randomized families of instance pairs (Dirichlet kernels,
//! full support by construction) drive the certification: a single
//! violation beyond the comparison tolerance is a build-failing event.

mod checks;
mod pairs;
mod report;

pub use checks::{
    transfer_bound_check, transfer_bound_rhs, value_gap_bound, value_gap_check,
    value_gap_expansion, TransferBoundReport, ValueGapReport, BOUND_TOL,
};
pub use pairs::{
    random_mdp_pair, random_policy_pair, random_tabular_policy, MdpPair, PolicyPair,
};
pub use report::{bound_tightness_report, BoundFamily, TightnessParams, TightnessReport, TightnessRow};
