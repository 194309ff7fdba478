//! Environment-agnostic MDP abstractions.
//!
//! The learning stack only needs [`Transition`] and [`ReplayBuffer`]; the
//! bounds lab additionally uses the exact tabular machinery: [`FiniteMDP`],
//! [`TabularPolicy`], policy evaluation by direct linear solve, discounted
//! occupancy measures, and categorical KL divergence.

mod finite;
mod linalg;
mod replay;
mod transition;

pub use finite::{
    action_values, kl_categorical, occupancy, value_of_policy, FiniteMDP, KlDivergence,
    PolicyValue, TabularPolicy,
};
pub use linalg::solve_linear;
pub use replay::ReplayBuffer;
pub use transition::{Action, Transition};
