//! Learning agents: soft actor-critic, DQN over discrete tilt increments,
//! and the residual-policy wrapper that corrects a frozen baseline with
//! critic burn-in.

pub(crate) mod policy;

mod dqn;
mod residual;
mod sac;

pub use dqn::{argmax_lowest, DqnAgent, DqnBatch, DqnConfig, DQN_ACTION_DELTAS_DEG};
pub use policy::BaselineHead;
pub use residual::{init_near_zero, BaselineMode, FrozenBaseline, ResidualPolicy, UpdateGate};
pub use sac::{BaselineBatch, SacAgent, SacBatch, SacConfig, SacLosses};
