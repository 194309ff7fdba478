//! Reinforcement-learning environment over the radio simulator.
//!
//! Each antenna is one agent observing `[tilt, cov, cap, qual]` (KPIs
//! normalized to mean 0 / std 1 and clipped) and nudging its downtilt by
//! `Δw ∈ [−1°, 1°]` per step. One environment step moves every antenna at
//! once, recomputes the network KPIs once, and emits one transition per
//! antenna; the shared reward structure is per-agent:
//! `r_i = cov_i + cap_i + qual_i` evaluated on the *next* observation.

mod antenna;
mod normalizer;

pub use antenna::{
    reward_from_state, state_bounds, AntennaEnv, AntennaObservation, EnvConfig,
    ACTION_BOUND_DEG, OBS_DIM, TILT_RANGE_DEG,
};
pub use normalizer::{calibrate_normalizer, KpiNormalizer};
