//! Coverage-and-capacity optimization laboratory.
//!
//! The crate bundles four layers that build on each other:
//!
//! * [`sim`] — a hexagonal-grid radio network simulator with antenna gain
//!   patterns, log-distance path loss, SINR and throughput computation.
//! * [`env`] — a reinforcement-learning environment over the simulator in
//!   which each agent controls one antenna's downtilt.
//! * [`nn`] / [`agents`] / [`model`] — small dense networks with hand-written
//!   backpropagation, soft actor-critic and DQN agents, residual policies
//!   that correct a frozen baseline, and a learned Gaussian dynamics model
//!   used to generate synthetic training data.
//! * [`mdp`] / [`bounds`] — exact finite-MDP machinery (policy evaluation by
//!   linear solve, categorical KL) and a numerical lab that certifies the
//!   value-difference bounds the model-based training scheme relies on.
//!
//! Everything is deterministic given a seed; all randomness flows through
//! explicitly passed ChaCha generators.

pub mod agents;
pub mod bounds;
pub mod env;
pub mod error;
pub mod mdp;
pub mod model;
pub mod nn;
pub mod sim;

pub use error::{CoreError, Result};
