//! The unit of experience stored in replay buffers.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// An action taken by an agent: either a real vector (continuous control)
/// or an index into a finite action set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Continuous(Vec<f64>),
    Discrete(usize),
}

impl Action {
    /// Continuous payload, if this is a continuous action.
    pub fn as_continuous(&self) -> Option<&[f64]> {
        match self {
            Action::Continuous(v) => Some(v),
            Action::Discrete(_) => None,
        }
    }

    /// Discrete index, if this is a discrete action.
    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            Action::Continuous(_) => None,
            Action::Discrete(i) => Some(*i),
        }
    }
}

/// One `(s, a, r, s', done)` experience, tagged with the id of the agent
/// that produced it (several agents share one buffer when parameter sharing
/// is enabled).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    pub agent_id: usize,
}

impl Transition {
    /// Check structural invariants: matching state dimensions and a finite
    /// reward.
    pub fn validate(&self) -> Result<()> {
        if self.state.len() != self.next_state.len() {
            return Err(CoreError::DimensionMismatch {
                context: "Transition: state vs next_state",
                expected: self.state.len(),
                got: self.next_state.len(),
            });
        }
        if !self.reward.is_finite() {
            return Err(CoreError::NonFinite(format!(
                "transition reward ({})",
                self.reward
            )));
        }
        Ok(())
    }

    /// State dimension `d`.
    pub fn state_dim(&self) -> usize {
        self.state.len()
    }
}
