//! Fixed-capacity FIFO replay buffer with uniform sampling.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::mdp::Transition;

/// Bounded experience store. When full, pushing evicts the oldest entry.
///
/// Sampling is uniform with replacement and deterministic given the state of
/// the generator passed in. The buffer also tracks the total number of
/// insertions ever made (`insert_count`), which the experiment harness uses
/// to audit how much data each training variant consumed.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<Transition>,
    insert_count: u64,
    state_dim: Option<usize>,
}

impl ReplayBuffer {
    /// Create a buffer holding at most `capacity` transitions.
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(CoreError::InvalidArgument(
                "replay buffer capacity must be positive".into(),
            ));
        }
        Ok(Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
            insert_count: 0,
            state_dim: None,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of transitions ever pushed (evictions included).
    pub fn insert_count(&self) -> u64 {
        self.insert_count
    }

    /// Append a transition, evicting the oldest if the buffer is full.
    ///
    /// The first pushed transition pins the state dimension; later pushes
    /// with a different dimension are rejected.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        t.validate()?;
        match self.state_dim {
            None => self.state_dim = Some(t.state_dim()),
            Some(d) if d != t.state_dim() => {
                return Err(CoreError::DimensionMismatch {
                    context: "ReplayBuffer::push: state dim",
                    expected: d,
                    got: t.state_dim(),
                });
            }
            Some(_) => {}
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(t);
        self.insert_count += 1;
        Ok(())
    }

    /// Draw `batch_size` transitions uniformly with replacement.
    pub fn sample<'a, R: Rng>(
        &'a self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<&'a Transition>> {
        if self.entries.is_empty() {
            return Err(CoreError::EmptyBuffer);
        }
        let n = self.entries.len();
        Ok((0..batch_size)
            .map(|_| &self.entries[rng.random_range(0..n)])
            .collect())
    }

    /// Entries in insertion order, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.entries.iter()
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    use super::*;
    use crate::mdp::Action;

    fn t(tag: f64) -> Transition {
        Transition {
            state: vec![tag, 0.0],
            action: Action::Discrete(0),
            reward: tag,
            next_state: vec![tag, 1.0],
            done: false,
            agent_id: 0,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut buf = ReplayBuffer::new(2).unwrap();
        buf.push(t(1.0)).unwrap();
        buf.push(t(2.0)).unwrap();
        buf.push(t(3.0)).unwrap();
        let rewards: Vec<f64> = buf.iter().map(|x| x.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0]);
        assert_eq!(buf.insert_count(), 3);
        assert_eq!(buf.len(), 2);
    }

    #[test]
    fn holds_capacity_before_eviction() {
        let mut buf = ReplayBuffer::new(10_000).unwrap();
        for i in 0..10_000 {
            buf.push(t(i as f64)).unwrap();
        }
        assert_eq!(buf.len(), 10_000);
        assert_eq!(buf.iter().next().unwrap().reward, 0.0);
        buf.push(t(10_000.0)).unwrap();
        assert_eq!(buf.len(), 10_000);
        assert_eq!(buf.iter().next().unwrap().reward, 1.0);
    }

    #[test]
    fn mismatched_dim_rejected() {
        let mut buf = ReplayBuffer::new(4).unwrap();
        buf.push(t(1.0)).unwrap();
        let bad = Transition {
            state: vec![0.0],
            action: Action::Discrete(0),
            reward: 0.0,
            next_state: vec![0.0],
            done: false,
            agent_id: 0,
        };
        assert!(buf.push(bad).is_err());
        assert_eq!(buf.insert_count(), 1);
    }

    #[test]
    fn sampling_single_entry_repeats_it() {
        let mut buf = ReplayBuffer::new(4).unwrap();
        buf.push(t(7.0)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let batch = buf.sample(4, &mut rng).unwrap();
        assert_eq!(batch.len(), 4);
        assert!(batch.iter().all(|x| x.reward == 7.0));
    }

    #[test]
    fn sampling_is_deterministic_given_seed() {
        let mut buf = ReplayBuffer::new(64).unwrap();
        for i in 0..64 {
            buf.push(t(i as f64)).unwrap();
        }
        let a: Vec<f64> = {
            let mut rng = ChaCha12Rng::seed_from_u64(42);
            buf.sample(128, &mut rng)
                .unwrap()
                .iter()
                .map(|x| x.reward)
                .collect()
        };
        let b: Vec<f64> = {
            let mut rng = ChaCha12Rng::seed_from_u64(42);
            buf.sample(128, &mut rng)
                .unwrap()
                .iter()
                .map(|x| x.reward)
                .collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn empty_buffer_sampling_errors() {
        let buf = ReplayBuffer::new(4).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(matches!(
            buf.sample(1, &mut rng),
            Err(CoreError::EmptyBuffer)
        ));
    }

    #[test]
    fn zero_capacity_rejected() {
        assert!(ReplayBuffer::new(0).is_err());
    }
}
