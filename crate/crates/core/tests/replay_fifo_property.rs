//! Model-based property test: the replay buffer must behave exactly like a
//! reference deque that keeps the most recent `capacity` items in
//! insertion order.

use std::collections::VecDeque;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use tiltlab::mdp::{Action, ReplayBuffer, Transition};

fn tagged(tag: f64) -> Transition {
    Transition {
        state: vec![tag, 0.0],
        action: Action::Continuous(vec![0.1]),
        reward: tag,
        next_state: vec![tag, 1.0],
        done: false,
        agent_id: 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn buffer_is_a_bounded_fifo(capacity in 1usize..24, tags in prop::collection::vec(-1e6..1e6f64, 0..120)) {
        let mut buffer = ReplayBuffer::new(capacity).unwrap();
        let mut reference: VecDeque<f64> = VecDeque::new();
        for &tag in &tags {
            buffer.push(tagged(tag)).unwrap();
            reference.push_back(tag);
            if reference.len() > capacity {
                reference.pop_front();
            }
            prop_assert_eq!(buffer.len(), reference.len());
        }
        prop_assert_eq!(buffer.insert_count(), tags.len() as u64);
        let stored: Vec<f64> = buffer.iter().map(|t| t.reward).collect();
        let expected: Vec<f64> = reference.iter().copied().collect();
        prop_assert_eq!(stored, expected);
    }

    /// Sampling returns only stored transitions and (with enough draws)
    /// every stored transition.
    #[test]
    fn sampling_covers_exactly_the_stored_items(capacity in 2usize..10, n_push in 1usize..20, seed in 0u64..1000) {
        let mut buffer = ReplayBuffer::new(capacity).unwrap();
        for i in 0..n_push {
            buffer.push(tagged(i as f64)).unwrap();
        }
        let held: Vec<f64> = buffer.iter().map(|t| t.reward).collect();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let drawn = buffer.sample(40 * capacity, &mut rng).unwrap();
        for t in &drawn {
            prop_assert!(held.contains(&t.reward));
        }
        for h in &held {
            prop_assert!(drawn.iter().any(|t| t.reward == *h), "tag {} never sampled", h);
        }
    }
}
