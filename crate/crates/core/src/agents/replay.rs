use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

pub const DEFAULT_CAPACITY: usize = 40_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity FIFO experience memory.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            items: VecDeque::with_capacity(capacity.min(4096)),
            capacity,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// `batch` distinct transitions drawn uniformly, or `None` if the buffer
    /// holds fewer.
    pub fn sample(&self, batch: usize, rng: &mut impl Rng) -> Option<Vec<&Transition>> {
        if self.items.len() < batch {
            return None;
        }
        Some(
            index::sample(rng, self.items.len(), batch)
                .into_iter()
                .map(|i| &self.items[i])
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(i: usize) -> Transition {
        Transition {
            state: vec![i as f64],
            action: i,
            reward: 0.0,
            next_state: vec![],
            done: false,
        }
    }

    #[test]
    fn evicts_oldest_at_capacity() {
        let mut buf = ReplayBuffer::new(DEFAULT_CAPACITY);
        for i in 0..=DEFAULT_CAPACITY {
            buf.push(t(i));
        }
        assert_eq!(buf.len(), DEFAULT_CAPACITY);
        assert_eq!(buf.get(0).unwrap().action, 1);
        assert_eq!(buf.get(DEFAULT_CAPACITY - 1).unwrap().action, DEFAULT_CAPACITY);
    }

    #[test]
    fn sample_is_without_replacement() {
        let mut buf = ReplayBuffer::new(10);
        for i in 0..10 {
            buf.push(t(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(buf.sample(11, &mut rng).is_none());
        let mut got: Vec<usize> = buf.sample(10, &mut rng).unwrap().iter().map(|t| t.action).collect();
        got.sort_unstable();
        assert_eq!(got, (0..10).collect::<Vec<_>>());
    }
}
