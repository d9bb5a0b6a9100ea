//! Experience storage for off-policy learners.

use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One environment interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Seeded FIFO ring of transitions with uniform batch sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: VecDeque<Transition>,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, seed: u64) -> ReplayBuffer {
        ReplayBuffer {
            capacity,
            storage: VecDeque::with_capacity(capacity.min(4096)),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn push(&mut self, transition: Transition) {
        if self.storage.len() == self.capacity {
            self.storage.pop_front();
        }
        self.storage.push_back(transition);
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.storage.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    #[inline]
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    #[inline]
    pub fn get(&self, i: usize) -> &Transition {
        &self.storage[i]
    }

    pub fn clear(&mut self) {
        self.storage.clear();
    }

    /// Uniform sample of `batch` distinct indices (without replacement
    /// inside the batch) via a partial Fisher-Yates shuffle.
    pub fn sample_indices(&mut self, batch: usize) -> Result<Vec<usize>> {
        let n = self.storage.len();
        if batch > n {
            return Err(Error::invalid_argument(format!(
                "cannot sample {batch} distinct transitions from {n}"
            )));
        }
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..batch {
            let j = self.rng.random_range(i..n);
            pool.swap(i, j);
        }
        pool.truncate(batch);
        Ok(pool)
    }
}
