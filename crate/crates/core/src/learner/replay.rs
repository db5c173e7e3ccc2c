use std::collections::VecDeque;

use rand::Rng;

use super::Transition;

/// Bounded FIFO of transitions with an episode marker.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    buffer: VecDeque<Transition>,
    since_marker: usize,
}

impl ReplayMemory {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayMemory {
            capacity,
            buffer: VecDeque::with_capacity(capacity.min(4096)),
            since_marker: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(t);
        self.since_marker += 1;
    }

    /// Marks the start of a new episode.
    pub fn begin_episode(&mut self) {
        self.since_marker = 0;
    }

    /// Transitions pushed since the last marker that are still retained.
    pub fn episode_slice(&self) -> Vec<Transition> {
        let k = self.since_marker.min(self.buffer.len());
        self.buffer
            .range(self.buffer.len() - k..)
            .cloned()
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.buffer.iter()
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, batch: usize) -> Vec<&Transition> {
        if self.buffer.is_empty() {
            return Vec::new();
        }
        (0..batch)
            .map(|_| &self.buffer[rng.random_range(0..self.buffer.len())])
            .collect()
    }
}
