use std::collections::HashMap;

use rand::Rng;

use super::{ActionPolicy, Transition};
use crate::site_model::PageId;

/// Tabular action values. Entries never written read as exactly 0.0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QTable {
    values: HashMap<PageId, Vec<f64>>,
}

impl QTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, page: &PageId, action: usize) -> f64 {
        self.values
            .get(page)
            .and_then(|row| row.get(action))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn set(&mut self, page: &PageId, action: usize, value: f64) {
        let row = self.values.entry(page.clone()).or_default();
        if row.len() <= action {
            row.resize(action + 1, 0.0);
        }
        row[action] = value;
    }

    /// Largest value among actions `0..n_actions`; 0.0 when `n_actions` is 0.
    pub fn max_value(&self, page: &PageId, n_actions: usize) -> f64 {
        (0..n_actions)
            .map(|a| self.get(page, a))
            .fold(None, |best: Option<f64>, v| {
                Some(best.map_or(v, |b| b.max(v)))
            })
            .unwrap_or(0.0)
    }

    /// Greedy action; ties go to the lowest index.
    pub fn argmax(&self, page: &PageId, n_actions: usize) -> usize {
        let mut best = 0;
        let mut best_value = self.get(page, 0);
        for a in 1..n_actions {
            let v = self.get(page, a);
            if v > best_value {
                best = a;
                best_value = v;
            }
        }
        best
    }

    pub fn len(&self) -> usize {
        self.values.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ActionPolicy for QTable {
    fn exploit<R: Rng + ?Sized>(&self, page: &PageId, n_actions: usize, _rng: &mut R) -> usize {
        self.argmax(page, n_actions)
    }
}

/// One Q-learning backup for `t`, returning the new `Q(s, a)`.
pub fn q_update(
    q: &mut QTable,
    t: &Transition,
    next_action_count: usize,
    alpha: f64,
    gamma: f64,
) -> f64 {
    let target = if t.done || next_action_count == 0 {
        t.reward
    } else {
        t.reward + gamma * q.max_value(&t.next_state, next_action_count)
    };
    let old = q.get(&t.state, t.action);
    let new = old + alpha * (target - old);
    q.set(&t.state, t.action, new);
    new
}
