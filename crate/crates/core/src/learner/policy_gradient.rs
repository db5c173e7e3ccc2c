use std::collections::HashMap;

use rand::Rng;

use super::{ActionPolicy, LearnError, Transition};
use crate::site_model::PageId;

/// Softmax action preferences per page plus an optional state-value baseline.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolicyParams {
    preferences: HashMap<PageId, Vec<f64>>,
    baseline: HashMap<PageId, f64>,
}

impl PolicyParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn preference(&self, page: &PageId, action: usize) -> f64 {
        self.preferences
            .get(page)
            .and_then(|row| row.get(action))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn baseline(&self, page: &PageId) -> f64 {
        self.baseline.get(page).copied().unwrap_or(0.0)
    }

    fn add_preference(&mut self, page: &PageId, action: usize, delta: f64) {
        let row = self.preferences.entry(page.clone()).or_default();
        if row.len() <= action {
            row.resize(action + 1, 0.0);
        }
        row[action] += delta;
    }

    /// Softmax over the first `n_actions` preferences of `page`.
    pub fn probabilities(&self, page: &PageId, n_actions: usize) -> Vec<f64> {
        let prefs: Vec<f64> = (0..n_actions).map(|a| self.preference(page, a)).collect();
        let max = prefs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = prefs.iter().map(|p| (p - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / total).collect()
    }

    /// Highest-preference action, lowest index on ties.
    pub fn argmax(&self, page: &PageId, n_actions: usize) -> usize {
        let mut best = 0;
        for a in 1..n_actions {
            if self.preference(page, a) > self.preference(page, best) {
                best = a;
            }
        }
        best
    }
}

impl ActionPolicy for PolicyParams {
    fn exploit<R: Rng + ?Sized>(&self, page: &PageId, n_actions: usize, rng: &mut R) -> usize {
        let probs = self.probabilities(page, n_actions);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (a, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        n_actions - 1
    }
}

/// `G_t = r_t + gamma * G_{t+1}`, computed back to front.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut returns = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (t, r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        returns[t] = acc;
    }
    returns
}

/// Monte-Carlo policy-gradient step over one episode.
///
/// Steps are applied in order, each using the policy as left by the previous
/// step. With `use_baseline` the advantage is measured against a learned
/// per-page value which is moved toward the return at the same rate.
/// Returns the per-step returns `G_t`.
pub fn reinforce_update<F>(
    params: &mut PolicyParams,
    trajectory: &[Transition],
    n_actions: F,
    gamma: f64,
    lr: f64,
    use_baseline: bool,
) -> Result<Vec<f64>, LearnError>
where
    F: Fn(&PageId) -> usize,
{
    if trajectory.is_empty() {
        return Err(LearnError::EmptyTrajectory);
    }
    let rewards: Vec<f64> = trajectory.iter().map(|t| t.reward).collect();
    let returns = discounted_returns(&rewards, gamma);

    for (t, g) in trajectory.iter().zip(&returns) {
        let n = n_actions(&t.state);
        if t.action >= n {
            return Err(LearnError::ActionOutOfRange {
                page: t.state.to_string(),
                action: t.action,
            });
        }
        let advantage = if use_baseline {
            g - params.baseline(&t.state)
        } else {
            *g
        };
        let probs = params.probabilities(&t.state, n);
        for (a, p) in probs.iter().enumerate() {
            let grad = if a == t.action { 1.0 - p } else { -p };
            params.add_preference(&t.state, a, lr * advantage * grad);
        }
        if use_baseline {
            let b = params.baseline.entry(t.state.clone()).or_insert(0.0);
            *b += lr * (g - *b);
        }
    }
    Ok(returns)
}
