//! Exploration and learning: epsilon-greedy action choice, tabular
//! Q-learning, softmax policy gradients, replay memory and backtracking.

mod backtrack;
mod epsilon;
mod policy_gradient;
mod q_learning;
mod replay;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::site_model::PageId;

pub use backtrack::{enumerate_acyclic_paths, plan_backtrack, BacktrackPlan, TriedActions};
pub use epsilon::{epsilon_at, EpsilonSchedule};
pub use policy_gradient::{discounted_returns, reinforce_update, PolicyParams};
pub use q_learning::{q_update, QTable};
pub use replay::ReplayMemory;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LearnError {
    #[error("no actions available on the current page")]
    NoActionsAvailable,
    #[error("policy update needs a nonempty trajectory")]
    EmptyTrajectory,
    #[error("action {action} is out of range for page `{page}`")]
    ActionOutOfRange { page: String, action: usize },
    #[error("invalid learner parameter: {0}")]
    InvalidParameter(&'static str),
}

/// One environment step `(s, a, r, s', done)`.
///
/// `done` marks a terminal state (endpoint or dead-end). Running out of steps
/// is not terminal: the next state still has a value to bootstrap from.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: PageId,
    pub action: usize,
    pub reward: f64,
    pub next_state: PageId,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    QLearning,
    Reinforce,
    ActorCritic,
}

impl Algo {
    pub fn is_policy_gradient(self) -> bool {
        !matches!(self, Algo::QLearning)
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::QLearning => "q-learning",
            Algo::Reinforce => "reinforce",
            Algo::ActorCritic => "actor-critic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub policy_lr: f64,
    pub algo: Algo,
    pub replay_capacity: usize,
    /// Minibatch size replayed from memory after every step; 0 disables
    /// replay and leaves pure online updates.
    pub replay_batch: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            alpha: 0.1,
            gamma: 0.95,
            policy_lr: 0.01,
            algo: Algo::QLearning,
            replay_capacity: 10_000,
            replay_batch: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(LearnError::InvalidParameter("alpha must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(LearnError::InvalidParameter("gamma must lie in [0, 1]"));
        }
        if !(self.policy_lr > 0.0 && self.policy_lr.is_finite()) {
            return Err(LearnError::InvalidParameter("policy_lr must be positive"));
        }
        if self.replay_capacity == 0 {
            return Err(LearnError::InvalidParameter(
                "replay capacity must be positive",
            ));
        }
        Ok(())
    }
}

/// What a learned model does when it is not exploring.
pub trait ActionPolicy {
    fn exploit<R: Rng + ?Sized>(&self, page: &PageId, n_actions: usize, rng: &mut R) -> usize;
}

/// Epsilon-greedy choice among `n_actions` actions on `page`.
///
/// One uniform draw decides between exploring and exploiting on every call,
/// so the random stream advances identically regardless of `eps`.
pub fn select_action<P, R>(
    policy: &P,
    page: &PageId,
    n_actions: usize,
    eps: f64,
    rng: &mut R,
) -> Result<usize, LearnError>
where
    P: ActionPolicy + ?Sized,
    R: Rng + ?Sized,
{
    if n_actions == 0 {
        return Err(LearnError::NoActionsAvailable);
    }
    let coin: f64 = rng.random();
    if coin < eps {
        Ok(rng.random_range(0..n_actions))
    } else {
        Ok(policy.exploit(page, n_actions, rng))
    }
}
