//! Episode semantics over a site graph: reset to the start page, follow an
//! interaction, pay rewards and decide when the episode is over.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::scenario::ScenarioSpec;
use crate::site_model::{PageId, PageNode, SiteGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("start page `{0}` does not exist in the site model")]
    StartPageUnknown(String),
    #[error("action {index} out of range, page offers {available}")]
    ActionOutOfRange { index: usize, available: usize },
    #[error("episode already finished")]
    SessionFinished,
    #[error("unknown page `{0}`")]
    UnknownPage(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub page_id: PageId,
    pub action_count: usize,
    /// Cue tags seen for the first time in this episode on this arrival.
    pub new_cues: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    None,
    Endpoint,
    DeadEnd,
    Timeout,
}

impl Termination {
    pub fn is_done(self) -> bool {
        self != Termination::None
    }

    /// True for outcomes that end the episode because of the page itself,
    /// as opposed to running out of steps.
    pub fn is_terminal_state(self) -> bool {
        matches!(self, Termination::Endpoint | Termination::DeadEnd)
    }
}

/// The additive pieces of a single step's reward.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardParts {
    pub step_penalty: f64,
    pub cue_reward: f64,
    pub terminal_reward: f64,
    pub failure_penalty: f64,
}

impl RewardParts {
    pub fn total(&self) -> f64 {
        -self.step_penalty + self.cue_reward + self.terminal_reward - self.failure_penalty
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub termination: Termination,
    pub parts: RewardParts,
}

/// Contract for anything that can host an episode: the simulated page graph
/// here, or a driver for a real browser.
pub trait Environment {
    fn reset(&mut self) -> Observation;
    fn step(&mut self, action_index: usize) -> Result<StepOutcome, EnvError>;
    /// Human-readable labels of the actions offered on `page`.
    fn actions(&self, page: &str) -> Result<Vec<String>, EnvError>;
}

/// Mutable state of one episode over a shared graph and scenario.
#[derive(Debug, Clone)]
pub struct EnvSession<'a> {
    graph: &'a SiteGraph,
    spec: &'a ScenarioSpec,
    current: &'a PageNode,
    steps_taken: usize,
    seen_cues: BTreeSet<String>,
    visit_counts: BTreeMap<PageId, usize>,
    finished: bool,
}

impl<'a> EnvSession<'a> {
    pub fn reset(
        graph: &'a SiteGraph,
        spec: &'a ScenarioSpec,
    ) -> Result<(Self, Observation), EnvError> {
        let start = graph
            .page(spec.start_page.as_str())
            .map_err(|_| EnvError::StartPageUnknown(spec.start_page.to_string()))?;
        let mut session = EnvSession {
            graph,
            spec,
            current: start,
            steps_taken: 0,
            seen_cues: BTreeSet::new(),
            visit_counts: BTreeMap::new(),
            finished: false,
        };
        let obs = session.restart();
        Ok((session, obs))
    }

    fn restart(&mut self) -> Observation {
        let start = &self
            .graph
            .page(self.spec.start_page.as_str())
            .expect("validated at reset");
        self.current = start;
        self.steps_taken = 0;
        self.finished = false;
        self.seen_cues = start.cues.clone();
        self.visit_counts.clear();
        self.visit_counts.insert(start.id.clone(), 1);
        Observation {
            page_id: start.id.clone(),
            action_count: start.actions.len(),
            new_cues: start.cues.clone(),
        }
    }

    pub fn current(&self) -> &'a PageNode {
        self.current
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn seen_cues(&self) -> &BTreeSet<String> {
        &self.seen_cues
    }

    pub fn visit_counts(&self) -> &BTreeMap<PageId, usize> {
        &self.visit_counts
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Whether the page the session sits on satisfies the scenario's endpoint.
    pub fn at_endpoint(&self) -> bool {
        self.spec.endpoint_satisfied(self.current)
    }

    pub fn step(&mut self, action_index: usize) -> Result<StepOutcome, EnvError> {
        if self.finished {
            return Err(EnvError::SessionFinished);
        }
        let available = self.current.actions.len();
        let edge = self
            .current
            .actions
            .get(action_index)
            .ok_or(EnvError::ActionOutOfRange {
                index: action_index,
                available,
            })?;
        let target = self
            .graph
            .page(edge.target.as_str())
            .expect("edge targets are validated at load");

        self.current = target;
        self.steps_taken += 1;
        *self.visit_counts.entry(target.id.clone()).or_insert(0) += 1;

        let new_cues: BTreeSet<String> = target
            .cues
            .iter()
            .filter(|c| !self.seen_cues.contains(*c))
            .cloned()
            .collect();
        let mut parts = RewardParts {
            step_penalty: self.spec.step_penalty,
            cue_reward: new_cues
                .iter()
                .filter_map(|c| self.spec.cue_reward(c))
                .sum(),
            ..RewardParts::default()
        };
        self.seen_cues.extend(new_cues.iter().cloned());

        let termination = if self.spec.endpoint_satisfied(target) {
            parts.terminal_reward = self.spec.terminal_reward;
            Termination::Endpoint
        } else if target.actions.is_empty() {
            parts.failure_penalty = self.spec.failure_penalty;
            Termination::DeadEnd
        } else if self.steps_taken >= self.spec.max_steps {
            Termination::Timeout
        } else {
            Termination::None
        };
        self.finished = termination.is_done();

        Ok(StepOutcome {
            observation: Observation {
                page_id: target.id.clone(),
                action_count: target.actions.len(),
                new_cues,
            },
            reward: parts.total(),
            done: self.finished,
            termination,
            parts,
        })
    }
}

impl Environment for EnvSession<'_> {
    fn reset(&mut self) -> Observation {
        self.restart()
    }

    fn step(&mut self, action_index: usize) -> Result<StepOutcome, EnvError> {
        EnvSession::step(self, action_index)
    }

    fn actions(&self, page: &str) -> Result<Vec<String>, EnvError> {
        let edges = self
            .graph
            .neighbors(page)
            .map_err(|_| EnvError::UnknownPage(page.to_string()))?;
        Ok(edges.iter().map(|e| e.interaction.to_string()).collect())
    }
}
