//! Exploration of web applications modelled as page graphs.
//!
//! A site model describes pages, their cue tags and the interactions between
//! them; a scenario names the start page, the goal and the reward scheme.
//! An agent learns to navigate from start to goal (tabular Q-learning,
//! REINFORCE or actor-critic, with epsilon-greedy exploration and
//! backtracking out of dead-ends) and the successful routes are exported as
//! Gherkin scenarios together with per-episode metrics.

pub mod bdd;
pub mod env;
pub mod learner;
pub mod metrics;
pub mod runner;
pub mod scenario;
pub mod site_model;

pub use bdd::{emit_feature, trajectory_to_scenario, GherkinScenario, Trajectory};
pub use env::{EnvSession, Environment, Observation, StepOutcome, Termination};
pub use runner::{export, run_training, train, RunArtifacts, RunConfig, RunError};
pub use scenario::{parse_scenario, EndpointPredicate, ScenarioSpec};
pub use site_model::{load_site_model, ActionEdge, PageId, PageNode, SiteGraph};
