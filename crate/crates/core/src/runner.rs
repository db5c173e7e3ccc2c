//! End-to-end training runs: load a site and scenario, explore for a fixed
//! number of episodes, and export metrics, coverage and feature files.
//!
//! A run is a pure function of the two input documents and the [`RunConfig`].
//! All randomness comes from one seeded root generator that is split into
//! per-purpose streams in a fixed order.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bdd::{
    assign_variant_names, dedup, emit_feature, file_stem, trajectory_to_scenario, BddError,
    GherkinScenario, Trajectory,
};
use crate::env::{EnvError, EnvSession, RewardParts, Termination};
use crate::learner::{
    plan_backtrack, q_update, reinforce_update, select_action, Algo, BacktrackPlan,
    EpsilonSchedule, LearnError, LearnerConfig, PolicyParams, QTable, ReplayMemory, Transition,
    TriedActions,
};
use crate::metrics::{coverage_csv, metrics_csv, CoverageMap, EpisodeRecord};
use crate::scenario::{parse_scenario, ScenarioError, ScenarioSpec};
use crate::site_model::{load_site_model, PageId, SiteError, SiteGraph};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("{path}: {source}")]
    Site { path: PathBuf, source: SiteError },
    #[error("{path}: {source}")]
    Scenario {
        path: PathBuf,
        source: ScenarioError,
    },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Bdd(#[from] BddError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

impl RunError {
    /// Process exit status: 1 configuration, 2 input documents, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::ConfigInvalid(_) | RunError::Learn(LearnError::InvalidParameter(_)) => 1,
            RunError::Site { .. } | RunError::Scenario { .. } | RunError::Env(_) => 2,
            RunError::Io { .. } | RunError::Json { .. } => 3,
            RunError::Learn(_) | RunError::Bdd(_) => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub site_path: PathBuf,
    pub scenario_path: PathBuf,
    pub episodes: usize,
    pub seed: u64,
    pub learner: LearnerConfig,
    pub epsilon: EpsilonSchedule,
    pub emit_top_k: usize,
    /// Also learn from episodes that did not reach an endpoint. When true,
    /// Q-learning updates online after every step; otherwise updates are
    /// applied to a finished episode only if it succeeded.
    pub update_on_failure: bool,
    /// Keep epsilon at 1 until every action of every visited page has been
    /// tried, then follow the schedule.
    pub explore_until_exhausted: bool,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn new(
        site_path: impl Into<PathBuf>,
        scenario_path: impl Into<PathBuf>,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        let learner = LearnerConfig::default();
        RunConfig {
            site_path: site_path.into(),
            scenario_path: scenario_path.into(),
            episodes: 500,
            seed: 0,
            learner,
            epsilon: EpsilonSchedule::default(),
            emit_top_k: 5,
            update_on_failure: default_update_on_failure(learner.algo),
            explore_until_exhausted: false,
            out_dir: out_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.episodes == 0 {
            return Err(RunError::ConfigInvalid(
                "episodes must be at least 1".into(),
            ));
        }
        if self.emit_top_k == 0 {
            return Err(RunError::ConfigInvalid(
                "emit-top-k must be at least 1".into(),
            ));
        }
        self.learner.validate()?;
        self.epsilon.validate()?;
        Ok(())
    }
}

/// Q-learning learns from every step; policy-gradient methods only from
/// successful episodes.
pub fn default_update_on_failure(algo: Algo) -> bool {
    algo == Algo::QLearning
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Q(QTable),
    Policy(PolicyParams),
}

impl Model {
    fn for_algo(algo: Algo) -> Self {
        match algo {
            Algo::QLearning => Model::Q(QTable::new()),
            Algo::Reinforce | Algo::ActorCritic => Model::Policy(PolicyParams::new()),
        }
    }

    pub fn q_table(&self) -> Option<&QTable> {
        match self {
            Model::Q(q) => Some(q),
            Model::Policy(_) => None,
        }
    }

    pub fn policy(&self) -> Option<&PolicyParams> {
        match self {
            Model::Policy(p) => Some(p),
            Model::Q(_) => None,
        }
    }

    /// Deterministic greedy choice, lowest index on ties.
    pub fn greedy(&self, page: &PageId, n_actions: usize) -> usize {
        match self {
            Model::Q(q) => q.argmax(page, n_actions),
            Model::Policy(p) => p.argmax(page, n_actions),
        }
    }

    fn choose(
        &self,
        page: &PageId,
        n_actions: usize,
        eps: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<usize, LearnError> {
        match self {
            Model::Q(q) => select_action(q, page, n_actions, eps, rng),
            Model::Policy(p) => select_action(p, page, n_actions, eps, rng),
        }
    }
}

/// Everything recorded about one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    /// Start page followed by every page arrived at.
    pub pages: Vec<PageId>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub parts: Vec<RewardParts>,
    pub termination: Termination,
    pub backtracked: bool,
}

impl EpisodeTrace {
    fn new(start: PageId, backtracked: bool) -> Self {
        EpisodeTrace {
            pages: vec![start],
            actions: Vec::new(),
            rewards: Vec::new(),
            parts: Vec::new(),
            termination: Termination::None,
            backtracked,
        }
    }

    pub fn steps(&self) -> usize {
        self.actions.len()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn success(&self) -> bool {
        self.termination == Termination::Endpoint
    }

    pub fn final_page(&self) -> &PageId {
        self.pages.last().expect("trace holds the start page")
    }

    pub fn to_trajectory(&self, graph: &SiteGraph) -> Result<Trajectory, RunError> {
        let mut steps = Vec::with_capacity(self.actions.len());
        for (page, &action) in self.pages.iter().zip(&self.actions) {
            let edges = graph.neighbors(page.as_str()).map_err(|e| RunError::Site {
                path: PathBuf::new(),
                source: e,
            })?;
            steps.push((page.clone(), edges[action].clone()));
        }
        Ok(Trajectory {
            steps,
            final_page: self.final_page().clone(),
            total_reward: self.total_reward(),
            success: self.success(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub episodes: usize,
    pub success_rate: f64,
    pub best_reward: Option<f64>,
    /// One-based index of the first successful episode.
    pub episodes_to_first_success: Option<usize>,
    pub total_backtracks: usize,
    pub unique_pages_visited: usize,
    pub defect_pages_found: usize,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub config: RunConfig,
    pub records: Vec<EpisodeRecord>,
    pub coverage: CoverageMap,
    /// Successful routes, best first, at most `emit_top_k` of them.
    pub scenarios: Vec<GherkinScenario>,
    pub summary: RunSummary,
    pub traces: Vec<EpisodeTrace>,
    pub model: Model,
    pub feature_name: String,
}

/// The `run.json` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub config: RunConfig,
    pub summary: RunSummary,
}

pub fn load_inputs(config: &RunConfig) -> Result<(SiteGraph, ScenarioSpec), RunError> {
    let site_text = fs::read_to_string(&config.site_path).map_err(io_err(&config.site_path))?;
    let graph = load_site_model(&site_text).map_err(|source| RunError::Site {
        path: config.site_path.clone(),
        source,
    })?;
    let scenario_text =
        fs::read_to_string(&config.scenario_path).map_err(io_err(&config.scenario_path))?;
    let spec = parse_scenario(&scenario_text).map_err(|source| RunError::Scenario {
        path: config.scenario_path.clone(),
        source,
    })?;
    Ok((graph, spec))
}

/// Loads the configured documents and trains on them.
pub fn run_training(config: &RunConfig) -> Result<RunArtifacts, RunError> {
    config.validate()?;
    let (graph, spec) = load_inputs(config)?;
    train(&graph, &spec, config)
}

struct Discovered {
    trace_index: usize,
    reward: f64,
    steps: usize,
}

/// Runs the configured number of episodes on in-memory inputs. The paths in
/// `config` are only echoed, never read.
pub fn train(
    graph: &SiteGraph,
    spec: &ScenarioSpec,
    config: &RunConfig,
) -> Result<RunArtifacts, RunError> {
    config.validate()?;
    // fails early when the start page is missing
    EnvSession::reset(graph, spec)?;

    let learner = &config.learner;
    let mut root = ChaCha8Rng::seed_from_u64(config.seed);
    let mut action_rng = ChaCha8Rng::from_rng(&mut root);
    let mut replay_rng = ChaCha8Rng::from_rng(&mut root);

    let mut model = Model::for_algo(learner.algo);
    let mut memory = ReplayMemory::new(learner.replay_capacity);
    let mut tried = TriedActions::new();
    let mut coverage = CoverageMap::new();
    let mut pending: Option<BacktrackPlan> = None;
    let mut exhausted = false;

    let online_q = learner.algo == Algo::QLearning && config.update_on_failure;

    let mut records = Vec::with_capacity(config.episodes);
    let mut traces = Vec::with_capacity(config.episodes);
    let mut discovered: Vec<Discovered> = Vec::new();
    let mut seen_routes: HashSet<Vec<usize>> = HashSet::new();
    let mut defect_pages: BTreeSet<PageId> = BTreeSet::new();

    for episode in 0..config.episodes {
        let eps = if config.explore_until_exhausted && !exhausted {
            1.0
        } else {
            config.epsilon.at(episode as u64)
        };

        let plan = pending.take();
        let backtracked = plan.is_some();
        let mut forced: VecDeque<usize> = plan
            .map(|p| {
                let mut actions = p.replay_prefix;
                actions.push(p.forced_action);
                actions.into()
            })
            .unwrap_or_default();

        memory.begin_episode();
        let (mut session, mut obs) = EnvSession::reset(graph, spec)?;
        coverage.record(&obs.page_id);
        let mut trace = EpisodeTrace::new(obs.page_id.clone(), backtracked);
        let mut transitions: Vec<Transition> = Vec::new();
        let mut defects_hit: BTreeSet<PageId> = BTreeSet::new();

        trace.termination = if session.at_endpoint() {
            Termination::Endpoint
        } else if obs.action_count == 0 {
            Termination::DeadEnd
        } else {
            Termination::None
        };

        while !trace.termination.is_done() {
            let action = match forced.pop_front() {
                Some(a) => a,
                None => model.choose(&obs.page_id, obs.action_count, eps, &mut action_rng)?,
            };
            let out = session.step(action)?;
            let t = Transition {
                state: obs.page_id.clone(),
                action,
                reward: out.reward,
                next_state: out.observation.page_id.clone(),
                done: out.termination.is_terminal_state(),
            };
            tried.entry(t.state.clone()).or_default().insert(action);
            coverage.record(&t.next_state);
            if graph.page(t.next_state.as_str()).is_ok_and(|p| p.is_defect) {
                defects_hit.insert(t.next_state.clone());
            }

            if let (true, Model::Q(q)) = (online_q, &mut model) {
                q_update(
                    q,
                    &t,
                    out.observation.action_count,
                    learner.alpha,
                    learner.gamma,
                );
                if learner.replay_batch > 0 {
                    for sample in memory.sample(&mut replay_rng, learner.replay_batch) {
                        let n_next = graph.action_count(sample.next_state.as_str());
                        q_update(q, sample, n_next, learner.alpha, learner.gamma);
                    }
                }
            }
            memory.push(t.clone());
            transitions.push(t);

            trace.pages.push(out.observation.page_id.clone());
            trace.actions.push(action);
            trace.rewards.push(out.reward);
            trace.parts.push(out.parts);
            trace.termination = out.termination;
            obs = out.observation;
        }

        let success = trace.success();
        if success || config.update_on_failure {
            match &mut model {
                Model::Q(q) if !online_q => {
                    for t in &transitions {
                        let n_next = graph.action_count(t.next_state.as_str());
                        q_update(q, t, n_next, learner.alpha, learner.gamma);
                    }
                }
                Model::Q(_) => {}
                Model::Policy(params) => {
                    if !transitions.is_empty() {
                        reinforce_update(
                            params,
                            &transitions,
                            |p| graph.action_count(p.as_str()),
                            learner.gamma,
                            learner.policy_lr,
                            learner.algo == Algo::ActorCritic,
                        )?;
                    }
                }
            }
        }

        if success {
            if seen_routes.insert(trace.actions.clone()) {
                discovered.push(Discovered {
                    trace_index: traces.len(),
                    reward: trace.total_reward(),
                    steps: trace.steps(),
                });
            }
        } else {
            pending = plan_within_budget(
                spec.start_page.clone(),
                &transitions,
                graph,
                &tried,
                spec.max_steps,
            );
        }

        if config.explore_until_exhausted && !exhausted {
            exhausted = coverage.iter().all(|(page, _)| {
                tried.get(page).map_or(0, BTreeSet::len) == graph.action_count(page.as_str())
            });
        }

        defect_pages.extend(defects_hit.iter().cloned());
        records.push(EpisodeRecord {
            episode,
            total_reward: trace.total_reward(),
            steps: trace.steps(),
            success,
            backtracks_used: usize::from(backtracked),
            defects_hit: defects_hit.len(),
            cumulative_unique_pages: coverage.unique_pages(),
            epsilon: eps,
        });
        traces.push(trace);
    }

    discovered.sort_by(|a, b| {
        b.reward
            .total_cmp(&a.reward)
            .then(a.steps.cmp(&b.steps))
            .then(a.trace_index.cmp(&b.trace_index))
    });
    let mut scenarios = Vec::with_capacity(discovered.len());
    for d in &discovered {
        let trajectory = traces[d.trace_index].to_trajectory(graph)?;
        scenarios.push(trajectory_to_scenario(&trajectory, graph, spec)?);
    }
    let mut scenarios = dedup(scenarios);
    scenarios.truncate(config.emit_top_k);
    assign_variant_names(&mut scenarios);

    let successes = records.iter().filter(|r| r.success).count();
    let summary = RunSummary {
        episodes: records.len(),
        success_rate: successes as f64 / records.len() as f64,
        best_reward: records
            .iter()
            .map(|r| r.total_reward)
            .max_by(f64::total_cmp),
        episodes_to_first_success: records.iter().position(|r| r.success).map(|i| i + 1),
        total_backtracks: records.iter().map(|r| r.backtracks_used).sum(),
        unique_pages_visited: coverage.unique_pages(),
        defect_pages_found: defect_pages.len(),
    };

    Ok(RunArtifacts {
        config: config.clone(),
        records,
        coverage,
        scenarios,
        summary,
        traces,
        model,
        feature_name: spec.name.clone(),
    })
}

/// Plans a backtrack whose replay still fits inside the step budget: a branch
/// at depth `max_steps` could never be reached, so the last state is dropped
/// until the plan is feasible.
fn plan_within_budget(
    start: PageId,
    failed: &[Transition],
    graph: &SiteGraph,
    tried: &TriedActions,
    max_steps: usize,
) -> Option<BacktrackPlan> {
    let mut slice = failed;
    loop {
        let plan = plan_backtrack(&start, slice, graph, tried)?;
        if plan.replay_prefix.len() < max_steps {
            return Some(plan);
        }
        slice = &slice[..slice.len() - 1];
    }
}

/// Follows the model's greedy choice from the start page until the episode
/// ends.
pub fn greedy_rollout(
    graph: &SiteGraph,
    spec: &ScenarioSpec,
    model: &Model,
) -> Result<EpisodeTrace, RunError> {
    let (mut session, mut obs) = EnvSession::reset(graph, spec)?;
    let mut trace = EpisodeTrace::new(obs.page_id.clone(), false);
    trace.termination = if session.at_endpoint() {
        Termination::Endpoint
    } else if obs.action_count == 0 {
        Termination::DeadEnd
    } else {
        Termination::None
    };
    while !trace.termination.is_done() {
        let action = model.greedy(&obs.page_id, obs.action_count);
        let out = session.step(action)?;
        trace.pages.push(out.observation.page_id.clone());
        trace.actions.push(action);
        trace.rewards.push(out.reward);
        trace.parts.push(out.parts);
        trace.termination = out.termination;
        obs = out.observation;
    }
    Ok(trace)
}

/// Replays recorded actions in a fresh episode and returns the rewards paid.
pub fn replay_rewards(
    graph: &SiteGraph,
    spec: &ScenarioSpec,
    actions: &[usize],
) -> Result<Vec<f64>, RunError> {
    let (mut session, _) = EnvSession::reset(graph, spec)?;
    actions
        .iter()
        .map(|&a| session.step(a).map(|o| o.reward).map_err(RunError::from))
        .collect()
}

/// Writes `metrics.csv`, `coverage.csv`, `run.json` and, when any scenario
/// exists, one file per scenario under `features/`.
pub fn export(artifacts: &RunArtifacts, out_dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let write = |name: &str, contents: &str| {
        let path = out_dir.join(name);
        fs::write(&path, contents).map_err(io_err(&path))
    };
    write("metrics.csv", &metrics_csv(&artifacts.records))?;
    write("coverage.csv", &coverage_csv(&artifacts.coverage))?;

    let report = RunReport {
        seed: artifacts.config.seed,
        config: artifacts.config.clone(),
        summary: artifacts.summary.clone(),
    };
    let json_path = out_dir.join("run.json");
    let mut json = serde_json::to_string_pretty(&report).map_err(|source| RunError::Json {
        path: json_path.clone(),
        source,
    })?;
    json.push('\n');
    write("run.json", &json)?;

    let features = out_dir.join("features");
    if features.exists() {
        fs::remove_dir_all(&features).map_err(io_err(&features))?;
    }
    let selected =
        &artifacts.scenarios[..artifacts.scenarios.len().min(artifacts.config.emit_top_k)];
    if !selected.is_empty() {
        fs::create_dir_all(&features).map_err(io_err(&features))?;
        for scenario in selected {
            let text = emit_feature(&artifacts.feature_name, std::slice::from_ref(scenario))?;
            let path = features.join(format!("{}.feature", file_stem(&scenario.scenario_name)));
            fs::write(&path, text).map_err(io_err(&path))?;
        }
    }
    Ok(())
}

pub fn read_run_report(path: &Path) -> Result<RunReport, RunError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| RunError::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::EndpointPredicate;

    fn direct_graph() -> SiteGraph {
        load_site_model(
            "\
start home
page home \"Home\"
page done \"Done\" terminal cues: order_confirmed
edge home click(buy) -> done
",
        )
        .unwrap()
    }

    fn config() -> RunConfig {
        RunConfig::new("site", "scenario", "out")
    }

    #[test]
    fn single_forced_path() {
        let g = direct_graph();
        let spec = ScenarioSpec::new(
            "buy",
            "home",
            EndpointPredicate::TextPresent("order_confirmed".into()),
        );
        let mut cfg = config();
        cfg.episodes = 1;
        cfg.epsilon = EpsilonSchedule::new(0.0, 1.0, 0.0).unwrap();
        let art = train(&g, &spec, &cfg).unwrap();
        assert!(art.records[0].success);
        assert_eq!(art.records[0].steps, 1);
        assert_eq!(art.scenarios.len(), 1);
        assert_eq!(
            art.scenarios[0].scenario_name,
            "buy via 1 steps (variant 1)"
        );
    }

    #[test]
    fn start_already_at_endpoint() {
        let g = direct_graph();
        let spec = ScenarioSpec::new("noop", "done", EndpointPredicate::TerminalState);
        let mut cfg = config();
        cfg.episodes = 5;
        let art = train(&g, &spec, &cfg).unwrap();
        assert!(art.records.iter().all(|r| r.success && r.steps == 0));
        assert_eq!(art.scenarios.len(), 1);
        assert!(art.scenarios[0].whens.is_empty());
        assert_eq!(art.coverage.visits("done"), 5);
    }

    #[test]
    fn start_page_must_exist() {
        let g = direct_graph();
        let spec = ScenarioSpec::new("x", "missing", EndpointPredicate::TerminalState);
        let err = train(&g, &spec, &config()).unwrap_err();
        assert!(matches!(err, RunError::Env(EnvError::StartPageUnknown(_))));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn config_checks() {
        let mut cfg = config();
        cfg.episodes = 0;
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
        let mut cfg = config();
        cfg.emit_top_k = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = config();
        cfg.learner.alpha = 2.0;
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
    }

    #[test]
    fn budget_drops_unreachable_branch() {
        let g = load_site_model(
            "\
start a
page a \"A\"
page b \"B\"
edge a click(b) -> b
edge b click(a) -> a
edge b click(b) -> b
",
        )
        .unwrap();
        let t = |s: &str, a, n: &str| Transition {
            state: s.into(),
            action: a,
            reward: 0.0,
            next_state: n.into(),
            done: false,
        };
        let failed = [t("a", 0, "b"), t("b", 0, "a")];
        let tried = TriedActions::new();
        let plan = plan_within_budget("a".into(), &failed, &g, &tried, 2).unwrap();
        assert_eq!(plan.replay_prefix, vec![0]);
        assert_eq!(plan.branch_page.as_str(), "b");
    }
}
