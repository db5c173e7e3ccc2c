//! Scenario files: which page a test starts from, which pages count as
//! reaching the goal, and how the environment pays out rewards.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::site_model::{PageId, PageNode};

pub const DEFAULT_TERMINAL_REWARD: f64 = 10.0;
pub const DEFAULT_CUE_REWARD: f64 = 1.0;
pub const DEFAULT_STEP_PENALTY: f64 = 0.05;
pub const DEFAULT_FAILURE_PENALTY: f64 = 1.0;
pub const DEFAULT_MAX_STEPS: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("scenario has no `start` directive")]
    MissingStart,
    #[error("scenario declares no endpoint predicate")]
    NoEndpointPredicate,
    #[error("line {line}: {reason}")]
    MalformedDocument { line: usize, reason: String },
    #[error("line {line}: `{field}` must be non-negative, got {value}")]
    NegativeReward {
        line: usize,
        field: String,
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EndpointPredicate {
    TextPresent(String),
    ElementVisible(String),
    TerminalState,
}

impl EndpointPredicate {
    pub fn matches(&self, page: &PageNode) -> bool {
        match self {
            EndpointPredicate::TextPresent(tag) | EndpointPredicate::ElementVisible(tag) => {
                page.cues.contains(tag)
            }
            EndpointPredicate::TerminalState => page.is_terminal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub start_page: PageId,
    /// Satisfied when any predicate matches.
    pub endpoints: Vec<EndpointPredicate>,
    pub cue_rewards: BTreeMap<String, f64>,
    pub terminal_reward: f64,
    pub step_penalty: f64,
    pub failure_penalty: f64,
    pub max_steps: usize,
}

impl ScenarioSpec {
    /// A scenario with default rewards and a single endpoint.
    pub fn new(
        name: impl Into<String>,
        start: impl Into<PageId>,
        endpoint: EndpointPredicate,
    ) -> Self {
        ScenarioSpec {
            name: name.into(),
            start_page: start.into(),
            endpoints: vec![endpoint],
            cue_rewards: BTreeMap::new(),
            terminal_reward: DEFAULT_TERMINAL_REWARD,
            step_penalty: DEFAULT_STEP_PENALTY,
            failure_penalty: DEFAULT_FAILURE_PENALTY,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }

    pub fn endpoint_satisfied(&self, page: &PageNode) -> bool {
        self.first_satisfied(page).is_some()
    }

    /// The first predicate, in declaration order, that `page` satisfies.
    pub fn first_satisfied(&self, page: &PageNode) -> Option<&EndpointPredicate> {
        self.endpoints.iter().find(|p| p.matches(page))
    }

    pub fn cue_reward(&self, tag: &str) -> Option<f64> {
        self.cue_rewards.get(tag).copied()
    }

    pub fn to_document(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario {}", self.name);
        let _ = writeln!(out, "start {}", self.start_page);
        for endpoint in &self.endpoints {
            let _ = match endpoint {
                EndpointPredicate::TextPresent(tag) => writeln!(out, "endpoint text_present {tag}"),
                EndpointPredicate::ElementVisible(tag) => {
                    writeln!(out, "endpoint element_visible {tag}")
                }
                EndpointPredicate::TerminalState => writeln!(out, "endpoint terminal"),
            };
        }
        for (tag, reward) in &self.cue_rewards {
            let _ = writeln!(out, "cue_reward {tag} {reward:?}");
        }
        let _ = writeln!(out, "terminal_reward {:?}", self.terminal_reward);
        let _ = writeln!(out, "step_penalty {:?}", self.step_penalty);
        let _ = writeln!(out, "failure_penalty {:?}", self.failure_penalty);
        let _ = writeln!(out, "max_steps {}", self.max_steps);
        out
    }
}

pub fn endpoint_satisfied(spec: &ScenarioSpec, page: &PageNode) -> bool {
    spec.endpoint_satisfied(page)
}

/// Parses a scenario document, filling unspecified rewards with defaults.
///
/// `cue_reward <tag>` without a value declares the tag with the default cue
/// reward.
pub fn parse_scenario(source: &str) -> Result<ScenarioSpec, ScenarioError> {
    let mut name = None;
    let mut start = None;
    let mut endpoints = Vec::new();
    let mut cue_rewards = BTreeMap::new();
    let mut terminal_reward = None;
    let mut step_penalty = None;
    let mut failure_penalty = None;
    let mut max_steps = None;

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let malformed = |reason: String| ScenarioError::MalformedDocument { line, reason };
        let words: Vec<&str> = text.split_whitespace().collect();
        let reward = |field: &str, raw: &str| -> Result<f64, ScenarioError> {
            let value: f64 = raw
                .parse()
                .map_err(|_| malformed(format!("`{field}` expects a number, got `{raw}`")))?;
            if !value.is_finite() {
                return Err(malformed(format!("`{field}` must be finite")));
            }
            if value < 0.0 {
                return Err(ScenarioError::NegativeReward {
                    line,
                    field: field.to_string(),
                    value,
                });
            }
            Ok(value)
        };
        let set_once = |slot: &mut Option<f64>, field: &str, args: &[&str]| {
            if slot.is_some() {
                return Err(malformed(format!("duplicate `{field}`")));
            }
            match args {
                [v] => {
                    *slot = Some(reward(field, v)?);
                    Ok(())
                }
                _ => Err(malformed(format!("`{field}` takes one value"))),
            }
        };

        match (words[0], &words[1..]) {
            ("scenario", rest) if !rest.is_empty() => {
                if name.is_some() {
                    return Err(malformed("duplicate `scenario` directive".into()));
                }
                name = Some(rest.join(" "));
            }
            ("start", [id]) => {
                if start.is_some() {
                    return Err(malformed("duplicate `start` directive".into()));
                }
                start = Some(PageId::from(*id));
            }
            ("endpoint", ["text_present", tag]) => {
                endpoints.push(EndpointPredicate::TextPresent(tag.to_string()))
            }
            ("endpoint", ["element_visible", tag]) => {
                endpoints.push(EndpointPredicate::ElementVisible(tag.to_string()))
            }
            ("endpoint", ["terminal"]) => endpoints.push(EndpointPredicate::TerminalState),
            ("cue_reward", [tag]) => {
                if cue_rewards
                    .insert(tag.to_string(), DEFAULT_CUE_REWARD)
                    .is_some()
                {
                    return Err(malformed(format!("duplicate cue reward for `{tag}`")));
                }
            }
            ("cue_reward", [tag, value]) => {
                let value = reward("cue_reward", value)?;
                if cue_rewards.insert(tag.to_string(), value).is_some() {
                    return Err(malformed(format!("duplicate cue reward for `{tag}`")));
                }
            }
            ("terminal_reward", args) => set_once(&mut terminal_reward, "terminal_reward", args)?,
            ("step_penalty", args) => set_once(&mut step_penalty, "step_penalty", args)?,
            ("failure_penalty", args) => set_once(&mut failure_penalty, "failure_penalty", args)?,
            ("max_steps", [v]) => {
                if max_steps.is_some() {
                    return Err(malformed("duplicate `max_steps`".into()));
                }
                match v.parse::<usize>() {
                    Ok(n) if n >= 1 => max_steps = Some(n),
                    _ => {
                        return Err(malformed(format!(
                            "`max_steps` must be a positive integer, got `{v}`"
                        )))
                    }
                }
            }
            (directive, _) => {
                return Err(malformed(format!("unrecognised line `{directive} ...`")))
            }
        }
    }

    let start_page = start.ok_or(ScenarioError::MissingStart)?;
    if endpoints.is_empty() {
        return Err(ScenarioError::NoEndpointPredicate);
    }
    Ok(ScenarioSpec {
        name: name.unwrap_or_else(|| "scenario".to_string()),
        start_page,
        endpoints,
        cue_rewards,
        terminal_reward: terminal_reward.unwrap_or(DEFAULT_TERMINAL_REWARD),
        step_penalty: step_penalty.unwrap_or(DEFAULT_STEP_PENALTY),
        failure_penalty: failure_penalty.unwrap_or(DEFAULT_FAILURE_PENALTY),
        max_steps: max_steps.unwrap_or(DEFAULT_MAX_STEPS),
    })
}
