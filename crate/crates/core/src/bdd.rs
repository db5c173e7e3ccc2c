//! Turning successful episodes into Gherkin scenarios.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::scenario::{EndpointPredicate, ScenarioSpec};
use crate::site_model::{ActionEdge, Interaction, PageId, SiteGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BddError {
    #[error("trajectory did not reach an endpoint")]
    NotSuccessful,
    #[error("trajectory step {step} does not follow from the previous page")]
    InconsistentPath { step: usize },
    #[error("page `{0}` is not in the site model")]
    UnknownPage(String),
    #[error("a feature needs at least one scenario")]
    EmptyScenarioList,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// An episode as the ordered `(page, action taken on it)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<(PageId, ActionEdge)>,
    pub final_page: PageId,
    pub total_reward: f64,
    pub success: bool,
}

impl Trajectory {
    pub fn start_page(&self) -> &PageId {
        self.steps.first().map_or(&self.final_page, |(p, _)| p)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Index of the first step whose page is not where the previous edge led.
    fn inconsistency(&self) -> Option<usize> {
        for (i, window) in self.steps.windows(2).enumerate() {
            if window[0].1.target != window[1].0 {
                return Some(i + 1);
            }
        }
        match self.steps.last() {
            Some((_, edge)) if edge.target != self.final_page => Some(self.steps.len()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GherkinScenario {
    pub feature_name: String,
    pub scenario_name: String,
    pub given: String,
    pub whens: Vec<String>,
    pub then: String,
}

pub fn step_text(interaction: &Interaction) -> String {
    match interaction {
        Interaction::Click { element } => format!("the user clicks \"{element}\""),
        Interaction::TypeText { text, element } => {
            format!("the user types \"{text}\" into \"{element}\"")
        }
        Interaction::Scroll(dir) => format!("the user scrolls {dir}"),
    }
}

fn scenario_name(spec_name: &str, steps: usize, variant: usize) -> String {
    format!("{spec_name} via {steps} steps (variant {variant})")
}

pub fn trajectory_to_scenario(
    traj: &Trajectory,
    graph: &SiteGraph,
    spec: &ScenarioSpec,
) -> Result<GherkinScenario, BddError> {
    if !traj.success {
        return Err(BddError::NotSuccessful);
    }
    if let Some(step) = traj.inconsistency() {
        return Err(BddError::InconsistentPath { step });
    }
    let page = |id: &PageId| {
        graph
            .page(id.as_str())
            .map_err(|_| BddError::UnknownPage(id.to_string()))
    };
    let start = page(traj.start_page())?;
    let last = page(&traj.final_page)?;
    let then = match spec.first_satisfied(last).ok_or(BddError::NotSuccessful)? {
        EndpointPredicate::TextPresent(tag) => format!("the \"{tag}\" message is displayed"),
        EndpointPredicate::ElementVisible(tag) => format!("the \"{tag}\" element is visible"),
        EndpointPredicate::TerminalState => format!("the \"{}\" page is reached", last.title),
    };
    Ok(GherkinScenario {
        feature_name: spec.name.clone(),
        scenario_name: scenario_name(&spec.name, traj.steps.len(), 1),
        given: format!("the user is on the \"{}\" page", start.title),
        whens: traj
            .steps
            .iter()
            .map(|(_, edge)| step_text(&edge.interaction))
            .collect(),
        then,
    })
}

/// Drops scenarios whose Given/When/Then text repeats an earlier one.
pub fn dedup(scenarios: Vec<GherkinScenario>) -> Vec<GherkinScenario> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(scenarios.len());
    for s in scenarios {
        let key = (s.given.clone(), s.whens.clone(), s.then.clone());
        if seen.insert(key) {
            out.push(s);
        }
    }
    out
}

/// Renames scenarios to `<feature> via <k> steps (variant <n>)`, numbering
/// scenarios of equal length in the order given.
pub fn assign_variant_names(scenarios: &mut [GherkinScenario]) {
    let mut counters: HashMap<usize, usize> = HashMap::new();
    for s in scenarios {
        let n = counters.entry(s.whens.len()).or_insert(0);
        *n += 1;
        s.scenario_name = scenario_name(&s.feature_name, s.whens.len(), *n);
    }
}

pub fn emit_feature(feature_name: &str, scenarios: &[GherkinScenario]) -> Result<String, BddError> {
    if scenarios.is_empty() {
        return Err(BddError::EmptyScenarioList);
    }
    let mut out = String::new();
    let _ = writeln!(out, "Feature: {feature_name}");
    for s in scenarios {
        out.push('\n');
        let _ = writeln!(out, "  Scenario: {}", s.scenario_name);
        let _ = writeln!(out, "    Given {}", s.given);
        for (j, when) in s.whens.iter().enumerate() {
            let keyword = if j == 0 { "When" } else { "And" };
            let _ = writeln!(out, "    {keyword} {when}");
        }
        let _ = writeln!(out, "    Then {}", s.then);
    }
    Ok(out)
}

/// Reads back the subset of Gherkin produced by [`emit_feature`].
pub fn parse_feature(text: &str) -> Result<(String, Vec<GherkinScenario>), BddError> {
    let mut feature: Option<String> = None;
    let mut scenarios: Vec<GherkinScenario> = Vec::new();
    let mut current: Option<(String, Option<String>, Vec<String>)> = None;
    let err = |line: usize, reason: &str| BddError::Parse {
        line,
        reason: reason.to_string(),
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix("Feature: ") {
            if feature.is_some() {
                return Err(err(line, "second Feature line"));
            }
            feature = Some(name.to_string());
        } else if let Some(name) = trimmed.strip_prefix("Scenario: ") {
            if current.is_some() {
                return Err(err(line, "scenario without a Then step"));
            }
            current = Some((name.to_string(), None, Vec::new()));
        } else if let Some(step) = trimmed.strip_prefix("Given ") {
            match current.as_mut() {
                Some((_, given @ None, _)) => *given = Some(step.to_string()),
                _ => return Err(err(line, "unexpected Given")),
            }
        } else if let Some(step) = trimmed.strip_prefix("When ") {
            match current.as_mut() {
                Some((_, Some(_), whens)) if whens.is_empty() => whens.push(step.to_string()),
                _ => return Err(err(line, "unexpected When")),
            }
        } else if let Some(step) = trimmed.strip_prefix("And ") {
            match current.as_mut() {
                Some((_, Some(_), whens)) if !whens.is_empty() => whens.push(step.to_string()),
                _ => return Err(err(line, "unexpected And")),
            }
        } else if let Some(step) = trimmed.strip_prefix("Then ") {
            match current.take() {
                Some((name, Some(given), whens)) => scenarios.push(GherkinScenario {
                    feature_name: feature.clone().unwrap_or_default(),
                    scenario_name: name,
                    given,
                    whens,
                    then: step.to_string(),
                }),
                _ => return Err(err(line, "unexpected Then")),
            }
        } else {
            return Err(err(line, "unrecognised line"));
        }
    }
    if current.is_some() {
        return Err(err(text.lines().count(), "scenario without a Then step"));
    }
    let feature = feature.ok_or_else(|| err(1, "missing Feature line"))?;
    Ok((feature, scenarios))
}

/// Lowercase ASCII file stem: runs of non-alphanumerics become one `_`.
pub fn file_stem(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.is_empty() && !out.ends_with('_') {
            out.push('_');
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    if out.is_empty() {
        out.push_str("scenario");
    }
    out
}
