//! Recovery from failed episodes.
//!
//! The environment can only be reset to the start page, so "going back" to an
//! earlier page means replaying the recorded actions that led there and then
//! forcing an action that has not been tried from it yet.

use std::collections::{BTreeSet, HashMap};

use super::Transition;
use crate::site_model::{PageId, SiteGraph};

/// Action indices already attempted, per page.
pub type TriedActions = HashMap<PageId, BTreeSet<usize>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BacktrackPlan {
    /// Actions to replay from the start page to reach `branch_page`.
    pub replay_prefix: Vec<usize>,
    pub branch_page: PageId,
    pub forced_action: usize,
}

/// Finds the most recent page of a failed episode that still has an untried
/// action.
///
/// `failed` holds the episode's transitions in order, starting at `start`.
/// Pages are scanned from the final state back to `start`; the first one with
/// an action index missing from `tried` becomes the branch point and its
/// smallest untried index the forced action. Returns `None` once every
/// visited page is exhausted.
pub fn plan_backtrack(
    start: &PageId,
    failed: &[Transition],
    graph: &SiteGraph,
    tried: &TriedActions,
) -> Option<BacktrackPlan> {
    let visited = std::iter::once(start).chain(failed.iter().map(|t| &t.next_state));
    let positions: Vec<&PageId> = visited.collect();

    for (pos, page) in positions.iter().enumerate().rev() {
        let n = graph.action_count(page.as_str());
        let done = tried.get(*page);
        let untried = (0..n).find(|a| done.is_none_or(|set| !set.contains(a)));
        if let Some(forced_action) = untried {
            return Some(BacktrackPlan {
                replay_prefix: failed[..pos].iter().map(|t| t.action).collect(),
                branch_page: (*page).clone(),
                forced_action,
            });
        }
    }
    None
}

/// Enumerates every maximal acyclic path from the graph's start page, as
/// action-index sequences in lexicographic order, by driving
/// [`plan_backtrack`] repeatedly from an empty tried-map.
///
/// Each walk replays the plan's prefix, forces the planned action and then
/// keeps taking the lowest untried action that does not revisit a page on the
/// current path. Actions that would close a cycle count as tried. When a plan
/// branches at depth `k`, the tried sets of the pages below `k` are cleared,
/// since the subtree under the new branch has not been explored.
pub fn enumerate_acyclic_paths(graph: &SiteGraph) -> Vec<Vec<usize>> {
    let start = graph.start().clone();
    let mut tried = TriedActions::new();
    let mut paths = Vec::new();
    let mut walk: Vec<Transition> = Vec::new();
    let mut forced: Option<usize> = None;

    loop {
        let mut on_path: Vec<PageId> = std::iter::once(start.clone())
            .chain(walk.iter().map(|t| t.next_state.clone()))
            .collect();
        let mut extend = true;

        if let Some(action) = forced.take() {
            let here = on_path.last().expect("path holds the start page").clone();
            tried.entry(here.clone()).or_default().insert(action);
            let target = &graph.neighbors(here.as_str()).expect("page exists")[action].target;
            if on_path.contains(target) {
                extend = false;
            } else {
                walk.push(step(&here, action, target));
                on_path.push(target.clone());
            }
        }

        if extend {
            loop {
                let here = on_path.last().expect("path holds the start page").clone();
                let edges = graph.neighbors(here.as_str()).expect("page exists");
                let done = tried.entry(here.clone()).or_default();
                let mut next = None;
                for (i, edge) in edges.iter().enumerate() {
                    if !done.insert(i) {
                        continue;
                    }
                    if on_path.contains(&edge.target) {
                        continue;
                    }
                    next = Some((i, edge.target.clone()));
                    break;
                }
                match next {
                    Some((i, target)) => {
                        walk.push(step(&here, i, &target));
                        on_path.push(target);
                    }
                    None => break,
                }
            }
            paths.push(walk.iter().map(|t| t.action).collect());
        }

        match plan_backtrack(&start, &walk, graph, &tried) {
            None => break,
            Some(plan) => {
                let depth = plan.replay_prefix.len();
                for page in &on_path[depth + 1..] {
                    tried.remove(page);
                }
                walk.truncate(depth);
                forced = Some(plan.forced_action);
            }
        }
    }
    paths
}

fn step(from: &PageId, action: usize, to: &PageId) -> Transition {
    Transition {
        state: from.clone(),
        action,
        reward: 0.0,
        next_state: to.clone(),
        done: false,
    }
}
