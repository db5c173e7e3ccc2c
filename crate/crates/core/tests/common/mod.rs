//! Oracles shared by the integration tests. Everything here works directly
//! on the parsed graph and scenario and never calls into the environment,
//! learner or statistics code it is used to check.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use webmaze::{
    load_site_model, parse_scenario, EndpointPredicate, PageNode, ScenarioSpec, SiteGraph,
};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn load(site: &str, scenario: &str) -> (SiteGraph, ScenarioSpec) {
    let site_text = std::fs::read_to_string(fixture(site)).unwrap();
    let scenario_text = std::fs::read_to_string(fixture(scenario)).unwrap();
    (
        load_site_model(&site_text).unwrap(),
        parse_scenario(&scenario_text).unwrap(),
    )
}

pub const FIXTURES: [(&str, &str); 3] = [
    ("shop.site", "place-order.scenario"),
    ("shop-extended.site", "shop-extended.scenario"),
    ("branching.site", "branching.scenario"),
];

pub fn is_endpoint(spec: &ScenarioSpec, page: &PageNode) -> bool {
    spec.endpoints.iter().any(|p| match p {
        EndpointPredicate::TextPresent(tag) | EndpointPredicate::ElementVisible(tag) => {
            page.cues.iter().any(|c| c == tag)
        }
        EndpointPredicate::TerminalState => page.is_terminal,
    })
}

fn is_failure(spec: &ScenarioSpec, page: &PageNode) -> bool {
    page.actions.is_empty() && !is_endpoint(spec, page)
}

/// Reward for arriving at `page` given the cue tags collected so far, and
/// whether the arrival ends the episode.
pub fn arrival(spec: &ScenarioSpec, page: &PageNode, seen: &BTreeSet<String>) -> (f64, bool) {
    let mut r = -spec.step_penalty;
    for cue in &page.cues {
        if !seen.contains(cue) {
            r += spec.cue_rewards.get(cue).copied().unwrap_or(0.0);
        }
    }
    if is_endpoint(spec, page) {
        return (r + spec.terminal_reward, true);
    }
    if is_failure(spec, page) {
        return (r - spec.failure_penalty, true);
    }
    (r, false)
}

/// Total reward of an action sequence replayed from the start page.
pub fn replay_total(graph: &SiteGraph, spec: &ScenarioSpec, actions: &[usize]) -> f64 {
    let mut page = graph.page(spec.start_page.as_str()).unwrap();
    let mut seen: BTreeSet<String> = page.cues.iter().cloned().collect();
    let mut total = 0.0;
    for &a in actions {
        page = graph.page(page.actions[a].target.as_str()).unwrap();
        total += arrival(spec, page, &seen).0;
        seen.extend(page.cues.iter().cloned());
    }
    total
}

/// Best undiscounted episode reward over every action sequence of at most
/// `max_steps` steps, by memoised depth-first search over
/// (page, collected cues, steps left).
pub fn exhaustive_optimum(graph: &SiteGraph, spec: &ScenarioSpec) -> f64 {
    type Key = (String, Vec<String>, usize);
    fn best(
        graph: &SiteGraph,
        spec: &ScenarioSpec,
        page: &PageNode,
        seen: &BTreeSet<String>,
        left: usize,
        memo: &mut HashMap<Key, f64>,
    ) -> f64 {
        if left == 0 || page.actions.is_empty() {
            return 0.0;
        }
        let key = (
            page.id.as_str().to_string(),
            seen.iter().cloned().collect(),
            left,
        );
        if let Some(v) = memo.get(&key) {
            return *v;
        }
        let mut value = f64::NEG_INFINITY;
        for edge in &page.actions {
            let next = graph.page(edge.target.as_str()).unwrap();
            let (r, done) = arrival(spec, next, seen);
            let rest = if done {
                0.0
            } else {
                let mut seen2 = seen.clone();
                seen2.extend(next.cues.iter().cloned());
                best(graph, spec, next, &seen2, left - 1, memo)
            };
            value = value.max(r + rest);
        }
        memo.insert(key, value);
        value
    }
    let start = graph.page(spec.start_page.as_str()).unwrap();
    if is_endpoint(spec, start) {
        return 0.0;
    }
    let seen = start.cues.iter().cloned().collect();
    best(
        graph,
        spec,
        start,
        &seen,
        spec.max_steps,
        &mut HashMap::new(),
    )
}

/// Optimal state values of the page-level MDP where arriving at a page pays
/// its full cue reward. Returns the values and the final sweep residual.
pub fn value_iteration(
    graph: &SiteGraph,
    spec: &ScenarioSpec,
    gamma: f64,
    tol: f64,
) -> (HashMap<String, f64>, f64) {
    let empty = BTreeSet::new();
    let mut v: HashMap<String, f64> = graph
        .pages()
        .map(|p| (p.id.as_str().to_string(), 0.0))
        .collect();
    loop {
        let mut residual = 0.0f64;
        for page in graph.pages() {
            if page.actions.is_empty() || is_endpoint(spec, page) {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for edge in &page.actions {
                let next = graph.page(edge.target.as_str()).unwrap();
                let (r, done) = arrival(spec, next, &empty);
                let cont = if done { 0.0 } else { v[next.id.as_str()] };
                best = best.max(r + gamma * cont);
            }
            let slot = v.get_mut(page.id.as_str()).unwrap();
            residual = residual.max((best - *slot).abs());
            *slot = best;
        }
        if residual < tol {
            return (v, residual);
        }
    }
}

/// Every maximal start-rooted path that never repeats a page, as action
/// indices, in depth-first order.
pub fn dfs_acyclic_paths(graph: &SiteGraph) -> Vec<Vec<usize>> {
    fn go(
        graph: &SiteGraph,
        page: &str,
        on_path: &mut Vec<String>,
        actions: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let node = graph.page(page).unwrap();
        let mut extended = false;
        for (i, edge) in node.actions.iter().enumerate() {
            let t = edge.target.as_str();
            if on_path.iter().any(|p| p == t) {
                continue;
            }
            extended = true;
            on_path.push(t.to_string());
            actions.push(i);
            go(graph, t, on_path, actions, out);
            actions.pop();
            on_path.pop();
        }
        if !extended {
            out.push(actions.clone());
        }
    }
    let start = graph.start().as_str().to_string();
    let mut out = Vec::new();
    go(
        graph,
        &start,
        &mut vec![start.clone()],
        &mut Vec::new(),
        &mut out,
    );
    out
}

/// Reachability as the least fixed point of "start, plus targets of reached
/// pages", iterated until nothing changes.
pub fn reachable_fixed_point(graph: &SiteGraph, from: &str) -> BTreeSet<String> {
    let mut set: BTreeSet<String> = [from.to_string()].into();
    loop {
        let mut next = set.clone();
        for p in &set {
            for e in &graph.page(p).unwrap().actions {
                next.insert(e.target.as_str().to_string());
            }
        }
        if next == set {
            return set;
        }
        set = next;
    }
}

/// Random site document with `n` pages `p0..` and outgoing edges chosen by
/// `edges[i]` (target indices, reduced modulo `n`). The last page is a
/// terminal sink.
pub fn random_site(n: usize, edges: &[Vec<usize>]) -> String {
    let mut doc = String::from("site random\nstart p0\n");
    for i in 0..n {
        let terminal = if i == n - 1 { " terminal" } else { "" };
        doc.push_str(&format!("page p{i} \"Page {i}\"{terminal}\n"));
    }
    for (i, targets) in edges.iter().enumerate().take(n - 1) {
        for (k, t) in targets.iter().enumerate() {
            doc.push_str(&format!("edge p{i} click(link{k}) -> p{}\n", t % n));
        }
    }
    doc
}

/// Welch test reference values from an independent statistics package:
/// (a, b, t, two-sided p, df).
pub type WelchCase = (&'static [f64], &'static [f64], f64, f64, f64);

pub const WELCH_CASES: [WelchCase; 5] = [
    (
        &[1.0, 2.0, 3.0, 4.0, 5.0],
        &[2.0, 3.0, 4.0, 5.0, 6.0],
        -1.0,
        0.34659350708733416,
        8.0,
    ),
    (
        &[12.5, 14.1, 13.3, 15.8, 12.9, 14.7],
        &[10.2, 11.9, 10.8, 12.4],
        3.5968605238461424,
        0.007796140928191781,
        7.5097419920504125,
    ),
    (
        &[0.1, 0.4, 0.35, 0.8, 0.22, 0.61, 0.47],
        &[0.9, 1.3, 0.75, 1.1, 1.6, 0.95, 1.25, 1.05],
        -5.33495291935242,
        0.00013556473758113012,
        12.996909871354482,
    ),
    (
        &[100.0, 102.0, 98.0, 101.0, 99.0, 103.0, 97.0],
        &[104.5, 99.5, 103.0],
        -1.3794609894300076,
        0.2538616224808623,
        3.2983056116897247,
    ),
    (
        &[3.0, 3.0, 3.1, 2.9],
        &[-1.0, 4.0, 9.0, -6.0, 12.0, 0.5],
        -0.03068524272554129,
        0.9767072225794922,
        5.002260142183689,
    ),
];
