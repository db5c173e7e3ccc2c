mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use webmaze::env::EnvError;
use webmaze::{EnvSession, ScenarioSpec, SiteGraph, Termination};

/// Plays `choices` (reduced modulo the action count) until the episode ends.
fn play(
    graph: &SiteGraph,
    spec: &ScenarioSpec,
    choices: &[usize],
) -> Vec<(usize, webmaze::StepOutcome)> {
    let (mut s, mut obs) = EnvSession::reset(graph, spec).unwrap();
    let mut out = Vec::new();
    for &c in choices {
        if s.is_finished() || obs.action_count == 0 {
            break;
        }
        let a = c % obs.action_count;
        let o = s.step(a).unwrap();
        obs = o.observation.clone();
        out.push((a, o));
    }
    out
}

#[test]
fn reset_observes_start() {
    let (graph, spec) = load("shop.site", "place-order.scenario");
    let (_, obs) = EnvSession::reset(&graph, &spec).unwrap();
    assert_eq!(obs.page_id.as_str(), "homepage");
    assert_eq!(obs.action_count, graph.neighbors("homepage").unwrap().len());
}

#[test]
fn dead_end_pays_failure_penalty() {
    let (graph, spec) = load("shop-extended.site", "shop-extended.scenario");
    let (mut s, _) = EnvSession::reset(&graph, &spec).unwrap();
    s.step(1).unwrap(); // deals
    let o = s.step(1).unwrap(); // clearance
    assert_eq!(o.termination, Termination::DeadEnd);
    assert!(o.done);
    assert!((o.reward - (-0.05 - 1.0)).abs() < 1e-12);
    assert_eq!(s.step(0), Err(EnvError::SessionFinished));
}

#[test]
fn timeout_after_max_steps() {
    let (graph, mut spec) = load("shop-extended.site", "shop-extended.scenario");
    spec.max_steps = 4;
    let (mut s, _) = EnvSession::reset(&graph, &spec).unwrap();
    // home <-> deals forever
    let terms: Vec<Termination> = [1, 0, 1, 0]
        .iter()
        .map(|&a| s.step(a).unwrap().termination)
        .collect();
    assert_eq!(
        terms,
        [
            Termination::None,
            Termination::None,
            Termination::None,
            Termination::Timeout
        ]
    );
}

#[test]
fn out_of_range_action() {
    let (graph, spec) = load("shop.site", "place-order.scenario");
    let (mut s, _) = EnvSession::reset(&graph, &spec).unwrap();
    assert_eq!(
        s.step(2),
        Err(EnvError::ActionOutOfRange {
            index: 2,
            available: 2
        })
    );
}

proptest! {
    #[test]
    fn rewards_match_the_oracle(
        fixture_index in 0usize..3,
        choices in prop::collection::vec(0usize..8, 0..80),
    ) {
        let (site, scenario) = FIXTURES[fixture_index];
        let (graph, spec) = load(site, scenario);
        let steps = play(&graph, &spec, &choices);
        prop_assert!(steps.len() <= spec.max_steps);

        let mut page = graph.page(spec.start_page.as_str()).unwrap();
        let mut seen: BTreeSet<String> = page.cues.iter().cloned().collect();
        let mut paid_cues: Vec<String> = Vec::new();
        for (a, o) in &steps {
            page = graph.page(page.actions[*a].target.as_str()).unwrap();
            let (r, _) = arrival(&spec, page, &seen);
            prop_assert!((o.reward - r).abs() <= 1e-12);
            prop_assert!((o.parts.total() - o.reward).abs() <= 1e-12);
            prop_assert_eq!(o.parts.step_penalty, spec.step_penalty);
            for cue in &o.observation.new_cues {
                prop_assert!(!seen.contains(cue));
                paid_cues.push(cue.clone());
            }
            seen.extend(page.cues.iter().cloned());
        }
        // each cue tag is new at most once per episode
        let unique: BTreeSet<_> = paid_cues.iter().collect();
        prop_assert_eq!(unique.len(), paid_cues.len());

        if let Some((_, last)) = steps.last() {
            prop_assert_eq!(last.done, last.termination != Termination::None);
        }
        let again = play(&graph, &spec, &choices);
        prop_assert_eq!(again, steps);
    }
}
