//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the lines reach the console; exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use common::*;
use webmaze::bdd::{parse_feature, Trajectory};
use webmaze::learner::{enumerate_acyclic_paths, Algo};
use webmaze::metrics::{confidence_interval, welch_t_test};
use webmaze::runner::{greedy_rollout, EpisodeTrace};
use webmaze::{
    emit_feature, export, run_training, trajectory_to_scenario, RunArtifacts, RunConfig,
};

type Outcome = Result<String, String>;

fn config(site: &str, scenario: &str, out: &Path) -> RunConfig {
    RunConfig::new(fixture(site), fixture(scenario), out.to_path_buf())
}

fn timed(cfg: &RunConfig) -> (RunArtifacts, Duration) {
    let t0 = Instant::now();
    let artifacts = run_training(cfg).expect("training runs");
    (artifacts, t0.elapsed())
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn q_convergence(out: &Path) -> Outcome {
    let (graph, spec) = load("shop.site", "place-order.scenario");
    let mut cfg = config("shop.site", "place-order.scenario", out);
    cfg.seed = 42;
    cfg.episodes = 500;
    let (art, elapsed) = timed(&cfg);
    let greedy = greedy_rollout(&graph, &spec, &art.model).map_err(|e| e.to_string())?;
    let optimum = exhaustive_optimum(&graph, &spec);
    let diff = (greedy.total_reward() - optimum).abs();
    check(
        diff <= 1e-9 && elapsed < Duration::from_secs(2),
        format!(
            "greedy reward {:.9} vs optimum {:.9} (|diff| {diff:.1e} <= 1e-9), runtime {:.3}s < 2s",
            greedy.total_reward(),
            optimum,
            elapsed.as_secs_f64()
        ),
    )
}

fn value_iteration_oracle(out: &Path) -> Outcome {
    let (graph, spec) = load("shop-extended.site", "shop-extended.scenario");
    let mut cfg = config("shop-extended.site", "shop-extended.scenario", out);
    cfg.episodes = 5000;
    cfg.epsilon.eps_min = 0.05;
    let (art, elapsed) = timed(&cfg);
    let (v, residual) = value_iteration(&graph, &spec, cfg.learner.gamma, 1e-12);
    let q = art.model.q_table().ok_or("model is not a Q-table")?;
    let greedy = greedy_rollout(&graph, &spec, &art.model).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let states = &greedy.pages[..greedy.pages.len() - 1];
    for page in states {
        let n = graph.action_count(page.as_str());
        worst = worst.max((q.max_value(page, n) - v[page.as_str()]).abs());
    }
    check(
        worst <= 1e-6 && residual < 1e-12 && elapsed < Duration::from_secs(10),
        format!(
            "{} greedy-path states, max |maxQ - V*| {worst:.1e} <= 1e-6, residual {residual:.1e}, runtime {:.3}s < 10s",
            states.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn success_dynamics(out: &Path) -> Outcome {
    let mut cfg = config("shop.site", "place-order.scenario", out);
    cfg.seed = 42;
    cfg.episodes = 500;
    let (art, _) = timed(&cfg);
    let success: Vec<f64> = art
        .records
        .iter()
        .map(|r| f64::from(u8::from(r.success)))
        .collect();
    let window = 50usize;
    let lowest = (400usize..500)
        .map(|i| {
            let from = (i + 1).saturating_sub(window);
            success[from..=i].iter().sum::<f64>() / (i + 1 - from) as f64
        })
        .fold(f64::INFINITY, f64::min);
    check(
        lowest >= 0.95,
        format!("lowest window-50 success average over episodes 401..500 is {lowest:.3} >= 0.95"),
    )
}

fn exploration_completeness(out: &Path) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (site, scenario) in FIXTURES {
        let (graph, _) = load(site, scenario);
        let mut cfg = config(site, scenario, out);
        cfg.explore_until_exhausted = true;
        let (art, _) = timed(&cfg);
        let visited: BTreeSet<String> = art.coverage.iter().map(|(p, _)| p.to_string()).collect();
        let reachable = reachable_fixed_point(&graph, graph.start().as_str());
        ok &= visited == reachable;
        lines.push(format!("{site} {}/{}", visited.len(), reachable.len()));
        if site == "shop-extended.site" {
            ok &= reachable.len() == 12;
            ok &= ["clearance", "reviews"]
                .iter()
                .all(|p| visited.contains(*p));
        }
    }
    check(
        ok,
        format!(
            "visited/reachable: {}; both 12-page dead-ends visited",
            lines.join(", ")
        ),
    )
}

fn backtracking_enumeration() -> Outcome {
    let (graph, _) = load("branching.site", "branching.scenario");
    let got = enumerate_acyclic_paths(&graph);
    let want = dfs_acyclic_paths(&graph);
    check(
        got == want,
        format!(
            "{} paths enumerated, oracle has {}: {:?}",
            got.len(),
            want.len(),
            got
        ),
    )
}

fn gherkin_golden(out: &Path) -> Outcome {
    let (graph, spec) = load("shop.site", "place-order.scenario");
    let golden = fs::read_to_string(fixture("golden/place_order.feature")).unwrap();

    // hand-picked optimal route: sign in, search, add to cart, checkout, pay
    let mut page = graph.start().clone();
    let mut steps = Vec::new();
    for a in [0, 0, 0, 0, 1] {
        let edge = graph.neighbors(page.as_str()).unwrap()[a].clone();
        steps.push((page.clone(), edge.clone()));
        page = edge.target;
    }
    let traj = Trajectory {
        steps,
        final_page: page,
        total_reward: 12.75,
        success: true,
    };
    let scenario = trajectory_to_scenario(&traj, &graph, &spec).map_err(|e| e.to_string())?;
    let emitted =
        emit_feature(&spec.name, std::slice::from_ref(&scenario)).map_err(|e| e.to_string())?;

    let mut cfg = config("shop.site", "place-order.scenario", out);
    cfg.seed = 42;
    let (art, _) = timed(&cfg);
    export(&art, out).map_err(|e| e.to_string())?;
    let exported =
        fs::read_to_string(out.join("features/place_order_via_5_steps_variant_1.feature"))
            .unwrap_or_default();

    let (name, parsed) = parse_feature(&emitted).map_err(|e| e.to_string())?;
    let reparsed = name == spec.name && parsed == vec![scenario];
    check(
        emitted == golden && exported == golden && reparsed,
        format!(
            "emitted identical: {}, exported identical: {}, re-parse identical: {reparsed}",
            emitted == golden,
            exported == golden
        ),
    )
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for name in ["metrics.csv", "coverage.csv", "run.json"] {
        files.push((name.to_string(), fs::read(dir.join(name)).unwrap()));
    }
    if let Ok(entries) = fs::read_dir(dir.join("features")) {
        let mut feats: Vec<_> = entries
            .map(|e| e.unwrap().path())
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    fs::read(&p).unwrap(),
                )
            })
            .collect();
        feats.sort();
        files.extend(feats);
    }
    files
}

fn determinism(out: &Path) -> Outcome {
    let mut compared = 0;
    let mut ok = true;
    for (site, scenario, algo) in [
        ("shop.site", "place-order.scenario", Algo::QLearning),
        (
            "shop-extended.site",
            "shop-extended.scenario",
            Algo::ActorCritic,
        ),
        ("branching.site", "branching.scenario", Algo::Reinforce),
    ] {
        let mut cfg = config(site, scenario, out);
        cfg.seed = 7;
        cfg.learner.algo = algo;
        cfg.update_on_failure = webmaze::runner::default_update_on_failure(algo);
        cfg.learner.replay_batch = 4;
        let mut runs = Vec::new();
        for _ in 0..2 {
            let _ = fs::remove_dir_all(out);
            let (art, _) = timed(&cfg);
            export(&art, out).map_err(|e| e.to_string())?;
            runs.push(snapshot(out));
        }
        compared += runs[0].len();
        ok &= runs[0] == runs[1];
    }
    check(
        ok,
        format!("{compared} output files byte-identical across paired runs"),
    )
}

fn statistics() -> Outcome {
    let mut worst_t = 0.0f64;
    let mut worst_p = 0.0f64;
    for (a, b, t, p, _) in WELCH_CASES {
        let r = welch_t_test(a, b).map_err(|e| e.to_string())?;
        worst_t = worst_t.max((r.t - t).abs());
        worst_p = worst_p.max((r.p_two_sided - p).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let normal = Normal::new(5.0, 2.0).unwrap();
    let draws: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let (lo, hi) = confidence_interval(&draws, 0.95).map_err(|e| e.to_string())?;
    let limit = 1.959963984540054 * sd / n.sqrt();
    let rel = ((hi - lo) / 2.0 - limit).abs() / limit;
    check(
        worst_t <= 1e-6 && worst_p <= 1e-4 && rel <= 0.02,
        format!("welch max |dt| {worst_t:.1e} <= 1e-6, max |dp| {worst_p:.1e} <= 1e-4; CI half-width off normal limit by {:.3}% <= 2%", rel * 100.0),
    )
}

fn reward_audit(out: &Path) -> Outcome {
    let mut checked = 0;
    let mut worst = 0.0f64;
    for (site, scenario, algo) in [
        ("shop.site", "place-order.scenario", Algo::QLearning),
        (
            "shop-extended.site",
            "shop-extended.scenario",
            Algo::QLearning,
        ),
        (
            "shop-extended.site",
            "shop-extended.scenario",
            Algo::Reinforce,
        ),
        ("branching.site", "branching.scenario", Algo::ActorCritic),
    ] {
        let (graph, spec) = load(site, scenario);
        let mut cfg = config(site, scenario, out);
        cfg.learner.algo = algo;
        cfg.update_on_failure = webmaze::runner::default_update_on_failure(algo);
        let (art, _) = timed(&cfg);
        for (trace, record) in art.traces.iter().zip(&art.records) {
            let replayed = replay_total(&graph, &spec, &trace.actions);
            worst = worst
                .max((replayed - trace.total_reward()).abs())
                .max((replayed - record.total_reward).abs())
                .max((replayed - decomposed(trace, &spec)).abs());
            checked += 1;
        }
    }
    check(
        worst <= 1e-12,
        format!("{checked} logged episodes replayed, max |diff| {worst:.1e} <= 1e-12"),
    )
}

fn decomposed(trace: &EpisodeTrace, spec: &webmaze::ScenarioSpec) -> f64 {
    let cues: f64 = trace.parts.iter().map(|p| p.cue_reward).sum();
    let dead_end = trace.termination == webmaze::Termination::DeadEnd;
    -spec.step_penalty * trace.steps() as f64
        + cues
        + if trace.success() {
            spec.terminal_reward
        } else {
            0.0
        }
        - if dead_end { spec.failure_penalty } else { 0.0 }
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().unwrap();
    let out = |name: &str| tmp.path().join(name);
    let results: Vec<(&str, Outcome)> = vec![
        ("q-convergence", q_convergence(&out("q"))),
        ("value-iteration-oracle", value_iteration_oracle(&out("vi"))),
        ("success-rate-dynamics", success_dynamics(&out("sr"))),
        (
            "exploration-completeness",
            exploration_completeness(&out("ex")),
        ),
        ("backtracking-enumeration", backtracking_enumeration()),
        ("gherkin-golden", gherkin_golden(&out("gh"))),
        ("determinism", determinism(&out("det"))),
        ("statistics", statistics()),
        ("reward-decomposition", reward_audit(&out("rw"))),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
