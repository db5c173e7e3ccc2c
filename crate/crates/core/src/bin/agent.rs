use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use webmaze::learner::{Algo, EpsilonSchedule, LearnerConfig};
use webmaze::runner::{default_update_on_failure, export, run_training, RunConfig, RunError};
use webmaze::{load_site_model, parse_scenario};

#[derive(Parser)]
#[command(
    name = "agent",
    version,
    about = "Learn navigation routes through a site model and export them as Gherkin"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a site model and scenario, then export metrics and features.
    Run(RunArgs),
    /// Parse a site model (and optionally a scenario) and report reachability.
    Validate {
        #[arg(long)]
        site: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    site: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 500)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Algo::QLearning)]
    algo: Algo,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.95)]
    gamma: f64,
    #[arg(long, default_value_t = 0.01)]
    policy_lr: f64,
    #[arg(long, default_value_t = 1.0)]
    eps0: f64,
    #[arg(long, default_value_t = 0.995)]
    eps_decay: f64,
    #[arg(long, default_value_t = 0.01)]
    eps_min: f64,
    #[arg(long, default_value_t = 10_000)]
    replay_capacity: usize,
    /// Transitions replayed from memory after each step (0 = online only).
    #[arg(long, default_value_t = 0)]
    replay_batch: usize,
    #[arg(long, default_value_t = 5)]
    emit_top_k: usize,
    /// Defaults to true for q-learning and false for the policy-gradient methods.
    #[arg(long, action = clap::ArgAction::Set)]
    update_on_failure: Option<bool>,
    /// Explore uniformly until every action of every visited page was tried.
    #[arg(long)]
    explore_until_exhausted: bool,
    #[arg(long)]
    out: PathBuf,
}

impl RunArgs {
    fn into_config(self) -> RunConfig {
        RunConfig {
            site_path: self.site,
            scenario_path: self.scenario,
            episodes: self.episodes,
            seed: self.seed,
            learner: LearnerConfig {
                alpha: self.alpha,
                gamma: self.gamma,
                policy_lr: self.policy_lr,
                algo: self.algo,
                replay_capacity: self.replay_capacity,
                replay_batch: self.replay_batch,
            },
            epsilon: EpsilonSchedule {
                eps0: self.eps0,
                decay: self.eps_decay,
                eps_min: self.eps_min,
            },
            emit_top_k: self.emit_top_k,
            update_on_failure: self
                .update_on_failure
                .unwrap_or_else(|| default_update_on_failure(self.algo)),
            explore_until_exhausted: self.explore_until_exhausted,
            out_dir: self.out,
        }
    }
}

fn run(args: RunArgs) -> Result<(), RunError> {
    let config = args.into_config();
    let artifacts = run_training(&config)?;
    export(&artifacts, &config.out_dir)?;
    let s = &artifacts.summary;
    println!("episodes            {}", s.episodes);
    println!("success rate        {:.4}", s.success_rate);
    match s.best_reward {
        Some(r) => println!("best reward         {r:.6}"),
        None => println!("best reward         -"),
    }
    match s.episodes_to_first_success {
        Some(e) => println!("first success       episode {e}"),
        None => println!("first success       never"),
    }
    println!("backtracks          {}", s.total_backtracks);
    println!("pages visited       {}", s.unique_pages_visited);
    println!("defect pages found  {}", s.defect_pages_found);
    println!("scenarios exported  {}", artifacts.scenarios.len());
    println!("output              {}", config.out_dir.display());
    Ok(())
}

fn validate(site: PathBuf, scenario: Option<PathBuf>) -> ExitCode {
    let text = match std::fs::read_to_string(&site) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", site.display());
            return ExitCode::from(3);
        }
    };
    let graph = match load_site_model(&text) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: {}: {e}", site.display());
            return ExitCode::from(2);
        }
    };
    let reachable = graph
        .reachable_set(graph.start().as_str())
        .expect("start page is validated at load");
    println!("site                {}", graph.name());
    println!("pages               {}", graph.len());
    println!("actions             {}", graph.total_actions());
    println!("start               {}", graph.start());
    println!("reachable           {}", reachable.len());
    for page in graph.pages() {
        let mut notes = Vec::new();
        if !reachable.contains(&page.id) {
            notes.push("unreachable");
        }
        if page.is_dead_end() {
            notes.push("dead-end");
        }
        if page.is_terminal {
            notes.push("terminal");
        }
        if page.is_defect {
            notes.push("defect");
        }
        if !notes.is_empty() {
            println!("  {:<18} {}", page.id.as_str(), notes.join(", "));
        }
    }

    if let Some(path) = scenario {
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(3);
            }
        };
        let spec = match parse_scenario(&text) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        };
        let Ok(reachable) = graph.reachable_set(spec.start_page.as_str()) else {
            eprintln!(
                "error: {}: start page `{}` is not in the site model",
                path.display(),
                spec.start_page
            );
            return ExitCode::from(2);
        };
        let goals: Vec<&str> = graph
            .pages()
            .filter(|p| reachable.contains(&p.id) && spec.endpoint_satisfied(p))
            .map(|p| p.id.as_str())
            .collect();
        println!("scenario            {}", spec.name);
        if goals.is_empty() {
            println!("reachable endpoints none");
        } else {
            println!("reachable endpoints {}", goals.join(", "));
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run(args) => match run(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Command::Validate { site, scenario } => validate(site, scenario),
    }
}
