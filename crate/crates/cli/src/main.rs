use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use srm_core::decision::StrategyKind;
use srm_core::harness::bench::PlannerBenchConfig;
use srm_core::harness::{
    benchmark_frontier, benchmark_planner, compare, emit_plots, run_episode, CompareCase, EpisodeConfig,
    TerminalStatus,
};
use srm_core::scenario::Scenario;

#[derive(Parser)]
#[command(name = "srm-explore", version, about = "Semantic road map exploration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one exploration episode.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// srm | nearest | maxent | combined | combined(g1,g2)
        #[arg(long, default_value = "srm")]
        strategy: String,
        /// Defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        gamma1: Option<f64>,
        #[arg(long)]
        gamma2: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every scenario × strategy × seed combination and aggregate.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        scenarios: Vec<PathBuf>,
        /// Comma-separated, e.g. `srm,nearest,maxent,combined(1,0.5)`.
        #[arg(long, default_value = "srm,nearest,maxent")]
        strategies: String,
        /// Inclusive range `A..B` or a single seed list `1,2,3`.
        #[arg(long, default_value = "1..10")]
        seeds: String,
        /// Also run from each scenario's alternative start poses.
        #[arg(long)]
        all_starts: bool,
        /// Run episodes one after another instead of in parallel.
        #[arg(long)]
        sequential: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay an episode with and without detection pruning and against the
    /// full raster sweep.
    BenchFrontier {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time roadmap A* against RRT* on fully explored maps.
    BenchPlanner {
        #[arg(long, num_args = 1.., required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        queries: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render SVG plots from a run, compare or benchmark output directory.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Exit status plus message.
struct Failure(u8, String);

fn usage(msg: impl Into<String>) -> Failure {
    Failure(1, msg.into())
}

fn runtime(msg: impl Into<String>) -> Failure {
    Failure(2, msg.into())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn execute(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Run { scenario, strategy, seed, gamma1, gamma2, out } => {
            let sc = load(&scenario)?;
            let mut kind = parse_strategy(&strategy)?;
            if let StrategyKind::Combined { gamma1: g1, gamma2: g2 } = &mut kind {
                *g1 = gamma1.unwrap_or(*g1);
                *g2 = gamma2.unwrap_or(*g2);
                kind.validate().map_err(|e| usage(e.to_string()))?;
            }
            let cfg = EpisodeConfig::for_scenario(&sc, kind, seed.unwrap_or(sc.seed));
            let t0 = std::time::Instant::now();
            let outcome = run_episode(&sc, &cfg).map_err(|e| runtime(e.to_string()))?;
            let s = outcome.summary(&sc.name, &cfg);
            println!(
                "{} {} seed={} status={} path={:.2}m time={:.1}s decisions={} nodes={} agreement={:.4} wall={:.1}s",
                s.scenario,
                s.strategy,
                s.seed,
                s.status.as_str(),
                s.total_path_length,
                s.total_sim_time,
                s.decisions,
                s.srm_nodes,
                s.map_agreement,
                t0.elapsed().as_secs_f64()
            );
            if let Some(dir) = out {
                outcome.write_to(&dir, &sc.name, &cfg).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
            }
            Ok(if outcome.metrics.status == TerminalStatus::Stuck { 3 } else { 0 })
        }
        Command::Compare { scenarios, strategies, seeds, all_starts, sequential, out } => {
            let strategies = split_top_level(&strategies)
                .iter()
                .map(|s| parse_strategy(s))
                .collect::<Result<Vec<_>, _>>()?;
            let seeds = parse_seeds(&seeds)?;
            let mut cases = Vec::new();
            for path in &scenarios {
                let sc = load(path)?;
                if all_starts {
                    cases.extend(CompareCase::with_starts(&sc));
                } else {
                    cases.push(CompareCase::new(sc));
                }
            }
            let report = compare(&cases, &strategies, &seeds, !sequential).map_err(|e| match e {
                srm_core::harness::EpisodeError::Config(m) => usage(m),
                other => runtime(other.to_string()),
            })?;
            report.write_to(&out).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
            for a in &report.aggregates {
                println!(
                    "{} {} n={} stuck={} path={:.2}±{:.2}m time={:.1}±{:.1}s",
                    a.case, a.strategy, a.n, a.stuck, a.path_mean, a.path_std, a.time_mean, a.time_std
                );
            }
            let stuck = report.aggregates.iter().any(|a| a.stuck > 0);
            Ok(if stuck { 3 } else { 0 })
        }
        Command::BenchFrontier { scenario, seed, out } => {
            let sc = load(&scenario)?;
            let cfg = EpisodeConfig::for_scenario(&sc, StrategyKind::Srm, seed.unwrap_or(sc.seed));
            let bench = benchmark_frontier(&sc, &cfg).map_err(|e| runtime(e.to_string()))?;
            write(&out, "frontier_bench.csv", &bench.csv())?;
            let n = bench.rows.len();
            let tail = &bench.rows[n - n / 3..];
            let (p, u): (u64, u64) =
                tail.iter().fold((0, 0), |(p, u), r| (p + r.ops_pruned, u + r.ops_unpruned));
            let partial: usize = bench.rows.iter().map(|r| r.partial_clusters).sum();
            println!(
                "{} steps={n} final-third ops pruned/unpruned={:.3} partial_clusters={partial}",
                sc.name,
                p as f64 / u.max(1) as f64
            );
            Ok(0)
        }
        Command::BenchPlanner { scenarios, seed, queries, out } => {
            let scs = scenarios.iter().map(|p| load(p)).collect::<Result<Vec<_>, _>>()?;
            let cfg = PlannerBenchConfig { seed, queries, ..Default::default() };
            let bench = benchmark_planner(&scs, &cfg).map_err(|e| runtime(e.to_string()))?;
            write(&out, "planner_bench.csv", &bench.csv())?;
            for sc in &scs {
                if let Some(s) = bench.summary(&sc.name) {
                    println!(
                        "{} nodes={} astar_median={:.1}us rrt_median={:.1}us ratio={:.1} rrt_success={}/{}",
                        sc.name,
                        s.srm_nodes,
                        s.srm_median_us,
                        s.rrt_median_us,
                        s.ratio(),
                        s.rrt_success,
                        s.queries
                    );
                }
            }
            Ok(0)
        }
        Command::Plot { input, out } => {
            let files = emit_plots(&input, &out).map_err(|e| usage(e.to_string()))?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(0)
        }
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Scenario::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn parse_strategy(s: &str) -> Result<StrategyKind, Failure> {
    s.parse().map_err(|e: srm_core::decision::DecisionError| usage(e.to_string()))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(dir.join(name), text))
        .map_err(|e| runtime(format!("{}: {e}", dir.display())))
}

/// Splits on commas that are not inside parentheses.
fn split_top_level(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut depth = 0i32;
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    out.push(cur);
    out.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Failure> {
    let bad = || usage(format!("invalid seed list '{s}' (expected A..B or a,b,c)"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect()
}
