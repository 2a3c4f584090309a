//! Cross-product runs (map × strategy × seed) with per-group aggregates.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::episode::{run_episode, EpisodeConfig, EpisodeError, TerminalStatus};
use crate::decision::StrategyKind;
use crate::geometry::Pose;
use crate::scenario::Scenario;

/// One map setting: a scenario, optionally started from another pose.
#[derive(Clone, Debug)]
pub struct CompareCase {
    pub label: String,
    pub scenario: Scenario,
    pub start: Option<Pose>,
}

impl CompareCase {
    pub fn new(scenario: Scenario) -> Self {
        Self { label: scenario.name.clone(), scenario, start: None }
    }

    /// The primary start plus every alternative start, labeled `name@k`.
    pub fn with_starts(scenario: &Scenario) -> Vec<Self> {
        let mut out = vec![Self { label: format!("{}@0", scenario.name), scenario: scenario.clone(), start: None }];
        for (k, s) in scenario.starts.iter().enumerate() {
            out.push(Self { label: format!("{}@{}", scenario.name, k + 1), scenario: scenario.clone(), start: Some(*s) });
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRun {
    pub case: String,
    pub strategy: String,
    pub seed: u64,
    pub status: TerminalStatus,
    pub path_length: f64,
    pub sim_time: f64,
    pub decisions: usize,
    pub map_agreement: f64,
    /// Mean final cell entropy over reachable free cells, in bits.
    pub reachable_entropy: f64,
    /// `(sim_time, normalized_entropy)` per recorded step.
    #[serde(skip)]
    pub entropy: Vec<(f64, f64)>,
}

impl CompareRun {
    /// Normalized entropy of the last sample at or before `t`.
    pub fn entropy_at(&self, t: f64) -> f64 {
        let mut last = self.entropy.first().map_or(1.0, |e| e.1);
        for &(s, h) in &self.entropy {
            if s > t {
                break;
            }
            last = h;
        }
        last
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareAggregate {
    pub case: String,
    pub strategy: String,
    /// Runs that entered the statistics (stuck runs excluded).
    pub n: usize,
    pub stuck: usize,
    pub path_mean: f64,
    pub path_std: f64,
    pub time_mean: f64,
    pub time_std: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CompareReport {
    pub seeds: Vec<u64>,
    pub runs: Vec<CompareRun>,
    pub aggregates: Vec<CompareAggregate>,
}

/// Sample mean and standard deviation (n − 1 denominator; 0 for n < 2).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Runs every (case, strategy, seed) combination. Results are ordered by
/// case, then strategy, then seed regardless of `parallel`.
pub fn compare(
    cases: &[CompareCase],
    strategies: &[StrategyKind],
    seeds: &[u64],
    parallel: bool,
) -> Result<CompareReport, EpisodeError> {
    compare_with(cases, strategies, seeds, parallel, |case, strategy, seed| {
        let mut cfg = EpisodeConfig::for_scenario(&case.scenario, strategy, seed);
        cfg.start = case.start;
        cfg
    })
}

/// As [`compare`], with a caller-supplied configuration per run.
pub fn compare_with<F>(
    cases: &[CompareCase],
    strategies: &[StrategyKind],
    seeds: &[u64],
    parallel: bool,
    configure: F,
) -> Result<CompareReport, EpisodeError>
where
    F: Fn(&CompareCase, StrategyKind, u64) -> EpisodeConfig + Sync,
{
    if seeds.len() < 2 {
        return Err(EpisodeError::Config(format!("compare needs at least 2 seeds, got {}", seeds.len())));
    }
    let jobs: Vec<(&CompareCase, StrategyKind, u64)> = cases
        .iter()
        .flat_map(|c| strategies.iter().flat_map(move |&s| seeds.iter().map(move |&seed| (c, s, seed))))
        .collect();
    let run = |&(case, strategy, seed): &(&CompareCase, StrategyKind, u64)| {
        let cfg = configure(case, strategy, seed);
        let out = run_episode(&case.scenario, &cfg)?;
        Ok(CompareRun {
            case: case.label.clone(),
            strategy: strategy.to_string(),
            seed,
            status: out.metrics.status,
            path_length: out.metrics.total_path_length,
            sim_time: out.metrics.total_sim_time,
            decisions: out.metrics.decisions.len(),
            map_agreement: out.map_agreement(),
            reachable_entropy: out.reachable_entropy_per_cell(),
            entropy: out.metrics.rows.iter().map(|r| (r.sim_time, r.normalized_entropy)).collect(),
        })
    };
    let runs: Vec<CompareRun> = if parallel {
        jobs.par_iter().map(run).collect::<Result<_, EpisodeError>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_, EpisodeError>>()?
    };

    let mut aggregates = Vec::new();
    for group in runs.chunk_by(|a, b| a.case == b.case && a.strategy == b.strategy) {
        let ok: Vec<&CompareRun> = group.iter().filter(|r| r.status != TerminalStatus::Stuck).collect();
        let (path_mean, path_std) = mean_std(&ok.iter().map(|r| r.path_length).collect::<Vec<_>>());
        let (time_mean, time_std) = mean_std(&ok.iter().map(|r| r.sim_time).collect::<Vec<_>>());
        aggregates.push(CompareAggregate {
            case: group[0].case.clone(),
            strategy: group[0].strategy.clone(),
            n: ok.len(),
            stuck: group.len() - ok.len(),
            path_mean,
            path_std,
            time_mean,
            time_std,
        });
    }
    Ok(CompareReport { seeds: seeds.to_vec(), runs, aggregates })
}

impl CompareReport {
    pub fn aggregate(&self, case: &str, strategy: &str) -> Option<&CompareAggregate> {
        self.aggregates.iter().find(|a| a.case == case && a.strategy == strategy)
    }

    pub fn runs_of<'a>(&'a self, case: &'a str, strategy: &'a str) -> impl Iterator<Item = &'a CompareRun> + 'a {
        self.runs.iter().filter(move |r| r.case == case && r.strategy == strategy)
    }

    /// Per-seed rows; stuck runs carry `flag = excluded`.
    pub fn runs_csv(&self) -> String {
        let mut out = String::from("case,strategy,seed,status,path_length,sim_time,decisions,map_agreement,reachable_entropy,flag\n");
        for r in &self.runs {
            let flag = if r.status == TerminalStatus::Stuck { "excluded" } else { "" };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.case,
                csv_field(&r.strategy),
                r.seed,
                r.status.as_str(),
                r.path_length,
                r.sim_time,
                r.decisions,
                r.map_agreement,
                r.reachable_entropy,
                flag
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("case,strategy,n,stuck,path_mean,path_std,time_mean,time_std\n");
        for a in &self.aggregates {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                a.case,
                csv_field(&a.strategy),
                a.n,
                a.stuck,
                a.path_mean,
                a.path_std,
                a.time_mean,
                a.time_std
            );
        }
        out
    }

    /// Long-format entropy curves: `case,strategy,seed,sim_time,normalized_entropy`.
    pub fn entropy_csv(&self) -> String {
        let mut out = String::from("case,strategy,seed,sim_time,normalized_entropy\n");
        for r in &self.runs {
            for &(t, h) in &r.entropy {
                let _ = writeln!(out, "{},{},{},{t},{h}", r.case, csv_field(&r.strategy), r.seed);
            }
        }
        out
    }

    pub fn write_to(&self, dir: &std::path::Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("runs.csv"), self.runs_csv())?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv())?;
        std::fs::write(dir.join("entropy.csv"), self.entropy_csv())?;
        Ok(())
    }
}

/// Quotes fields containing commas, e.g. `combined(1,0.5)`.
fn csv_field(s: &str) -> String {
    if s.contains(',') {
        format!("\"{s}\"")
    } else {
        s.to_string()
    }
}
