//! Frontier-detection and path-query benchmarks.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::index::sample;
use serde::Serialize;

use super::episode::{run_episode, run_episode_observed, EpisodeConfig, EpisodeError};
use crate::decision::StrategyKind;
use crate::frontier::{cluster_cells, detect_frontiers, oracle_full_scan, FrontierConfig};
use crate::geometry::{Cell, Pose};
use crate::rng::substream;
use crate::rrt::{timing_probe, ProbePlanner, RrtConfig, TimingRecord};
use crate::scenario::Scenario;

/// One episode step replayed through three detectors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrontierBenchRow {
    pub step: usize,
    pub sim_time: f64,
    pub ops_pruned: u64,
    pub ops_unpruned: u64,
    /// Cells inspected by the full raster sweep.
    pub ops_oracle: u64,
    pub nodes_pruned: u64,
    pub nodes_unpruned: u64,
    pub us_pruned: f64,
    pub us_unpruned: f64,
    pub us_oracle: f64,
    pub detected_cells: usize,
    pub oracle_cells: usize,
    /// Detected cells that are not frontier cells.
    pub unsound: usize,
    /// Oracle clusters touched by detection but not fully recovered.
    pub partial_clusters: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FrontierBench {
    pub rows: Vec<FrontierBenchRow>,
}

impl FrontierBench {
    pub fn csv(&self) -> String {
        let mut out = String::from(
            "step,sim_time,ops_pruned,ops_unpruned,ops_oracle,nodes_pruned,nodes_unpruned,us_pruned,us_unpruned,us_oracle,detected_cells,oracle_cells,unsound,partial_clusters\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{:.1},{:.1},{:.1},{},{},{},{}",
                r.step,
                r.sim_time,
                r.ops_pruned,
                r.ops_unpruned,
                r.ops_oracle,
                r.nodes_pruned,
                r.nodes_unpruned,
                r.us_pruned,
                r.us_unpruned,
                r.us_oracle,
                r.detected_cells,
                r.oracle_cells,
                r.unsound,
                r.partial_clusters
            );
        }
        out
    }
}

/// Detected cells that fail the frontier test, and oracle clusters that
/// detection touched without recovering completely.
pub fn check_detection(grid: &crate::occupancy::OccupancyGrid, detected: &BTreeSet<Cell>) -> (usize, usize, usize) {
    let oracle = oracle_full_scan(grid);
    let oracle_set: BTreeSet<Cell> = oracle.iter().copied().collect();
    let unsound = detected.iter().filter(|c| !oracle_set.contains(c)).count();
    let partial = cluster_cells(grid, &oracle)
        .iter()
        .filter(|cl| {
            let hit = cl.iter().filter(|c| detected.contains(c)).count();
            hit > 0 && hit < cl.len()
        })
        .count();
    (unsound, partial, oracle.len())
}

/// Replays one episode and, after every step's detection, reruns detection
/// with pruning disabled on a copy of the state and sweeps the raster.
/// Fails on the first unsound detection.
pub fn benchmark_frontier(scenario: &Scenario, cfg: &EpisodeConfig) -> Result<FrontierBench, EpisodeError> {
    let mut rows = Vec::new();
    let mut violation: Option<String> = None;
    let unpruned_cfg = FrontierConfig { pruning: false, ..cfg.frontier };
    let label_of = |p: &Pose| scenario.world.semantic_label_at(p);
    run_episode_observed(scenario, cfg, |v| {
        let mut graph = v.graph.clone();
        let mut index = v.index.clone();
        let clock = Instant::now();
        let unpruned = detect_frontiers(v.grid, &mut graph, &mut index, &unpruned_cfg, label_of);
        let us_unpruned = clock.elapsed().as_secs_f64() * 1e6;

        let clock = Instant::now();
        let oracle = oracle_full_scan(v.grid);
        let us_oracle = clock.elapsed().as_secs_f64() * 1e6;

        let detected = v.index.frontier_cells();
        let (unsound, partial_clusters, oracle_cells) = check_detection(v.grid, &detected);
        debug_assert_eq!(oracle_cells, oracle.len());
        if unsound > 0 && violation.is_none() {
            violation = Some(format!("step {}: {unsound} detected cells are not frontier cells", v.step));
        }
        rows.push(FrontierBenchRow {
            step: v.step,
            sim_time: v.sim_time,
            ops_pruned: v.detection.ops(),
            ops_unpruned: unpruned.ops(),
            ops_oracle: v.grid.spec().len() as u64,
            nodes_pruned: v.detection.raycast_nodes,
            nodes_unpruned: unpruned.raycast_nodes,
            us_pruned: v.detection_us,
            us_unpruned,
            us_oracle,
            detected_cells: detected.len(),
            oracle_cells,
            unsound,
            partial_clusters,
        });
    })?;
    match violation {
        Some(msg) => Err(EpisodeError::Invariant { sim_time: f64::NAN, msg, dump: String::new() }),
        None => Ok(FrontierBench { rows }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlannerBenchRow {
    pub scenario: String,
    pub planner: String,
    pub srm_nodes: usize,
    pub record: TimingRecord,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PlannerBench {
    pub rows: Vec<PlannerBenchRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PlannerSummary {
    pub srm_median_us: f64,
    pub rrt_median_us: f64,
    pub srm_nodes: usize,
    pub rrt_success: usize,
    pub queries: usize,
}

impl PlannerSummary {
    pub fn ratio(&self) -> f64 {
        self.rrt_median_us / self.srm_median_us
    }
}

pub fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

impl PlannerBench {
    pub fn csv(&self) -> String {
        let mut out = String::from(
            "scenario,planner,srm_nodes,query_id,elapsed_us,first_solution_us,collision_checks,nodes_expanded,success,path_length\n",
        );
        for r in &self.rows {
            let t = &r.record;
            let _ = writeln!(
                out,
                "{},{},{},{},{:.1},{},{},{},{},{}",
                r.scenario,
                r.planner,
                r.srm_nodes,
                t.query_id,
                t.elapsed_us,
                t.first_solution_us.map_or(String::new(), |v| format!("{v:.1}")),
                t.collision_checks,
                t.nodes_expanded,
                t.success,
                t.path_length.map_or(String::new(), |v| v.to_string())
            );
        }
        out
    }

    pub fn summary(&self, scenario: &str) -> Option<PlannerSummary> {
        let of = |p: &'static str| self.rows.iter().filter(move |r| r.scenario == scenario && r.planner == p);
        let mut srm: Vec<f64> = of("srm-astar").map(|r| r.record.elapsed_us).collect();
        let mut rrt: Vec<f64> = of("rrt-star").map(|r| r.record.elapsed_us).collect();
        if srm.is_empty() || rrt.is_empty() {
            return None;
        }
        Some(PlannerSummary {
            srm_median_us: median(&mut srm),
            rrt_median_us: median(&mut rrt),
            srm_nodes: of("srm-astar").next().map_or(0, |r| r.srm_nodes),
            rrt_success: of("rrt-star").filter(|r| r.record.success).count(),
            queries: rrt.len(),
        })
    }
}

/// Settings of one planner benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PlannerBenchConfig {
    pub seed: u64,
    pub queries: usize,
    /// Strategy of the episode that builds the roadmap and map.
    pub builder: StrategyKind,
    pub rrt_samples: usize,
}

impl Default for PlannerBenchConfig {
    fn default() -> Self {
        Self { seed: 1, queries: 50, builder: StrategyKind::NearestFrontier, rrt_samples: 5000 }
    }
}

/// Explores each map to the end, freezes roadmap and map, then times the
/// same random node-to-node queries on roadmap A* and on RRT*.
pub fn benchmark_planner(scenarios: &[Scenario], bench: &PlannerBenchConfig) -> Result<PlannerBench, EpisodeError> {
    let mut rows = Vec::new();
    for scenario in scenarios {
        let cfg = EpisodeConfig::for_scenario(scenario, bench.builder, bench.seed);
        let out = run_episode(scenario, &cfg)?;
        let graph = &out.graph;
        let n = graph.len();
        if n < 2 {
            return Err(EpisodeError::Config(format!("{}: roadmap has fewer than 2 nodes", scenario.name)));
        }
        let mut rng = substream(bench.seed, "planner-queries", &[]);
        let queries: Vec<(Pose, Pose)> = (0..bench.queries)
            .map(|_| {
                let pair = sample(&mut rng, n, 2);
                (graph.position(pair.index(0)), graph.position(pair.index(1)))
            })
            .collect();
        let rrt_cfg = RrtConfig { max_samples: bench.rrt_samples, r_robot: cfg.srm.r_robot, ..Default::default() };
        let planners =
            [ProbePlanner::SrmAstar(graph), ProbePlanner::RrtStar { grid: &out.grid, cfg: rrt_cfg, seed: bench.seed }];
        for planner in &planners {
            for record in timing_probe(planner, &queries) {
                rows.push(PlannerBenchRow {
                    scenario: scenario.name.clone(),
                    planner: planner.name().to_string(),
                    srm_nodes: n,
                    record,
                });
            }
        }
    }
    Ok(PlannerBench { rows })
}
