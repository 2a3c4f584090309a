//! The sense → map → roadmap → frontier → decide → move loop.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ce_planner::{ce_optimize, CEConfig, CeIteration};
use crate::decision::{
    select_nbt_combined, select_nbt_max_entropy, select_nbt_nearest_frontier, select_nbt_srm, DecisionCase,
    DecisionEvent, PlanningContext, StrategyKind, TargetCandidate,
};
use crate::frontier::{attributed_cells, cluster_cells, detect_frontiers, is_frontier, oracle_full_scan, reopen_nodes};
use crate::frontier::{DetectionStats, FrontierConfig, FrontierIndex};
use crate::geometry::{Cell, Pose};
use crate::occupancy::{CellState, OccupancyGrid, OccupancyParams};
use crate::rng::{derive_seed, substream};
use crate::rrt::{rrt_star_tree, RrtConfig};
use crate::scenario::Scenario;
use crate::srm::{check_edge_validity, NodeId, SparsePath, SrmConfig, SrmGraph};
use crate::trajectory::Trajectory;
use crate::world::{step_motion, SensorParams, WorldModel};

/// Consecutive failed selections before an episode is declared stuck.
pub const STUCK_LIMIT: usize = 3;

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("invalid episode configuration: {0}")]
    Config(String),
    #[error("runtime invariant violated at t={sim_time}: {msg}\n{dump}")]
    Invariant { sim_time: f64, msg: String, dump: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub speed: f64,
    pub dt: f64,
    pub max_sim_time: f64,
    /// Overrides the scenario's start pose.
    pub start: Option<Pose>,
    pub sensor: SensorParams,
    /// Sensor model used when scoring trajectories; fewer beams than the
    /// real sensor keeps the optimizer cheap.
    pub info_sensor: SensorParams,
    pub occupancy: OccupancyParams,
    pub srm: SrmConfig,
    pub frontier: FrontierConfig,
    pub ce: CEConfig,
    /// Per-decision tree budget for the combined baseline.
    pub rrt: RrtConfig,
}

impl EpisodeConfig {
    /// Library defaults with the scenario's sensor, seed and overrides.
    pub fn for_scenario(scenario: &Scenario, strategy: StrategyKind, seed: u64) -> Self {
        let p = &scenario.params;
        let mut srm = SrmConfig::default();
        if let Some(v) = p.min_edge_len {
            srm.min_edge_len = v;
        }
        if let Some(v) = p.r_robot {
            srm.r_robot = v;
        }
        let mut frontier = FrontierConfig { raycast_radius: scenario.sensor.max_range, ..Default::default() };
        if let Some(v) = p.raycast_radius {
            frontier.raycast_radius = v;
        }
        let info_sensor = SensorParams::full_circle(
            p.info_beams.unwrap_or(scenario.sensor.beam_count),
            scenario.sensor.max_range,
        );
        Self {
            strategy,
            seed,
            speed: p.speed.unwrap_or(0.3),
            dt: p.dt.unwrap_or(0.5),
            max_sim_time: p.max_sim_time.unwrap_or(1800.0),
            start: None,
            sensor: scenario.sensor,
            info_sensor,
            occupancy: OccupancyParams::default(),
            srm,
            frontier,
            ce: CEConfig::default(),
            rrt: RrtConfig { max_samples: 1500, r_robot: srm.r_robot, ..Default::default() },
        }
    }

    pub fn validate(&self) -> Result<(), EpisodeError> {
        let bad = |m: String| Err(EpisodeError::Config(m));
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.max_sim_time >= 0.0) {
            return bad(format!("max_sim_time must be non-negative, got {}", self.max_sim_time));
        }
        if !(self.speed > 0.0) {
            return bad(format!("speed must be positive, got {}", self.speed));
        }
        self.strategy.validate().map_err(|e| EpisodeError::Config(e.to_string()))?;
        self.ce.validate().map_err(EpisodeError::Config)?;
        self.occupancy.validate().map_err(|e| EpisodeError::Config(e.to_string()))?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalStatus {
    Complete,
    Timeout,
    Stuck,
}

impl TerminalStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminalStatus::Complete => "complete",
            TerminalStatus::Timeout => "timeout",
            TerminalStatus::Stuck => "stuck",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub sim_time: f64,
    pub map_entropy_bits: f64,
    pub normalized_entropy: f64,
    pub traveled_length_m: f64,
    pub frontier_cells: usize,
    pub srm_nodes: usize,
    pub closed_nodes: usize,
    pub detection_op_count: u64,
}

pub const METRICS_HEADER: &str = "sim_time,map_entropy_bits,normalized_entropy,traveled_length_m,frontier_cells,srm_nodes,closed_nodes,detection_op_count";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub rows: Vec<MetricsRow>,
    pub decisions: Vec<DecisionEvent>,
    pub status: TerminalStatus,
    pub total_path_length: f64,
    pub total_sim_time: f64,
    /// Robot pose at the end of every step, starting with the initial pose.
    pub poses: Vec<Pose>,
    /// Optimizer traces, tagged with the index of the decision they served.
    pub ce_traces: Vec<(usize, Vec<CeIteration>)>,
}

impl EpisodeMetrics {
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.sim_time,
                r.map_entropy_bits,
                r.normalized_entropy,
                r.traveled_length_m,
                r.frontier_cells,
                r.srm_nodes,
                r.closed_nodes,
                r.detection_op_count
            );
        }
        out
    }

    pub fn decisions_jsonl(&self) -> String {
        crate::decision::decision_log_jsonl(&self.decisions)
    }

    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("step,x,y\n");
        for (i, p) in self.poses.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{}", p.x, p.y);
        }
        out
    }

    pub fn ce_trace_csv(&self) -> String {
        let mut out = String::from("decision,iteration,best_reward,quantile,max_std,feasible_samples\n");
        for (d, trace) in &self.ce_traces {
            for t in trace {
                let _ = writeln!(
                    out,
                    "{d},{},{},{},{},{}",
                    t.iteration, t.best_reward, t.quantile, t.max_std, t.feasible_samples
                );
            }
        }
        out
    }

    /// Normalized entropy of the last row recorded at or before `t`.
    pub fn normalized_entropy_at(&self, t: f64) -> f64 {
        let mut last = self.rows.first().map_or(1.0, |r| r.normalized_entropy);
        for r in &self.rows {
            if r.sim_time > t {
                break;
            }
            last = r.normalized_entropy;
        }
        last
    }
}

/// Everything an episode leaves behind.
#[derive(Clone, Debug)]
pub struct EpisodeOutcome {
    pub metrics: EpisodeMetrics,
    pub grid: OccupancyGrid,
    pub graph: SrmGraph,
    pub index: FrontierIndex,
    pub world: WorldModel,
}

impl EpisodeOutcome {
    /// Share of ground-truth reachable free cells whose thresholded state is Free.
    pub fn map_agreement(&self) -> f64 {
        let reach = self.world.reachable_free_cells();
        let total = reach.iter().filter(|&&r| r).count();
        if total == 0 {
            return 1.0;
        }
        let ok = reach
            .iter()
            .enumerate()
            .filter(|&(i, &r)| r && self.grid.state_at_index(i) == CellState::Free)
            .count();
        ok as f64 / total as f64
    }

    /// Mean cell entropy over ground-truth reachable free cells.
    pub fn reachable_entropy_per_cell(&self) -> f64 {
        let reach = self.world.reachable_free_cells();
        let (sum, n) = reach
            .iter()
            .enumerate()
            .filter(|&(_, &r)| r)
            .fold((0.0, 0usize), |(s, n), (i, _)| (s + self.grid.cell_entropy_at(i), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

/// Read-only view handed to step observers after detection.
pub struct StepView<'a> {
    pub step: usize,
    pub sim_time: f64,
    pub grid: &'a OccupancyGrid,
    pub graph: &'a SrmGraph,
    pub index: &'a FrontierIndex,
    pub detection: DetectionStats,
    pub detection_us: f64,
}

struct Plan {
    target: NodeId,
    trajectory: Trajectory,
    /// Frontier cells the target was chosen for; once none remains a
    /// frontier the plan has served its purpose.
    witness: Vec<Cell>,
}

pub fn run_episode(scenario: &Scenario, cfg: &EpisodeConfig) -> Result<EpisodeOutcome, EpisodeError> {
    run_episode_observed(scenario, cfg, |_| {})
}

pub fn run_episode_observed(
    scenario: &Scenario,
    cfg: &EpisodeConfig,
    mut observe: impl FnMut(&StepView<'_>),
) -> Result<EpisodeOutcome, EpisodeError> {
    cfg.validate()?;
    let world = match cfg.start {
        Some(s) => scenario.world.with_start(s).map_err(|e| EpisodeError::Config(e.to_string()))?,
        None => scenario.world.clone(),
    };
    let spec = *world.spec();
    let label_of = |p: &Pose| world.semantic_label_at(p);
    let mut grid = OccupancyGrid::new(spec, cfg.occupancy).map_err(|e| EpisodeError::Config(e.to_string()))?;
    let mut pose = world.start_pose;
    let mut graph = SrmGraph::new(pose, label_of(&pose));
    let mut index = FrontierIndex::new(cfg.frontier.raycast_radius);
    let mut growth_rng = substream(cfg.seed, "srm-growth", &[]);
    let cells = spec.len() as f64;

    let mut metrics = EpisodeMetrics {
        rows: Vec::new(),
        decisions: Vec::new(),
        status: TerminalStatus::Timeout,
        total_path_length: 0.0,
        total_sim_time: 0.0,
        poses: vec![pose],
        ce_traces: Vec::new(),
    };
    let h0 = grid.map_entropy();
    metrics.rows.push(MetricsRow {
        sim_time: 0.0,
        map_entropy_bits: h0,
        normalized_entropy: h0 / cells,
        traveled_length_m: 0.0,
        frontier_cells: 0,
        srm_nodes: graph.len(),
        closed_nodes: 0,
        detection_op_count: 0,
    });

    let mut t = 0.0;
    let mut traveled = 0.0;
    let mut plan: Option<Plan> = None;
    let mut failures = 0usize;
    let mut step = 0usize;

    while t < cfg.max_sim_time - 1e-9 {
        let invariant = |msg: String, grid: &OccupancyGrid| EpisodeError::Invariant {
            sim_time: t,
            msg,
            dump: state_dump(grid, &pose),
        };
        let scan = world.simulate_scan(&pose, &cfg.sensor).map_err(|e| invariant(e.to_string(), &grid))?;
        let changed = grid.integrate_scan(&scan).map_err(|e| invariant(e.to_string(), &grid))?;
        graph.grow_from_scan(&scan, &grid, &cfg.srm, &mut growth_rng, label_of);
        if cfg.frontier.reopen {
            reopen_nodes(&mut index, &graph, &grid, &changed);
        }
        // nodes placed next to walls that were unknown at insertion time
        for n in graph.nodes() {
            if !index.retired.contains(&n.id) && !check_edge_validity(&grid, &n.position, &n.position, cfg.srm.r_robot) {
                index.retire(n.id);
            }
        }
        let clock = std::time::Instant::now();
        let mut detection = detect_frontiers(&grid, &mut graph, &mut index, &cfg.frontier, label_of);
        let detection_us = clock.elapsed().as_secs_f64() * 1e6;
        observe(&StepView { step, sim_time: t, grid: &grid, graph: &graph, index: &index, detection, detection_us });

        // does the current plan still stand?
        if let Some(p) = &plan {
            let reached = p.trajectory.length() < 1e-9;
            let served = !p.witness.iter().any(|&c| is_frontier(&grid, c));
            let exhausted = graph.node(p.target).is_none_or(|n| n.info_gain == 0);
            let blocked = !p
                .trajectory
                .waypoints()
                .windows(2)
                .all(|w| check_edge_validity(&grid, &w[0], &w[1], cfg.srm.r_robot));
            if reached && (!exhausted || !served) {
                // the view from the target did not resolve its frontier
                index.retire(p.target);
                detection = merge(detection, detect_frontiers(&grid, &mut graph, &mut index, &cfg.frontier, label_of));
            }
            // a cluster target is done once its cells are seen, a node target
            // once the node has nothing left to offer
            let invalid = match cfg.strategy {
                StrategyKind::NearestFrontier => served,
                _ => exhausted,
            };
            if reached || invalid || blocked {
                plan = None;
            }
        }

        if plan.is_none() {
            match decide(&world, &grid, &mut graph, &mut index, &pose, cfg, metrics.decisions.len(), t, &mut detection) {
                Decision::Go(p, event, trace) => {
                    if let Some(trace) = trace {
                        metrics.ce_traces.push((metrics.decisions.len(), trace));
                    }
                    metrics.decisions.push(event);
                    failures = 0;
                    plan = Some(p);
                }
                Decision::Complete => {
                    metrics.status = TerminalStatus::Complete;
                    t += cfg.dt;
                    push_row(&mut metrics, &grid, &graph, &index, t, traveled, detection, cells);
                    break;
                }
                Decision::Failed => {
                    failures += 1;
                    if failures >= STUCK_LIMIT {
                        metrics.status = TerminalStatus::Stuck;
                        t += cfg.dt;
                        push_row(&mut metrics, &grid, &graph, &index, t, traveled, detection, cells);
                        break;
                    }
                }
            }
        }

        if let Some(p) = &mut plan {
            let before = p.trajectory.length();
            let next = step_motion(&pose, &p.trajectory, cfg.speed, cfg.dt).map_err(|e| invariant(e.to_string(), &grid))?;
            let s = p.trajectory.project(&next);
            let rest = Trajectory::new(p.trajectory.remaining_from(s)).expect("finite poses");
            if !world.is_free_pose(&next) {
                return Err(invariant(format!("motion entered solid space at ({:.3}, {:.3})", next.x, next.y), &grid));
            }
            traveled += before - rest.length();
            p.trajectory = rest;
            pose = next;
        }
        t += cfg.dt;
        step += 1;
        metrics.poses.push(pose);
        push_row(&mut metrics, &grid, &graph, &index, t, traveled, detection, cells);
    }

    metrics.total_path_length = traveled;
    metrics.total_sim_time = t;
    Ok(EpisodeOutcome { metrics, grid, graph, index, world })
}

fn merge(a: DetectionStats, b: DetectionStats) -> DetectionStats {
    DetectionStats {
        raycast_nodes: a.raycast_nodes + b.raycast_nodes,
        ray_cells: a.ray_cells + b.ray_cells,
        flood_checks: a.flood_checks + b.flood_checks,
    }
}

#[allow(clippy::too_many_arguments)]
fn push_row(
    metrics: &mut EpisodeMetrics,
    grid: &OccupancyGrid,
    graph: &SrmGraph,
    index: &FrontierIndex,
    t: f64,
    traveled: f64,
    detection: DetectionStats,
    cells: f64,
) {
    let h = grid.map_entropy();
    metrics.rows.push(MetricsRow {
        sim_time: t,
        map_entropy_bits: h,
        normalized_entropy: (h / cells).clamp(0.0, 1.0),
        traveled_length_m: traveled,
        frontier_cells: index.cell_count(),
        srm_nodes: graph.len(),
        closed_nodes: index.closed_nodes.len(),
        detection_op_count: detection.ops(),
    });
}

fn state_dump(grid: &OccupancyGrid, pose: &Pose) -> String {
    format!("robot at ({:.3}, {:.3})\n{}", pose.x, pose.y, grid.to_pgm())
}

enum Decision {
    Go(Plan, DecisionEvent, Option<Vec<CeIteration>>),
    Complete,
    Failed,
}

/// RRT* trees tried per combined-baseline decision, each with four times the
/// samples of the previous one.
const RRT_ATTEMPTS: u64 = 3;

#[allow(clippy::too_many_arguments)]
fn decide(
    world: &WorldModel,
    grid: &OccupancyGrid,
    graph: &mut SrmGraph,
    index: &mut FrontierIndex,
    pose: &Pose,
    cfg: &EpisodeConfig,
    decision_no: usize,
    t: f64,
    detection: &mut DetectionStats,
) -> Decision {
    let label_of = |p: &Pose| world.semantic_label_at(p);
    let r_robot = cfg.srm.r_robot;
    let bridges = graph.reconnect(grid, r_robot);
    if log::log_enabled!(log::Level::Debug) {
        let cut = graph.component_of(graph.root()).iter().filter(|&&r| !r).count();
        log::debug!("t={t}: {bridges} bridges added, {cut} nodes cut off from the root");
    }
    let Some(from) = graph.nearest_visible_node(pose, grid, r_robot) else {
        log::debug!("t={t}: no roadmap node visible from the robot");
        return Decision::Failed;
    };
    let mut cands = valid_candidates(graph, grid, from, r_robot);
    let has_targets = |cands: &[TargetCandidate], index: &FrontierIndex| match cfg.strategy {
        StrategyKind::NearestFrontier => index.clusters.iter().any(|c| c.len() >= cfg.frontier.min_cluster_cells),
        _ => !cands.is_empty(),
    };
    if !has_targets(&cands, index) {
        if reachable_significant_frontiers(grid, pose, r_robot, cfg.frontier.min_cluster_cells) == 0 {
            return Decision::Complete;
        }
        // something is left: give every closed node another look
        let retired = index.retired.clone();
        index.closed_nodes = retired;
        *detection = merge(*detection, detect_frontiers(grid, graph, index, &cfg.frontier, label_of));
        cands = valid_candidates(graph, grid, from, r_robot);
        if !has_targets(&cands, index) {
            log::debug!("t={t}: frontier remains but no node can target it");
            return Decision::Failed;
        }
    }

    let ce_seed = derive_seed(cfg.seed, "ce", &[decision_no as u64]);
    let n_cands = cands.len();
    if let StrategyKind::NearestFrontier = cfg.strategy {
        // resolve the roadmap path first; it may edit the graph
        let picked = select_nbt_nearest_frontier(index, graph, from, cfg.frontier.min_cluster_cells);
        let chosen = match picked {
            Ok(c) => c,
            Err(e) => {
                log::debug!("t={t}: nearest-frontier selection failed: {e}");
                return Decision::Failed;
            }
        };
        let Ok(path) = graph.invalidate_and_replan(&chosen.sparse_path, grid, r_robot) else {
            log::debug!("t={t}: path to node {} cannot be repaired", chosen.node_id);
            return Decision::Failed;
        };
        cands = vec![TargetCandidate { sparse_path: path, ..chosen }];
    }
    let graph: &SrmGraph = graph;
    let ctx = PlanningContext {
        graph,
        grid,
        sensor: &cfg.info_sensor,
        ce: &cfg.ce,
        r_robot,
        robot: *pose,
        seed: ce_seed,
    };
    let (chosen, case, trajectory, trace) = match cfg.strategy {
        StrategyKind::Srm => {
            let (chosen, case) = select_nbt_srm(&cands, &ctx);
            match case {
                DecisionCase::Corridor => {
                    let traj = chosen.optimized.clone().or_else(|| ctx.seed_trajectory(&chosen.sparse_path));
                    (chosen, case, traj, None)
                }
                _ => {
                    let Some(seed_traj) = ctx.seed_trajectory(&chosen.sparse_path) else { return Decision::Failed };
                    let out = ce_optimize(&seed_traj, grid, &cfg.info_sensor, &cfg.ce, r_robot, ce_seed);
                    log::debug!(
                        "t={t}: room target {} straight {:.2} sparse {:.2} optimized {:.2} iters {} fell_back {}",
                        chosen.node_id,
                        pose.distance(&graph.position(chosen.node_id)),
                        seed_traj.length(),
                        out.trajectory.length(),
                        out.trace.len(),
                        out.fell_back
                    );
                    let mut chosen = chosen;
                    chosen.optimized = Some(out.trajectory.clone());
                    (chosen, case, Some(out.trajectory), Some(out.trace))
                }
            }
        }
        StrategyKind::MaxEntropy => {
            let Some(chosen) = select_nbt_max_entropy(&cands) else { return Decision::Failed };
            let traj = ctx.seed_trajectory(&chosen.sparse_path);
            (chosen, DecisionCase::Baseline, traj, None)
        }
        StrategyKind::NearestFrontier => {
            let chosen = cands.pop().expect("set above");
            let traj = ctx.seed_trajectory(&chosen.sparse_path);
            (chosen, DecisionCase::Baseline, traj, None)
        }
        StrategyKind::Combined { gamma1, gamma2 } => {
            // far candidates behind narrow doors can escape a small tree; grow
            // a larger one before giving up
            let connect = 2.0 * cfg.rrt.steer_step;
            let mut picked = Err(crate::decision::DecisionError::Unreachable);
            for attempt in 0..RRT_ATTEMPTS {
                let coords: &[u64] = if attempt == 0 { &[decision_no as u64] } else { &[decision_no as u64, attempt] };
                let mut rng = substream(cfg.seed, "rrt", coords);
                let rrt = RrtConfig { max_samples: cfg.rrt.max_samples << (2 * attempt), ..cfg.rrt };
                let tree = match rrt_star_tree(grid, *pose, &rrt, &mut rng) {
                    Ok((tree, _)) => tree,
                    Err(e) => {
                        log::debug!("t={t}: RRT* tree failed: {e}");
                        return Decision::Failed;
                    }
                };
                picked = select_nbt_combined(&cands, gamma1, gamma2, |c| {
                    tree.route_to(graph.position(c.node_id), connect, grid, r_robot)
                });
                if picked.is_ok() {
                    break;
                }
                log::debug!("t={t}: RRT* tree of {} vertices reaches none of {} candidates", tree.len(), cands.len());
            }
            let Ok(chosen) = picked else { return Decision::Failed };
            let traj = chosen.optimized.clone();
            (chosen, DecisionCase::Baseline, traj, None)
        }
    };
    let Some(trajectory) = trajectory else { return Decision::Failed };

    let witness = match cfg.strategy {
        StrategyKind::NearestFrontier => {
            // the selector reports the cluster size; recover the cluster itself
            let target = graph.position(chosen.node_id);
            index
                .clusters
                .iter()
                .filter(|c| c.len() >= cfg.frontier.min_cluster_cells)
                .min_by(|a, b| a.centroid.distance(&target).total_cmp(&b.centroid.distance(&target)))
                .map(|c| c.cells.clone())
                .unwrap_or_default()
        }
        _ => graph
            .node(chosen.node_id)
            .map(|n| attributed_cells(n, index, grid, &cfg.frontier))
            .unwrap_or_default(),
    };
    let event = DecisionEvent::new(t, &cfg.strategy, case, n_cands, &chosen);
    Decision::Go(Plan { target: chosen.node_id, trajectory, witness }, event, trace)
}

/// Candidates whose roadmap paths are valid against the current grid;
/// invalid edges are removed (and paths re-planned) until stable.
fn valid_candidates(graph: &mut SrmGraph, grid: &OccupancyGrid, from: NodeId, r_robot: f64) -> Vec<TargetCandidate> {
    loop {
        let edges_before = graph.edge_count();
        let mut cands = crate::decision::enumerate_candidates_from(graph, from);
        let mut keep = Vec::with_capacity(cands.len());
        for mut c in cands.drain(..) {
            if let Ok(path) = replan(graph, grid, &c.sparse_path, r_robot) {
                c.sparse_path = path;
                keep.push(c);
            }
        }
        if graph.edge_count() == edges_before {
            return keep;
        }
    }
}

fn replan(graph: &mut SrmGraph, grid: &OccupancyGrid, path: &SparsePath, r_robot: f64) -> Result<SparsePath, ()> {
    graph.invalidate_and_replan(path, grid, r_robot).map_err(|_| ())
}

/// Cells a disk of radius `r_robot` can occupy without touching an Occupied
/// cell, 8-connected to the robot's cell.
pub fn reachable_cspace(grid: &OccupancyGrid, robot: &Pose, r_robot: f64) -> Vec<bool> {
    let spec = grid.spec();
    let k = (r_robot / spec.resolution).ceil() as i64;
    let offsets: Vec<(i64, i64)> = (-k..=k)
        .flat_map(|dr| (-k..=k).map(move |dc| (dc, dr)))
        .filter(|&(dc, dr)| {
            // nearest point of the neighbor cell to our center
            let gx = (dc.abs() as f64 - 0.5).max(0.0) * spec.resolution;
            let gy = (dr.abs() as f64 - 0.5).max(0.0) * spec.resolution;
            (gx * gx + gy * gy).sqrt() < r_robot
        })
        .collect();
    let clear = |c: Cell| {
        grid.state(c) != CellState::Occupied
            && offsets.iter().all(|&(dc, dr)| {
                spec.offset(c, dc, dr).is_some_and(|n| grid.state(n) != CellState::Occupied)
            })
    };
    let mut seen = vec![false; spec.len()];
    let Some(start) = spec.cell_at(robot) else { return seen };
    seen[spec.index(start)] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        for n in spec.neighbors8(c) {
            let i = spec.index(n);
            if !seen[i] && clear(n) {
                seen[i] = true;
                queue.push_back(n);
            }
        }
    }
    seen
}

/// Number of significant frontier clusters (whole-map scan) that come within
/// reach of the robot's configuration space.
pub fn reachable_significant_frontiers(grid: &OccupancyGrid, robot: &Pose, r_robot: f64, min_cells: usize) -> usize {
    let spec = grid.spec();
    let reach = reachable_cspace(grid, robot, r_robot);
    let k = (r_robot / spec.resolution).ceil() as i64 + 1;
    let near_reach = |c: Cell| {
        (-k..=k).any(|dr| (-k..=k).any(|dc| spec.offset(c, dc, dr).is_some_and(|n| reach[spec.index(n)])))
    };
    cluster_cells(grid, &oracle_full_scan(grid))
        .into_iter()
        .filter(|c| c.len() >= min_cells && c.iter().any(|&cell| near_reach(cell)))
        .count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub scenario: String,
    pub strategy: String,
    pub seed: u64,
    pub status: TerminalStatus,
    pub total_path_length: f64,
    pub total_sim_time: f64,
    pub decisions: usize,
    pub srm_nodes: usize,
    pub map_agreement: f64,
}

impl EpisodeOutcome {
    pub fn summary(&self, scenario: &str, cfg: &EpisodeConfig) -> EpisodeSummary {
        EpisodeSummary {
            scenario: scenario.to_string(),
            strategy: cfg.strategy.to_string(),
            seed: cfg.seed,
            status: self.metrics.status,
            total_path_length: self.metrics.total_path_length,
            total_sim_time: self.metrics.total_sim_time,
            decisions: self.metrics.decisions.len(),
            srm_nodes: self.graph.len(),
            map_agreement: self.map_agreement(),
        }
    }

    /// Writes metrics, decision log, trajectory, optimizer traces, final map
    /// and roadmap into `dir`.
    pub fn write_to(&self, dir: &std::path::Path, scenario: &str, cfg: &EpisodeConfig) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("metrics.csv"), self.metrics.metrics_csv())?;
        std::fs::write(dir.join("decisions.jsonl"), self.metrics.decisions_jsonl())?;
        std::fs::write(dir.join("trajectory.csv"), self.metrics.trajectory_csv())?;
        std::fs::write(dir.join("ce_trace.csv"), self.metrics.ce_trace_csv())?;
        std::fs::write(dir.join("map.pgm"), self.grid.to_pgm())?;
        std::fs::write(dir.join("map.json"), pretty_json(&self.grid.sidecar()))?;
        std::fs::write(dir.join("graph.json"), pretty_json(&self.graph.to_snapshot()))?;
        std::fs::write(dir.join("summary.json"), pretty_json(&self.summary(scenario, cfg)))?;
        Ok(())
    }
}

pub(crate) fn pretty_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("plain data") + "\n"
}
