//! Next-best-target selection: the room-first / corridor-reward rule and the
//! nearest-frontier, max-entropy and combined baselines.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ce_planner::{ce_optimize, path_information, reward_value, CEConfig};
use crate::frontier::FrontierIndex;
use crate::geometry::Pose;
use crate::occupancy::OccupancyGrid;
use crate::srm::{NodeId, SparsePath, SrmGraph};
use crate::trajectory::Trajectory;
use crate::world::{SemanticLabel, SensorParams};

/// Corridor candidates that go through the optimizer per decision.
pub const CASE2_SHORTLIST: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecisionError {
    #[error("no candidate targets")]
    NoCandidates,
    #[error("no candidate target is reachable")]
    Unreachable,
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetCandidate {
    pub node_id: NodeId,
    pub label: SemanticLabel,
    pub info_gain: usize,
    pub sparse_path: SparsePath,
    pub optimized: Option<Trajectory>,
    pub reward_value: f64,
}

impl TargetCandidate {
    /// Length of the path the robot would actually execute.
    pub fn path_length(&self) -> f64 {
        self.optimized.as_ref().map_or(self.sparse_path.length, Trajectory::length)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StrategyKind {
    Srm,
    NearestFrontier,
    MaxEntropy,
    Combined { gamma1: f64, gamma2: f64 },
}

impl StrategyKind {
    pub fn validate(&self) -> Result<(), DecisionError> {
        if let StrategyKind::Combined { gamma1, gamma2 } = *self {
            if !(gamma1 >= 0.0 && gamma2 >= 0.0) || (gamma1 == 0.0 && gamma2 == 0.0) {
                return Err(DecisionError::InvalidStrategy(format!(
                    "combined weights must be non-negative and not both zero (got {gamma1}, {gamma2})"
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Srm => "srm",
            StrategyKind::NearestFrontier => "nearest",
            StrategyKind::MaxEntropy => "maxent",
            StrategyKind::Combined { .. } => "combined",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::Combined { gamma1, gamma2 } => write!(f, "combined({gamma1},{gamma2})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for StrategyKind {
    type Err = DecisionError;

    /// `srm`, `nearest`, `maxent`, `combined` (weights 1, 0.5) or
    /// `combined(g1,g2)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let kind = match s {
            "srm" => StrategyKind::Srm,
            "nearest" => StrategyKind::NearestFrontier,
            "maxent" => StrategyKind::MaxEntropy,
            "combined" => StrategyKind::Combined { gamma1: 1.0, gamma2: 0.5 },
            _ => {
                let inner = s
                    .strip_prefix("combined(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| DecisionError::InvalidStrategy(s.to_string()))?;
                let (a, b) = inner.split_once(',').ok_or_else(|| DecisionError::InvalidStrategy(s.to_string()))?;
                let parse = |v: &str| v.trim().parse::<f64>().map_err(|_| DecisionError::InvalidStrategy(s.to_string()));
                StrategyKind::Combined { gamma1: parse(a)?, gamma2: parse(b)? }
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// Open nodes with positive gain, each with its roadmap path from `from`.
/// Unreachable nodes are dropped. Ordered by node id.
pub fn enumerate_candidates_from(graph: &SrmGraph, from: NodeId) -> Vec<TargetCandidate> {
    graph
        .nodes()
        .iter()
        .filter(|n| !n.closed && n.info_gain > 0)
        .filter_map(|n| {
            let sparse_path = graph.shortest_path(from, n.id).ok()?;
            Some(TargetCandidate {
                node_id: n.id,
                label: n.label,
                info_gain: n.info_gain,
                sparse_path,
                optimized: None,
                reward_value: 0.0,
            })
        })
        .collect()
}

pub fn enumerate_candidates(graph: &SrmGraph, robot: &Pose) -> Vec<TargetCandidate> {
    if graph.is_empty() {
        return Vec::new();
    }
    enumerate_candidates_from(graph, graph.nearest_node(robot))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoomEntry {
    pub room: u16,
    /// Index into the candidate slice the agenda was built from.
    pub representative: usize,
    pub distance: f64,
}

/// Rooms with at least one candidate, nearest first.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoomAgenda {
    pub entries: Vec<RoomEntry>,
}

impl RoomAgenda {
    pub fn build(cands: &[TargetCandidate]) -> Self {
        let mut rooms: BTreeMap<u16, RoomEntry> = BTreeMap::new();
        for (i, c) in cands.iter().enumerate() {
            let SemanticLabel::Room(room) = c.label else { continue };
            let e = rooms.entry(room).or_insert(RoomEntry { room, representative: i, distance: f64::INFINITY });
            e.distance = e.distance.min(c.sparse_path.length);
            let rep = &cands[e.representative];
            if c.info_gain > rep.info_gain || (c.info_gain == rep.info_gain && c.node_id < rep.node_id) {
                e.representative = i;
            }
        }
        let mut entries: Vec<RoomEntry> = rooms.into_values().collect();
        entries.sort_by(|a, b| {
            if (a.distance - b.distance).abs() <= 1e-9 {
                cands[a.representative].node_id.cmp(&cands[b.representative].node_id)
            } else {
                a.distance.total_cmp(&b.distance)
            }
        });
        Self { entries }
    }

    pub fn visit_order(&self) -> Vec<u16> {
        self.entries.iter().map(|e| e.room).collect()
    }
}

/// Inputs the corridor case needs to optimize and score trajectories.
pub struct PlanningContext<'a> {
    pub graph: &'a SrmGraph,
    pub grid: &'a OccupancyGrid,
    pub sensor: &'a SensorParams,
    pub ce: &'a CEConfig,
    pub r_robot: f64,
    pub robot: Pose,
    pub seed: u64,
}

impl PlanningContext<'_> {
    /// Robot pose followed by the sparse path's node positions.
    pub fn seed_trajectory(&self, path: &SparsePath) -> Option<Trajectory> {
        let mut pts = vec![self.robot];
        pts.extend(self.graph.path_poses(path));
        Trajectory::new(pts)
    }
}

/// Which branch of the hierarchical rule produced a choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionCase {
    Room,
    Corridor,
    Baseline,
}

impl DecisionCase {
    pub fn code(&self) -> u8 {
        match self {
            DecisionCase::Room => 1,
            DecisionCase::Corridor => 2,
            DecisionCase::Baseline => 0,
        }
    }
}

/// Room-first selection; with no room candidates, the corridor reward over an
/// optimized shortlist. `cands` must be nonempty.
pub fn select_nbt_srm(cands: &[TargetCandidate], ctx: &PlanningContext<'_>) -> (TargetCandidate, DecisionCase) {
    assert!(!cands.is_empty(), "select_nbt_srm needs candidates");
    let agenda = RoomAgenda::build(cands);
    if let Some(first) = agenda.entries.first() {
        let mut chosen = cands[first.representative].clone();
        chosen.reward_value = first.distance;
        return (chosen, DecisionCase::Room);
    }

    let lambda = ctx.ce.lambda;
    let mut best: Option<TargetCandidate> = None;
    for i in corridor_shortlist(cands, lambda, CASE2_SHORTLIST) {
        let mut c = cands[i].clone();
        let Some(seed_traj) = ctx.seed_trajectory(&c.sparse_path) else { continue };
        let out = ce_optimize(&seed_traj, ctx.grid, ctx.sensor, ctx.ce, ctx.r_robot, ctx.seed ^ c.node_id as u64);
        let info = path_information(&out.trajectory, ctx.grid, ctx.sensor, ctx.ce.pose_sample_interval);
        c.reward_value = reward_value(info, out.trajectory.length(), lambda);
        c.optimized = Some(out.trajectory);
        let better = match &best {
            None => true,
            Some(b) => c.reward_value < b.reward_value || (c.reward_value == b.reward_value && c.node_id < b.node_id),
        };
        if better {
            best = Some(c);
        }
    }
    // seed trajectories only fail for degenerate paths; keep the best sparse one then
    let chosen = best.unwrap_or_else(|| cands[0].clone());
    (chosen, DecisionCase::Corridor)
}

/// Indices of the `k` best candidates by sparse-path reward, best first;
/// ties by smaller node id.
pub fn corridor_shortlist(cands: &[TargetCandidate], lambda: f64, k: usize) -> Vec<usize> {
    let mut ranked: Vec<(f64, usize)> = cands
        .iter()
        .enumerate()
        .map(|(i, c)| (reward_value(c.info_gain as f64, c.sparse_path.length, lambda), i))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(cands[a.1].node_id.cmp(&cands[b.1].node_id)));
    ranked.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Highest gain; ties by shorter path, then smaller id.
pub fn select_nbt_max_entropy(cands: &[TargetCandidate]) -> Option<TargetCandidate> {
    cands
        .iter()
        .min_by(|a, b| {
            b.info_gain
                .cmp(&a.info_gain)
                .then(a.sparse_path.length.total_cmp(&b.sparse_path.length))
                .then(a.node_id.cmp(&b.node_id))
        })
        .map(|c| TargetCandidate { reward_value: c.info_gain as f64, ..c.clone() })
}

/// Target node for the cluster with the shortest roadmap path from `from`.
/// Each cluster maps to the reachable, non-retired node nearest its
/// centroid; clusters smaller than `min_cells` are ignored.
pub fn select_nbt_nearest_frontier(
    index: &FrontierIndex,
    graph: &SrmGraph,
    from: NodeId,
    min_cells: usize,
) -> Result<TargetCandidate, DecisionError> {
    let mut best: Option<TargetCandidate> = None;
    let mut any = false;
    for cluster in index.clusters.iter().filter(|c| c.len() >= min_cells) {
        any = true;
        // nearest node to the centroid that the robot can actually reach
        let Some((node, path)) = graph
            .ranked_by_distance(&cluster.centroid)
            .into_iter()
            .filter(|(_, id)| !index.retired.contains(id))
            .find_map(|(_, id)| graph.shortest_path(from, id).ok().map(|p| (id, p)))
        else {
            continue;
        };
        let better = match &best {
            None => true,
            Some(b) => path.length < b.sparse_path.length || (path.length == b.sparse_path.length && node < b.node_id),
        };
        if better {
            let n = graph.node(node).expect("ranked ids exist");
            best = Some(TargetCandidate {
                node_id: node,
                label: n.label,
                info_gain: cluster.len(),
                reward_value: path.length,
                sparse_path: path,
                optimized: None,
            });
        }
    }
    match best {
        Some(c) => Ok(c),
        None if any => Err(DecisionError::Unreachable),
        None => Err(DecisionError::NoCandidates),
    }
}

/// Maximizes `gamma1 * gain - gamma2 * length`, with lengths (and the executed
/// trajectory) supplied by `plan`. Candidates `plan` cannot reach are skipped.
pub fn select_nbt_combined(
    cands: &[TargetCandidate],
    gamma1: f64,
    gamma2: f64,
    mut plan: impl FnMut(&TargetCandidate) -> Option<Trajectory>,
) -> Result<TargetCandidate, DecisionError> {
    if cands.is_empty() {
        return Err(DecisionError::NoCandidates);
    }
    let mut best: Option<TargetCandidate> = None;
    for c in cands {
        let Some(traj) = plan(c) else { continue };
        let score = gamma1 * c.info_gain as f64 - gamma2 * traj.length();
        let better = match &best {
            None => true,
            Some(b) => score > b.reward_value || (score == b.reward_value && c.node_id < b.node_id),
        };
        if better {
            best = Some(TargetCandidate { optimized: Some(traj), reward_value: score, ..c.clone() });
        }
    }
    best.ok_or(DecisionError::Unreachable)
}

/// One line of the decision log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionEvent {
    pub sim_time: f64,
    pub strategy: String,
    pub case: u8,
    pub candidates: usize,
    pub node_id: NodeId,
    pub label: String,
    pub score: f64,
    pub path_length: f64,
}

impl DecisionEvent {
    pub fn new(sim_time: f64, strategy: &StrategyKind, case: DecisionCase, candidates: usize, chosen: &TargetCandidate) -> Self {
        Self {
            sim_time,
            strategy: strategy.to_string(),
            case: case.code(),
            candidates,
            node_id: chosen.node_id,
            label: chosen.label.to_string(),
            score: chosen.reward_value,
            path_length: chosen.path_length(),
        }
    }
}

pub fn decision_log_jsonl(events: &[DecisionEvent]) -> String {
    events.iter().map(|e| serde_json::to_string(e).expect("plain data") + "\n").collect()
}
