//! Roadmap-anchored frontier detection.
//!
//! Instead of sweeping the whole raster, rays are cast around every roadmap
//! node that is still open. Any frontier cell hit by a ray seeds a flood fill
//! over 8-connected frontier cells, so whole clusters are recovered even
//! when most of their cells lie outside the ray fan. Nodes whose fan sees no
//! frontier are closed and skipped on later calls until nearby cells change.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::geometry::{Cell, Pose, RayTraversal};
use crate::occupancy::{CellState, OccupancyGrid};
use crate::srm::{NodeId, SrmGraph, SrmNode};
use crate::world::SemanticLabel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierConfig {
    pub raycast_radius: f64,
    pub rays_per_node: usize,
    /// Clusters smaller than this are reported but carry no information gain
    /// and do not keep a node open.
    pub min_cluster_cells: usize,
    /// Skip closed nodes during detection.
    pub pruning: bool,
    /// Reopen closed nodes near cells whose state changed.
    pub reopen: bool,
    pub gain: GainModel,
}

/// Which clusters count toward a node's information gain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum GainModel {
    /// Significant clusters whose nearest cell lies within the raycast radius,
    /// walls notwithstanding.
    Distance,
    /// Significant clusters the node's own rays reached.
    #[default]
    Visible,
}

impl Default for FrontierConfig {
    fn default() -> Self {
        Self {
            raycast_radius: 4.0,
            rays_per_node: 72,
            min_cluster_cells: 3,
            pruning: true,
            reopen: true,
            gain: GainModel::Visible,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierCluster {
    pub cells: Vec<Cell>,
    pub centroid: Pose,
    pub label: SemanticLabel,
    bbox: [f64; 4],
}

impl FrontierCluster {
    fn new(cells: Vec<Cell>, grid: &OccupancyGrid) -> Self {
        let spec = grid.spec();
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut bbox = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for &c in &cells {
            let p = spec.cell_center(c);
            sx += p.x;
            sy += p.y;
            bbox = [bbox[0].min(p.x), bbox[1].min(p.y), bbox[2].max(p.x), bbox[3].max(p.y)];
        }
        let n = cells.len() as f64;
        Self { centroid: Pose::new(sx / n, sy / n), label: SemanticLabel::Unlabeled, cells, bbox }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Distance from `p` to the nearest cell center of the cluster.
    pub fn distance_to(&self, p: &Pose, grid: &OccupancyGrid) -> f64 {
        self.cells
            .iter()
            .map(|&c| grid.spec().cell_center(c).distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    fn bbox_distance(&self, p: &Pose) -> f64 {
        let dx = (self.bbox[0] - p.x).max(p.x - self.bbox[2]).max(0.0);
        let dy = (self.bbox[1] - p.y).max(p.y - self.bbox[3]).max(0.0);
        dx.hypot(dy)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrontierIndex {
    pub clusters: Vec<FrontierCluster>,
    pub closed_nodes: BTreeSet<NodeId>,
    /// Nodes permanently excluded (never reopened), e.g. targets that were
    /// reached without resolving their frontier.
    pub retired: BTreeSet<NodeId>,
    pub raycast_radius: f64,
    /// Significant clusters (indices into `clusters`) reached by each node's
    /// rays during the last detection; open nodes only.
    pub visible: BTreeMap<NodeId, Vec<usize>>,
}

/// Work performed by one detection call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionStats {
    pub raycast_nodes: u64,
    pub ray_cells: u64,
    pub flood_checks: u64,
}

impl DetectionStats {
    pub fn ops(&self) -> u64 {
        self.ray_cells + self.flood_checks
    }
}

impl FrontierIndex {
    pub fn new(raycast_radius: f64) -> Self {
        Self { raycast_radius, ..Default::default() }
    }

    pub fn frontier_cells(&self) -> BTreeSet<Cell> {
        self.clusters.iter().flat_map(|c| c.cells.iter().copied()).collect()
    }

    pub fn cell_count(&self) -> usize {
        self.clusters.iter().map(FrontierCluster::len).sum()
    }

    pub fn retire(&mut self, id: NodeId) {
        self.retired.insert(id);
        self.closed_nodes.insert(id);
    }
}

/// Free cell with at least one Unknown 8-neighbor.
pub fn is_frontier(grid: &OccupancyGrid, cell: Cell) -> bool {
    grid.state(cell) == CellState::Free
        && grid.spec().neighbors8(cell).any(|n| grid.state(n) == CellState::Unknown)
}

/// Exhaustive scan of every cell.
pub fn oracle_full_scan(grid: &OccupancyGrid) -> Vec<Cell> {
    let spec = grid.spec();
    (0..spec.len()).map(|i| spec.cell_of_index(i)).filter(|&c| is_frontier(grid, c)).collect()
}

/// Groups frontier cells into 8-connected components (sorted, deterministic).
pub fn cluster_cells(grid: &OccupancyGrid, cells: &[Cell]) -> Vec<Vec<Cell>> {
    let spec = grid.spec();
    let mut member = vec![false; spec.len()];
    for &c in cells {
        member[spec.index(c)] = true;
    }
    let mut seen = vec![false; spec.len()];
    let mut sorted = cells.to_vec();
    sorted.sort_unstable();
    let mut out = Vec::new();
    for &seed in &sorted {
        if seen[spec.index(seed)] {
            continue;
        }
        let mut comp = vec![seed];
        seen[spec.index(seed)] = true;
        let mut i = 0;
        while i < comp.len() {
            let c = comp[i];
            i += 1;
            for n in spec.neighbors8(c) {
                let ni = spec.index(n);
                if member[ni] && !seen[ni] {
                    seen[ni] = true;
                    comp.push(n);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Runs ray casting around open nodes, flood-fills the clusters they touch,
/// closes nodes that see no significant frontier and refreshes every node's
/// information gain.
pub fn detect_frontiers(
    grid: &OccupancyGrid,
    graph: &mut SrmGraph,
    index: &mut FrontierIndex,
    cfg: &FrontierConfig,
    label_of: impl Fn(&Pose) -> SemanticLabel,
) -> DetectionStats {
    let spec = *grid.spec();
    let mut stats = DetectionStats::default();
    // cluster id + 1 per cell, 0 = unassigned
    let mut owner = vec![0u32; spec.len()];
    let mut clusters: Vec<FrontierCluster> = Vec::new();
    let mut newly_closed = Vec::new();
    let mut visible = BTreeMap::new();
    let radius = index.raycast_radius;

    for node in graph.nodes() {
        if index.retired.contains(&node.id) || (cfg.pruning && index.closed_nodes.contains(&node.id)) {
            continue;
        }
        stats.raycast_nodes += 1;
        let mut seen: Vec<usize> = Vec::new();
        for k in 0..cfg.rays_per_node {
            let angle = std::f64::consts::TAU * k as f64 / cfg.rays_per_node as f64;
            for step in RayTraversal::new(&spec, &node.position, angle, radius) {
                stats.ray_cells += 1;
                let idx = spec.index(step.cell);
                if grid.state_at_index(idx) == CellState::Occupied {
                    break;
                }
                let cid = match owner[idx] {
                    0 if is_frontier(grid, step.cell) => {
                        let cells = flood_fill(grid, step.cell, &mut owner, clusters.len() as u32 + 1, &mut stats);
                        clusters.push(FrontierCluster::new(cells, grid));
                        clusters.len() - 1
                    }
                    0 => continue,
                    o => o as usize - 1,
                };
                if clusters[cid].len() >= cfg.min_cluster_cells && !seen.contains(&cid) {
                    seen.push(cid);
                }
            }
        }
        if seen.is_empty() {
            newly_closed.push(node.id);
        } else {
            seen.sort_unstable();
            visible.insert(node.id, seen);
        }
    }
    index.closed_nodes.extend(newly_closed);
    index.visible = visible;

    for cluster in &mut clusters {
        let label = label_of(&cluster.centroid);
        cluster.label = if label == SemanticLabel::Unlabeled {
            graph.node(graph.nearest_node(&cluster.centroid)).map_or(label, |n| n.label)
        } else {
            label
        };
    }
    index.clusters = clusters;

    let gains: Vec<(usize, bool)> = graph
        .nodes()
        .iter()
        .map(|n| {
            let closed = index.closed_nodes.contains(&n.id);
            (if closed { 0 } else { node_info_gain(n, index, grid, cfg) }, closed)
        })
        .collect();
    for (id, (gain, closed)) in gains.into_iter().enumerate() {
        let node = graph.node_mut(id).expect("dense ids");
        node.info_gain = gain;
        node.closed = closed;
    }
    stats
}

fn flood_fill(grid: &OccupancyGrid, seed: Cell, owner: &mut [u32], tag: u32, stats: &mut DetectionStats) -> Vec<Cell> {
    let spec = grid.spec();
    let mut cells = Vec::new();
    let mut queue = VecDeque::from([seed]);
    owner[spec.index(seed)] = tag;
    while let Some(c) = queue.pop_front() {
        cells.push(c);
        for n in spec.neighbors8(c) {
            stats.flood_checks += 1;
            let ni = spec.index(n);
            if owner[ni] == 0 && is_frontier(grid, n) {
                owner[ni] = tag;
                queue.push_back(n);
            }
        }
    }
    cells.sort_unstable();
    cells
}

/// Frontier cells in the significant clusters attributed to `node` under
/// the configured gain model; zero for closed nodes.
pub fn node_info_gain(node: &SrmNode, index: &FrontierIndex, grid: &OccupancyGrid, cfg: &FrontierConfig) -> usize {
    if index.closed_nodes.contains(&node.id) {
        return 0;
    }
    attributed_clusters(node, index, grid, cfg).map(FrontierCluster::len).sum()
}

/// Frontier cells of the significant clusters counted in `node`'s gain.
pub fn attributed_cells(node: &SrmNode, index: &FrontierIndex, grid: &OccupancyGrid, cfg: &FrontierConfig) -> Vec<Cell> {
    attributed_clusters(node, index, grid, cfg).flat_map(|c| c.cells.iter().copied()).collect()
}

fn attributed_clusters<'a>(
    node: &SrmNode,
    index: &'a FrontierIndex,
    grid: &'a OccupancyGrid,
    cfg: &FrontierConfig,
) -> Box<dyn Iterator<Item = &'a FrontierCluster> + 'a> {
    match cfg.gain {
        GainModel::Visible => {
            let ids = index.visible.get(&node.id).map_or(&[][..], Vec::as_slice);
            Box::new(ids.iter().filter_map(|&i| index.clusters.get(i)))
        }
        GainModel::Distance => {
            let (min_cells, r, p) = (cfg.min_cluster_cells, index.raycast_radius, node.position);
            Box::new(
                index
                    .clusters
                    .iter()
                    .filter(move |c| c.len() >= min_cells)
                    .filter(move |c| c.bbox_distance(&p) <= r)
                    .filter(move |c| c.distance_to(&p, grid) <= r),
            )
        }
    }
}

/// Reopens closed (non-retired) nodes within the raycast radius of any
/// changed cell. Returns the reopened ids.
pub fn reopen_nodes(index: &mut FrontierIndex, graph: &SrmGraph, grid: &OccupancyGrid, changed: &[Cell]) -> Vec<NodeId> {
    if changed.is_empty() || index.closed_nodes.is_empty() {
        return Vec::new();
    }
    let spec = grid.spec();
    let centers: Vec<Pose> = changed.iter().map(|&c| spec.cell_center(c)).collect();
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in &centers {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let r = index.raycast_radius;
    let reopened: Vec<NodeId> = index
        .closed_nodes
        .iter()
        .copied()
        .filter(|id| !index.retired.contains(id))
        .filter(|&id| {
            let p = graph.position(id);
            if p.x < x0 - r || p.x > x1 + r || p.y < y0 - r || p.y > y1 + r {
                return false;
            }
            centers.iter().any(|c| c.distance(&p) <= r)
        })
        .collect();
    for id in &reopened {
        index.closed_nodes.remove(id);
    }
    reopened
}
