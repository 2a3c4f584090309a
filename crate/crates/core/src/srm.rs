//! Incrementally grown semantic roadmap.
//!
//! Every sensor sweep proposes one candidate vertex per beam. A candidate is
//! linked to the closest existing vertex it can see through the belief map
//! (unknown space counts as traversable), which keeps the graph a tree that
//! grows only inside observed coverage. Paths are queried with A*; edges that
//! later turn out to cross discovered obstacles are removed lazily when a
//! path over them is requested.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose, RayTraversal};
use crate::occupancy::{CellState, OccupancyGrid};
use crate::world::{LaserScan, SemanticLabel};

pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
    #[error("no path from {from} to {to}")]
    Unreachable { from: NodeId, to: NodeId },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrmNode {
    pub id: NodeId,
    pub position: Pose,
    pub label: SemanticLabel,
    pub info_gain: usize,
    pub closed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrmEdge {
    pub a: NodeId,
    pub b: NodeId,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsePath {
    pub node_ids: Vec<NodeId>,
    pub length: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrmConfig {
    /// Candidates closer than this to their attachment vertex are dropped.
    pub min_edge_len: f64,
    /// Collision radius used to inflate edges.
    pub r_robot: f64,
    /// Candidates are drawn at `u * range` with `u < 1 - sample_margin`.
    pub sample_margin: f64,
    /// Extra draws per beam after a collision-related drop.
    pub retries_per_beam: usize,
    /// When positive, an inserted vertex is also linked to every other vertex
    /// within this distance that it sees; zero keeps the roadmap a tree.
    #[serde(default)]
    pub loop_radius: f64,
}

impl Default for SrmConfig {
    fn default() -> Self {
        Self { min_edge_len: 0.3, r_robot: 0.2, sample_margin: 0.05, retries_per_beam: 3, loop_radius: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropReason {
    TooClose,
    NoValidEdge,
    InCollision,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted(NodeId),
    Dropped(DropReason),
}

/// Work counters for a single A* query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub nodes_expanded: u64,
    pub edges_relaxed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrmGraph {
    nodes: Vec<SrmNode>,
    adjacency: Vec<Vec<(NodeId, f64)>>,
    root: NodeId,
}

impl SrmGraph {
    pub fn new(root_position: Pose, root_label: SemanticLabel) -> Self {
        Self {
            nodes: vec![SrmNode { id: 0, position: root_position, label: root_label, info_gain: 0, closed: false }],
            adjacency: vec![Vec::new()],
            root: 0,
        }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[SrmNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&SrmNode> {
        self.nodes.get(id)
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut SrmNode> {
        self.nodes.get_mut(id)
    }

    pub fn neighbors(&self, id: NodeId) -> &[(NodeId, f64)] {
        &self.adjacency[id]
    }

    pub fn position(&self, id: NodeId) -> Pose {
        self.nodes[id].position
    }

    pub fn edges(&self) -> Vec<SrmEdge> {
        let mut out = Vec::new();
        for (a, adj) in self.adjacency.iter().enumerate() {
            for &(b, length) in adj {
                if a < b {
                    out.push(SrmEdge { a, b, length });
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency.get(a).map_or(false, |adj| adj.iter().any(|&(n, _)| n == b))
    }

    /// Adds a vertex without any edge. Callers must connect it.
    pub fn add_node(&mut self, position: Pose, label: SemanticLabel) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(SrmNode { id, position, label, info_gain: 0, closed: false });
        self.adjacency.push(Vec::new());
        id
    }

    /// Adds an undirected edge; self-loops and duplicates are ignored.
    pub fn add_edge(&mut self, a: NodeId, b: NodeId) -> bool {
        if a == b || self.has_edge(a, b) {
            return false;
        }
        let length = self.nodes[a].position.distance(&self.nodes[b].position);
        self.adjacency[a].push((b, length));
        self.adjacency[b].push((a, length));
        true
    }

    pub fn remove_edge(&mut self, a: NodeId, b: NodeId) -> bool {
        let before = self.adjacency[a].len();
        self.adjacency[a].retain(|&(n, _)| n != b);
        self.adjacency[b].retain(|&(n, _)| n != a);
        before != self.adjacency[a].len()
    }

    /// Nodes reachable from `start` through current edges.
    pub fn component_of(&self, start: NodeId) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(n) = queue.pop_front() {
            for &(m, _) in &self.adjacency[n] {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        seen
    }

    pub fn is_connected(&self) -> bool {
        self.component_of(self.root).iter().all(|&s| s)
    }

    /// Euclidean-nearest node; ties go to the smaller id.
    pub fn nearest_node(&self, pose: &Pose) -> NodeId {
        let mut best = (f64::INFINITY, 0);
        for node in &self.nodes {
            let d = node.position.distance(pose);
            if d < best.0 {
                best = (d, node.id);
            }
        }
        best.1
    }

    /// Node ids ordered by ascending distance to `pose`, ties by id.
    pub fn ranked_by_distance(&self, pose: &Pose) -> Vec<(f64, NodeId)> {
        let mut ranked: Vec<(f64, NodeId)> =
            self.nodes.iter().map(|n| (n.position.distance(pose), n.id)).collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ranked
    }

    /// Same order as [`Self::ranked_by_distance`], produced lazily; callers
    /// that usually stop at the first few nodes skip the full sort.
    fn by_distance(&self, pose: &Pose) -> impl Iterator<Item = (f64, NodeId)> {
        let mut heap: BinaryHeap<OpenEntry> =
            self.nodes.iter().map(|n| OpenEntry { f: n.position.distance(pose), id: n.id }).collect();
        std::iter::from_fn(move || heap.pop().map(|e| (e.f, e.id)))
    }

    /// Nearest node whose straight connection from `pose` is collision-free.
    pub fn nearest_visible_node(&self, pose: &Pose, grid: &OccupancyGrid, r_robot: f64) -> Option<NodeId> {
        self.by_distance(pose)
            .find(|&(_, id)| check_edge_validity(grid, pose, &self.nodes[id].position, r_robot))
            .map(|(_, id)| id)
    }

    /// Links a candidate to the first vertex, in order of distance, whose
    /// connecting segment is collision-free.
    pub fn try_insert(
        &mut self,
        candidate: Pose,
        grid: &OccupancyGrid,
        cfg: &SrmConfig,
        label_of: impl Fn(&Pose) -> SemanticLabel,
    ) -> InsertOutcome {
        match grid.state_at_pose(&candidate) {
            None | Some(CellState::Occupied) => return InsertOutcome::Dropped(DropReason::InCollision),
            _ => {}
        }
        // every edge starts at the candidate, so a candidate too close to a
        // wall has no valid edge at all
        if !check_edge_validity(grid, &candidate, &candidate, cfg.r_robot) {
            return InsertOutcome::Dropped(DropReason::NoValidEdge);
        }
        for (dist, id) in self.by_distance(&candidate) {
            if check_edge_validity(grid, &candidate, &self.nodes[id].position, cfg.r_robot) {
                if dist < cfg.min_edge_len {
                    return InsertOutcome::Dropped(DropReason::TooClose);
                }
                let new_id = self.add_node(candidate, label_of(&candidate));
                self.add_edge(new_id, id);
                if cfg.loop_radius > 0.0 {
                    let near: Vec<NodeId> = self
                        .ranked_by_distance(&candidate)
                        .into_iter()
                        .take_while(|&(d, _)| d <= cfg.loop_radius)
                        .map(|(_, other)| other)
                        .filter(|&other| other != new_id && other != id)
                        .collect();
                    for other in near {
                        if check_edge_validity(grid, &candidate, &self.nodes[other].position, cfg.r_robot) {
                            self.add_edge(new_id, other);
                        }
                    }
                }
                return InsertOutcome::Inserted(new_id);
            }
        }
        InsertOutcome::Dropped(DropReason::NoValidEdge)
    }

    /// Samples one candidate per beam and inserts it, redrawing a few times
    /// when the draw is unusable. Returns the ids of inserted nodes.
    pub fn grow_from_scan<R: Rng>(
        &mut self,
        scan: &LaserScan,
        grid: &OccupancyGrid,
        cfg: &SrmConfig,
        rng: &mut R,
        label_of: impl Fn(&Pose) -> SemanticLabel,
    ) -> Vec<NodeId> {
        let mut inserted = Vec::new();
        for beam in &scan.beams {
            for _ in 0..=cfg.retries_per_beam {
                let Some(p) = sample_on_beam(&scan.origin, beam.angle, beam.range, cfg.sample_margin, rng) else {
                    continue;
                };
                if grid.spec().cell_at(&p).is_none() {
                    continue;
                }
                match self.try_insert(p, grid, cfg, &label_of) {
                    InsertOutcome::Inserted(id) => {
                        inserted.push(id);
                        break;
                    }
                    InsertOutcome::Dropped(DropReason::TooClose) => break,
                    InsertOutcome::Dropped(_) => {}
                }
            }
        }
        inserted
    }

    /// A* with a Euclidean heuristic; ties are expanded by smaller id.
    pub fn shortest_path(&self, from: NodeId, to: NodeId) -> Result<SparsePath, PlanError> {
        self.shortest_path_with_stats(from, to).map(|(p, _)| p)
    }

    pub fn shortest_path_with_stats(&self, from: NodeId, to: NodeId) -> Result<(SparsePath, SearchStats), PlanError> {
        let n = self.nodes.len();
        for id in [from, to] {
            if id >= n {
                return Err(PlanError::UnknownNode(id));
            }
        }
        let mut stats = SearchStats::default();
        if from == to {
            return Ok((SparsePath { node_ids: vec![from], length: 0.0 }, stats));
        }
        let goal = self.nodes[to].position;
        let h = |id: NodeId| self.nodes[id].position.distance(&goal);
        let mut g = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let mut closed = vec![false; n];
        let mut open = BinaryHeap::new();
        g[from] = 0.0;
        open.push(OpenEntry { f: h(from), id: from });
        while let Some(OpenEntry { id, .. }) = open.pop() {
            if closed[id] {
                continue;
            }
            closed[id] = true;
            stats.nodes_expanded += 1;
            if id == to {
                let mut node_ids = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = parent[cur];
                    node_ids.push(cur);
                }
                node_ids.reverse();
                return Ok((SparsePath { node_ids, length: g[to] }, stats));
            }
            for &(m, w) in &self.adjacency[id] {
                stats.edges_relaxed += 1;
                let cand = g[id] + w;
                if !closed[m] && cand < g[m] {
                    g[m] = cand;
                    parent[m] = id;
                    open.push(OpenEntry { f: cand + h(m), id: m });
                }
            }
        }
        Err(PlanError::Unreachable { from, to })
    }

    /// Re-validates the edges of `path` against the current belief, removes
    /// invalid ones and re-plans until a fully valid path is found. A single
    /// bridging edge is attempted if the endpoints become disconnected.
    pub fn invalidate_and_replan(
        &mut self,
        path: &SparsePath,
        grid: &OccupancyGrid,
        r_robot: f64,
    ) -> Result<SparsePath, PlanError> {
        let (&from, &to) = match (path.node_ids.first(), path.node_ids.last()) {
            (Some(f), Some(t)) => (f, t),
            _ => return Err(PlanError::Unreachable { from: 0, to: 0 }),
        };
        let mut current = path.clone();
        let mut repaired = false;
        loop {
            let invalid: Vec<(NodeId, NodeId)> = current
                .node_ids
                .windows(2)
                .filter(|w| {
                    !self.has_edge(w[0], w[1])
                        || !check_edge_validity(grid, &self.nodes[w[0]].position, &self.nodes[w[1]].position, r_robot)
                })
                .map(|w| (w[0], w[1]))
                .collect();
            if invalid.is_empty() {
                return Ok(current);
            }
            for (a, b) in invalid {
                self.remove_edge(a, b);
            }
            match self.shortest_path(from, to) {
                Ok(p) => current = p,
                Err(_) if !repaired => {
                    repaired = true;
                    if !self.bridge_components(from, to, grid, r_robot) {
                        return Err(PlanError::Unreachable { from, to });
                    }
                    current = self.shortest_path(from, to)?;
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Bridges every component that is cut off from the root back to the
    /// root's component where a valid segment exists. Returns the number of
    /// bridges added.
    pub fn reconnect(&mut self, grid: &OccupancyGrid, r_robot: f64) -> usize {
        let mut added = 0;
        let mut hopeless = vec![false; self.nodes.len()];
        loop {
            let rooted = self.component_of(self.root);
            let Some(orphan) = (0..self.nodes.len()).find(|&i| !rooted[i] && !hopeless[i]) else {
                return added;
            };
            if self.bridge_components(self.root, orphan, grid, r_robot) {
                added += 1;
            } else {
                for (i, inside) in self.component_of(orphan).into_iter().enumerate() {
                    hopeless[i] |= inside;
                }
            }
        }
    }

    /// Connects the components of `a` and `b` with the shortest valid
    /// straight segment between them.
    fn bridge_components(&mut self, a: NodeId, b: NodeId, grid: &OccupancyGrid, r_robot: f64) -> bool {
        let comp_a = self.component_of(a);
        let comp_b = self.component_of(b);
        let left: Vec<NodeId> = (0..self.nodes.len()).filter(|&i| comp_a[i]).collect();
        let right: Vec<NodeId> = (0..self.nodes.len()).filter(|&i| comp_b[i]).collect();
        let mut pairs: Vec<(f64, NodeId, NodeId)> = Vec::with_capacity(left.len() * right.len());
        for &i in &left {
            for &j in &right {
                pairs.push((self.nodes[i].position.distance(&self.nodes[j].position), i, j));
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        for (_, i, j) in pairs {
            if check_edge_validity(grid, &self.nodes[i].position, &self.nodes[j].position, r_robot) {
                log::info!("bridging disconnected roadmap components with edge {i}-{j}");
                self.add_edge(i, j);
                return true;
            }
        }
        false
    }

    pub fn path_poses(&self, path: &SparsePath) -> Vec<Pose> {
        path.node_ids.iter().map(|&id| self.nodes[id].position).collect()
    }

    pub fn to_snapshot(&self) -> GraphSnapshot {
        GraphSnapshot {
            nodes: self
                .nodes
                .iter()
                .map(|n| SnapshotNode {
                    id: n.id,
                    x: n.position.x,
                    y: n.position.y,
                    label: n.label.to_string(),
                    info_gain: n.info_gain,
                    closed: n.closed,
                })
                .collect(),
            edges: self.edges().iter().map(|e| [e.a, e.b]).collect(),
        }
    }

    pub fn from_snapshot(snap: &GraphSnapshot) -> Result<Self, String> {
        let mut graph = SrmGraph { nodes: Vec::new(), adjacency: Vec::new(), root: 0 };
        for (i, n) in snap.nodes.iter().enumerate() {
            if n.id != i {
                return Err(format!("node ids must be dense, found {} at {}", n.id, i));
            }
            let id = graph.add_node(Pose::new(n.x, n.y), parse_label(&n.label)?);
            graph.nodes[id].info_gain = n.info_gain;
            graph.nodes[id].closed = n.closed;
        }
        if graph.nodes.is_empty() {
            return Err("graph snapshot has no nodes".into());
        }
        for &[a, b] in &snap.edges {
            if a >= graph.len() || b >= graph.len() {
                return Err(format!("edge [{a}, {b}] references a missing node"));
            }
            graph.add_edge(a, b);
        }
        Ok(graph)
    }
}

fn parse_label(s: &str) -> Result<SemanticLabel, String> {
    let parse_id = |t: &str| t.parse::<u16>().map_err(|e| format!("bad label '{s}': {e}"));
    match s.split_once(':') {
        Some(("room", id)) => Ok(SemanticLabel::Room(parse_id(id)?)),
        Some(("connection", id)) => Ok(SemanticLabel::Connection(parse_id(id)?)),
        None if s == "unlabeled" => Ok(SemanticLabel::Unlabeled),
        _ => Err(format!("bad label '{s}'")),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotNode {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub label: String,
    pub info_gain: usize,
    pub closed: bool,
}

/// JSON form of the roadmap used by plots and golden tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub nodes: Vec<SnapshotNode>,
    pub edges: Vec<[NodeId; 2]>,
}

#[derive(PartialEq)]
struct OpenEntry {
    f: f64,
    id: NodeId,
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (f, id)
        other.f.total_cmp(&self.f).then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn sample_on_beam<R: Rng>(origin: &Pose, angle: f64, range: f64, margin: f64, rng: &mut R) -> Option<Pose> {
    let upper = (1.0 - margin) * range;
    if !(upper > 0.0) {
        return None;
    }
    let mut u: f64 = rng.gen_range(0.0..1.0);
    // keep the draw strictly positive
    while u == 0.0 {
        u = rng.gen_range(0.0..1.0);
    }
    let d = u * upper;
    Some(Pose::new(origin.x + d * angle.cos(), origin.y + d * angle.sin()))
}

/// One point per beam at `u * range`, `u ~ U(0, 1 - margin)`; points outside
/// the grid are discarded.
pub fn sample_candidates<R: Rng>(scan: &LaserScan, grid: &OccupancyGrid, margin: f64, rng: &mut R) -> Vec<Pose> {
    scan.beams
        .iter()
        .filter_map(|b| sample_on_beam(&scan.origin, b.angle, b.range, margin, rng))
        .filter(|p| grid.spec().cell_at(p).is_some())
        .collect()
}

/// True iff no Occupied cell (and no out-of-raster cell) has its center within
/// `r_robot` of the segment `a`–`b`. Unknown cells do not block.
pub fn check_edge_validity(grid: &OccupancyGrid, a: &Pose, b: &Pose, r_robot: f64) -> bool {
    if r_robot <= 0.0 {
        return thin_segment_valid(grid, a, b);
    }
    // the thin check is cheaper and rejects most wall crossings
    thin_segment_valid(grid, a, b)
        && grid.spec().cells_near_segment(a, b, r_robot, |cell| match cell {
            None => false,
            Some(c) => !grid.is_occupied(c),
        })
}

/// Checks every cell the segment itself passes through.
fn thin_segment_valid(grid: &OccupancyGrid, a: &Pose, b: &Pose) -> bool {
    let spec = grid.spec();
    if spec.cell_at(a).is_none() || spec.cell_at(b).is_none() {
        return false;
    }
    let len = a.distance(b);
    let angle = (b.y - a.y).atan2(b.x - a.x);
    let mut steps = RayTraversal::new(spec, a, angle, len);
    if len == 0.0 {
        return !grid.is_occupied(spec.cell_at(a).unwrap());
    }
    steps.all(|s| !grid.is_occupied(s.cell)) && !grid.is_occupied(spec.cell_at(b).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Cell, GridSpec};
    use crate::occupancy::OccupancyParams;
    use crate::world::Beam;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn free_grid(w: usize, h: usize) -> OccupancyGrid {
        let mut g = OccupancyGrid::new(GridSpec::new(w, h, 1.0), OccupancyParams::default()).unwrap();
        for r in 0..h {
            for c in 0..w {
                g.set_log_odds(Cell::new(c, r), -7.0);
            }
        }
        g
    }

    fn cfg() -> SrmConfig {
        SrmConfig { min_edge_len: 0.5, r_robot: 0.0, ..Default::default() }
    }

    #[test]
    fn too_close_candidate_dropped() {
        let g = free_grid(10, 10);
        let mut graph = SrmGraph::new(Pose::new(5.0, 5.0), SemanticLabel::Unlabeled);
        let out = graph.try_insert(Pose::new(5.1, 5.0), &g, &cfg(), |_| SemanticLabel::Unlabeled);
        assert_eq!(out, InsertOutcome::Dropped(DropReason::TooClose));
        assert_eq!(graph.len(), 1);
    }

    #[test]
    fn candidate_behind_wall_dropped() {
        let mut g = free_grid(15, 15);
        for r in 0..15 {
            g.set_log_odds(Cell::new(7, r), 7.0);
        }
        let mut graph = SrmGraph::new(Pose::new(3.5, 7.5), SemanticLabel::Unlabeled);
        let out = graph.try_insert(Pose::new(11.5, 7.5), &g, &cfg(), |_| SemanticLabel::Unlabeled);
        assert_eq!(out, InsertOutcome::Dropped(DropReason::NoValidEdge));
        let out = graph.try_insert(Pose::new(7.5, 3.5), &g, &cfg(), |_| SemanticLabel::Unlabeled);
        assert_eq!(out, InsertOutcome::Dropped(DropReason::InCollision));
    }

    #[test]
    fn unknown_cells_do_not_block_edges() {
        let g = OccupancyGrid::new(GridSpec::new(10, 10, 1.0), OccupancyParams::default()).unwrap();
        assert!(check_edge_validity(&g, &Pose::new(1.5, 1.5), &Pose::new(8.5, 7.5), 1.0));
    }

    #[test]
    fn single_occupied_cell_blocks() {
        let mut g = free_grid(10, 10);
        assert!(check_edge_validity(&g, &Pose::new(1.5, 5.5), &Pose::new(8.5, 5.5), 0.0));
        g.set_log_odds(Cell::new(4, 5), 7.0);
        assert!(!check_edge_validity(&g, &Pose::new(1.5, 5.5), &Pose::new(8.5, 5.5), 0.0));
        assert!(!check_edge_validity(&g, &Pose::new(1.5, 6.5), &Pose::new(8.5, 6.5), 1.0));
        assert!(check_edge_validity(&g, &Pose::new(1.5, 7.5), &Pose::new(8.5, 7.5), 1.0));
    }

    #[test]
    fn astar_from_equals_to() {
        let graph = SrmGraph::new(Pose::new(1.0, 1.0), SemanticLabel::Unlabeled);
        let p = graph.shortest_path(0, 0).unwrap();
        assert_eq!(p.node_ids, vec![0]);
        assert_eq!(p.length, 0.0);
        assert_eq!(graph.shortest_path(0, 3), Err(PlanError::UnknownNode(3)));
    }

    #[test]
    fn nearest_node_tie_breaks_by_id() {
        let mut graph = SrmGraph::new(Pose::new(0.0, 0.0), SemanticLabel::Unlabeled);
        for i in 1..8 {
            graph.add_node(Pose::new(10.0 + i as f64, 10.0), SemanticLabel::Unlabeled);
        }
        graph.node_mut(3).unwrap().position = Pose::new(4.0, 5.0);
        graph.node_mut(7).unwrap().position = Pose::new(6.0, 5.0);
        assert_eq!(graph.nearest_node(&Pose::new(5.0, 5.0)), 3);
        assert_eq!(graph.nearest_node(&Pose::new(0.0, 0.0)), 0);
    }

    #[test]
    fn sampled_candidates_lie_on_beams() {
        let g = free_grid(20, 20);
        let scan = LaserScan {
            origin: Pose::new(10.0, 10.0),
            max_range: 4.0,
            beams: (0..16)
                .map(|i| Beam { angle: i as f64 * std::f64::consts::TAU / 16.0, range: 4.0, hit: false })
                .collect(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = sample_candidates(&scan, &g, 0.05, &mut rng);
        assert_eq!(pts.len(), 16);
        for (p, b) in pts.iter().zip(&scan.beams) {
            let d = p.distance(&scan.origin);
            assert!(d > 0.0 && d <= 3.8 + 1e-12);
            let ang = (p.y - 10.0).atan2(p.x - 10.0);
            let diff = (ang - b.angle).rem_euclid(std::f64::consts::TAU);
            assert!(diff < 1e-9 || (std::f64::consts::TAU - diff) < 1e-9);
        }
        let again = sample_candidates(&scan, &g, 0.05, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(format!("{pts:?}"), format!("{again:?}"));
    }

    #[test]
    fn replan_noop_when_valid() {
        let g = free_grid(10, 10);
        let mut graph = SrmGraph::new(Pose::new(1.5, 1.5), SemanticLabel::Unlabeled);
        let a = graph.add_node(Pose::new(5.5, 1.5), SemanticLabel::Unlabeled);
        let b = graph.add_node(Pose::new(8.5, 1.5), SemanticLabel::Unlabeled);
        graph.add_edge(0, a);
        graph.add_edge(a, b);
        let p = graph.shortest_path(0, b).unwrap();
        assert_eq!(graph.invalidate_and_replan(&p, &g, 0.0).unwrap(), p);
    }

    #[test]
    fn sealed_target_unreachable() {
        let mut g = free_grid(12, 12);
        let mut graph = SrmGraph::new(Pose::new(1.5, 1.5), SemanticLabel::Unlabeled);
        let t = graph.add_node(Pose::new(9.5, 9.5), SemanticLabel::Unlabeled);
        graph.add_edge(0, t);
        // seal the target in a box of walls
        for i in 7..12 {
            g.set_log_odds(Cell::new(i, 7), 7.0);
            g.set_log_odds(Cell::new(7, i), 7.0);
        }
        let p = SparsePath { node_ids: vec![0, t], length: graph.position(0).distance(&graph.position(t)) };
        assert!(matches!(graph.invalidate_and_replan(&p, &g, 0.0), Err(PlanError::Unreachable { .. })));
        assert!(!graph.has_edge(0, t));
    }

    #[test]
    fn snapshot_round_trip() {
        let mut graph = SrmGraph::new(Pose::new(1.5, 1.5), SemanticLabel::Room(2));
        let a = graph.add_node(Pose::new(5.5, 1.5), SemanticLabel::Connection(0));
        graph.add_edge(0, a);
        let json = serde_json::to_string(&graph.to_snapshot()).unwrap();
        let back = SrmGraph::from_snapshot(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, graph);
    }
}
