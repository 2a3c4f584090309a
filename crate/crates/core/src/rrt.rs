//! RRT* comparison planner and the query timing probe used to compare it
//! against roadmap A*.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose;
use crate::occupancy::{CellState, OccupancyGrid};
use crate::rng::substream;
use crate::srm::{check_edge_validity, SrmGraph};
use crate::trajectory::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RrtError {
    #[error("start pose is not on a traversable cell")]
    InvalidStart,
    #[error("no path found within {0} samples")]
    Failure(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RrtConfig {
    pub max_samples: usize,
    pub steer_step: f64,
    /// Neighbor radius constant; `None` derives the 2-D optimality bound from
    /// the traversable area.
    pub neighbor_radius_gamma: Option<f64>,
    pub goal_bias: f64,
    pub goal_tolerance: f64,
    pub r_robot: f64,
}

impl Default for RrtConfig {
    fn default() -> Self {
        Self {
            max_samples: 5000,
            steer_step: 0.5,
            neighbor_radius_gamma: None,
            goal_bias: 0.05,
            goal_tolerance: 0.25,
            r_robot: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RrtStats {
    pub collision_checks: u64,
    pub vertices: usize,
    pub rewires: u64,
    pub first_solution_sample: Option<usize>,
    pub first_solution_us: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RrtPlan {
    pub trajectory: Trajectory,
    pub cost: f64,
    pub stats: RrtStats,
}

#[derive(Clone, Debug)]
struct Vertex {
    pose: Pose,
    parent: usize,
    cost: f64,
    children: Vec<usize>,
}

/// Tree built by [`rrt_star_plan`]; kept public for invariant checks.
#[derive(Clone, Debug, Default)]
pub struct RrtTree {
    vertices: Vec<Vertex>,
}

impl RrtTree {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn cost(&self, i: usize) -> f64 {
        self.vertices[i].cost
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        (i != 0).then(|| self.vertices[i].parent)
    }

    pub fn pose(&self, i: usize) -> Pose {
        self.vertices[i].pose
    }

    fn path_to(&self, mut i: usize) -> Vec<Pose> {
        let mut out = vec![self.vertices[i].pose];
        while i != 0 {
            i = self.vertices[i].parent;
            out.push(self.vertices[i].pose);
        }
        out.reverse();
        out
    }

    /// Cheapest route from the root to `goal` through a vertex within
    /// `connect_radius` whose final edge is valid.
    pub fn route_to(&self, goal: Pose, connect_radius: f64, grid: &OccupancyGrid, r_robot: f64) -> Option<Trajectory> {
        let mut near: Vec<(f64, usize)> = self
            .vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| v.pose.distance(&goal) <= connect_radius)
            .map(|(i, v)| (v.cost + v.pose.distance(&goal), i))
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (_, v) = near.into_iter().find(|&(_, i)| check_edge_validity(grid, &self.vertices[i].pose, &goal, r_robot))?;
        let mut pts = self.path_to(v);
        pts.push(goal);
        Trajectory::new(pts)
    }

    fn reparent(&mut self, child: usize, new_parent: usize, new_cost: f64) {
        let old = self.vertices[child].parent;
        self.vertices[old].children.retain(|&c| c != child);
        self.vertices[new_parent].children.push(child);
        self.vertices[child].parent = new_parent;
        let delta = self.vertices[child].cost - new_cost;
        let mut stack = vec![child];
        while let Some(v) = stack.pop() {
            self.vertices[v].cost -= delta;
            stack.extend(self.vertices[v].children.iter().copied());
        }
    }
}

fn traversable(grid: &OccupancyGrid, p: &Pose) -> bool {
    matches!(grid.state_at_pose(p), Some(CellState::Free) | Some(CellState::Unknown))
}

fn default_gamma(grid: &OccupancyGrid) -> f64 {
    let spec = grid.spec();
    let cell_area = spec.resolution * spec.resolution;
    let free = (0..spec.len()).filter(|&i| grid.state_at_index(i) != CellState::Occupied).count() as f64 * cell_area;
    2.0 * (1.5f64).sqrt() * (free / std::f64::consts::PI).sqrt()
}

/// Plans with RRT* and also returns the final tree.
pub fn rrt_star_plan_with_tree<R: Rng>(
    grid: &OccupancyGrid,
    start: Pose,
    goal: Pose,
    cfg: &RrtConfig,
    rng: &mut R,
) -> (Result<RrtPlan, RrtError>, RrtTree) {
    let clock = Instant::now();
    let mut tree = RrtTree::default();
    if !traversable(grid, &start) {
        return (Err(RrtError::InvalidStart), tree);
    }
    let mut stats = RrtStats::default();
    if start.distance(&goal) <= cfg.goal_tolerance {
        let trajectory = Trajectory::new(vec![start, goal]).expect("finite poses");
        tree.vertices.push(Vertex { pose: start, parent: 0, cost: 0.0, children: Vec::new() });
        let cost = trajectory.length();
        stats.vertices = 1;
        stats.first_solution_sample = Some(0);
        stats.first_solution_us = Some(clock.elapsed().as_secs_f64() * 1e6);
        return (Ok(RrtPlan { trajectory, cost, stats }), tree);
    }
    tree.vertices.push(Vertex { pose: start, parent: 0, cost: 0.0, children: Vec::new() });
    let goal_vertices = grow(grid, &mut tree, Some(goal), cfg, rng, &mut stats, clock);
    stats.vertices = tree.vertices.len();

    let best = goal_vertices
        .iter()
        .map(|&v| (v, tree.vertices[v].cost + tree.vertices[v].pose.distance(&goal)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let result = match best {
        Some((v, _)) => {
            let mut pts = tree.path_to(v);
            pts.push(goal);
            let trajectory = Trajectory::new(pts).expect("finite poses");
            let cost = trajectory.length();
            Ok(RrtPlan { trajectory, cost, stats })
        }
        None => Err(RrtError::Failure(cfg.max_samples)),
    };
    (result, tree)
}

/// Core RRT* loop on a tree holding only the root. Returns the vertices
/// that connect to `goal` within tolerance.
fn grow<R: Rng>(
    grid: &OccupancyGrid,
    tree: &mut RrtTree,
    goal: Option<Pose>,
    cfg: &RrtConfig,
    rng: &mut R,
    stats: &mut RrtStats,
    clock: Instant,
) -> Vec<usize> {
    let gamma = cfg.neighbor_radius_gamma.unwrap_or_else(|| default_gamma(grid));
    let spec = *grid.spec();
    let mut goal_vertices: Vec<usize> = Vec::new();
    let valid = |a: &Pose, b: &Pose, stats: &mut RrtStats| {
        stats.collision_checks += 1;
        check_edge_validity(grid, a, b, cfg.r_robot)
    };

    for sample in 0..cfg.max_samples {
        let target = match goal {
            Some(g) if rng.gen_bool(cfg.goal_bias) => g,
            _ => {
            let mut p;
            let mut tries = 0;
            loop {
                p = Pose::new(rng.gen_range(0.0..spec.width_m()), rng.gen_range(0.0..spec.height_m()));
                tries += 1;
                if traversable(grid, &p) || tries > 50 {
                    break;
                }
            }
            p
            }
        };
        let (nearest, d_near) = tree
            .vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.pose.distance(&target)))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        if d_near < 1e-9 {
            continue;
        }
        let from = tree.vertices[nearest].pose;
        let new = if d_near <= cfg.steer_step { target } else { from.lerp(&target, cfg.steer_step / d_near) };
        if !traversable(grid, &new) || !valid(&from, &new, stats) {
            continue;
        }
        let n = tree.vertices.len() as f64 + 1.0;
        // shrinking ball, capped so early iterations do not scan the whole map
        let radius = (gamma * (n.ln() / n).sqrt()).min(4.0 * cfg.steer_step);
        let near: Vec<usize> = tree
            .vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| v.pose.distance(&new) <= radius)
            .map(|(i, _)| i)
            .collect();

        let mut parent = nearest;
        let mut cost = tree.vertices[nearest].cost + from.distance(&new);
        for &i in &near {
            if i == nearest {
                continue;
            }
            let c = tree.vertices[i].cost + tree.vertices[i].pose.distance(&new);
            if c < cost && valid(&tree.vertices[i].pose, &new, stats) {
                parent = i;
                cost = c;
            }
        }
        let id = tree.vertices.len();
        tree.vertices.push(Vertex { pose: new, parent, cost, children: Vec::new() });
        tree.vertices[parent].children.push(id);

        for &i in &near {
            if i == parent {
                continue;
            }
            let c = cost + new.distance(&tree.vertices[i].pose);
            if c < tree.vertices[i].cost && valid(&new, &tree.vertices[i].pose, stats) {
                tree.reparent(i, id, c);
                stats.rewires += 1;
            }
        }

        let Some(goal) = goal else { continue };
        if new.distance(&goal) <= cfg.goal_tolerance && valid(&new, &goal, stats) {
            goal_vertices.push(id);
            if stats.first_solution_sample.is_none() {
                stats.first_solution_sample = Some(sample);
                stats.first_solution_us = Some(clock.elapsed().as_secs_f64() * 1e6);
            }
        }
    }
    goal_vertices
}

/// Grows a goal-free RRT* tree from `start` for `cfg.max_samples` samples.
/// One tree answers cost queries to many goals via [`RrtTree::route_to`].
pub fn rrt_star_tree<R: Rng>(
    grid: &OccupancyGrid,
    start: Pose,
    cfg: &RrtConfig,
    rng: &mut R,
) -> Result<(RrtTree, RrtStats), RrtError> {
    if !traversable(grid, &start) {
        return Err(RrtError::InvalidStart);
    }
    let mut tree = RrtTree::default();
    tree.vertices.push(Vertex { pose: start, parent: 0, cost: 0.0, children: Vec::new() });
    let mut stats = RrtStats::default();
    grow(grid, &mut tree, None, cfg, rng, &mut stats, Instant::now());
    stats.vertices = tree.vertices.len();
    Ok((tree, stats))
}

pub fn rrt_star_plan<R: Rng>(
    grid: &OccupancyGrid,
    start: Pose,
    goal: Pose,
    cfg: &RrtConfig,
    rng: &mut R,
) -> Result<RrtPlan, RrtError> {
    rrt_star_plan_with_tree(grid, start, goal, cfg, rng).0
}

/// Planner under test in a timing probe.
pub enum ProbePlanner<'a> {
    SrmAstar(&'a SrmGraph),
    RrtStar { grid: &'a OccupancyGrid, cfg: RrtConfig, seed: u64 },
}

impl ProbePlanner<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            ProbePlanner::SrmAstar(_) => "srm-astar",
            ProbePlanner::RrtStar { .. } => "rrt-star",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub query_id: usize,
    pub elapsed_us: f64,
    pub first_solution_us: Option<f64>,
    pub collision_checks: u64,
    pub nodes_expanded: u64,
    pub success: bool,
    pub path_length: Option<f64>,
}

/// Runs every query through `planner`, measuring wall time and work counts.
/// SRM queries map each pose to its nearest roadmap node.
pub fn timing_probe(planner: &ProbePlanner<'_>, queries: &[(Pose, Pose)]) -> Vec<TimingRecord> {
    queries
        .iter()
        .enumerate()
        .map(|(query_id, (start, goal))| match planner {
            ProbePlanner::SrmAstar(graph) => {
                let clock = Instant::now();
                let from = graph.nearest_node(start);
                let to = graph.nearest_node(goal);
                let result = graph.shortest_path_with_stats(from, to);
                let elapsed_us = clock.elapsed().as_secs_f64() * 1e6;
                match result {
                    Ok((path, stats)) => TimingRecord {
                        query_id,
                        elapsed_us,
                        first_solution_us: Some(elapsed_us),
                        collision_checks: 0,
                        nodes_expanded: stats.nodes_expanded,
                        success: true,
                        path_length: Some(path.length),
                    },
                    Err(_) => TimingRecord {
                        query_id,
                        elapsed_us,
                        first_solution_us: None,
                        collision_checks: 0,
                        nodes_expanded: 0,
                        success: false,
                        path_length: None,
                    },
                }
            }
            ProbePlanner::RrtStar { grid, cfg, seed } => {
                let mut rng = substream(*seed, "rrt-probe", &[query_id as u64]);
                let clock = Instant::now();
                let (result, tree) = rrt_star_plan_with_tree(grid, *start, *goal, cfg, &mut rng);
                let elapsed_us = clock.elapsed().as_secs_f64() * 1e6;
                match result {
                    Ok(plan) => TimingRecord {
                        query_id,
                        elapsed_us,
                        first_solution_us: plan.stats.first_solution_us,
                        collision_checks: plan.stats.collision_checks,
                        nodes_expanded: plan.stats.vertices as u64,
                        success: true,
                        path_length: Some(plan.cost),
                    },
                    Err(_) => TimingRecord {
                        query_id,
                        elapsed_us,
                        first_solution_us: None,
                        collision_checks: 0,
                        nodes_expanded: tree.len() as u64,
                        success: false,
                        path_length: None,
                    },
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Cell, GridSpec};
    use crate::occupancy::OccupancyParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn open_grid(w: usize, h: usize, res: f64) -> OccupancyGrid {
        let mut g = OccupancyGrid::new(GridSpec::new(w, h, res), OccupancyParams::default()).unwrap();
        for r in 0..h {
            for c in 0..w {
                g.set_log_odds(Cell::new(c, r), -7.0);
            }
        }
        g
    }

    #[test]
    fn trivial_when_within_tolerance() {
        let g = open_grid(10, 10, 1.0);
        let plan = rrt_star_plan(&g, Pose::new(5.0, 5.0), Pose::new(5.1, 5.0), &RrtConfig::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(plan.trajectory.waypoints().len(), 2);
    }

    #[test]
    fn sealed_goal_fails() {
        let mut g = open_grid(20, 20, 0.5);
        for i in 12..20 {
            g.set_log_odds(Cell::new(i, 12), 7.0);
            g.set_log_odds(Cell::new(12, i), 7.0);
        }
        let cfg = RrtConfig { max_samples: 500, ..Default::default() };
        let res = rrt_star_plan(&g, Pose::new(1.0, 1.0), Pose::new(8.5, 8.5), &cfg, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(res, Err(RrtError::Failure(500)));
    }

    #[test]
    fn tree_costs_consistent_and_path_valid() {
        let mut g = open_grid(40, 40, 0.25);
        for r in 0..30 {
            g.set_log_odds(Cell::new(20, r), 7.0);
        }
        let cfg = RrtConfig { max_samples: 1500, ..Default::default() };
        let (res, tree) = rrt_star_plan_with_tree(&g, Pose::new(1.0, 1.0), Pose::new(9.0, 1.0), &cfg, &mut ChaCha8Rng::seed_from_u64(3));
        for i in 1..tree.len() {
            let p = tree.parent(i).unwrap();
            let expect = tree.cost(p) + tree.pose(p).distance(&tree.pose(i));
            assert!((tree.cost(i) - expect).abs() < 1e-9);
        }
        let plan = res.unwrap();
        assert!(plan.trajectory.waypoints().windows(2).all(|w| check_edge_validity(&g, &w[0], &w[1], cfg.r_robot)));
        assert_eq!(plan.trajectory.end(), Pose::new(9.0, 1.0));
    }

    #[test]
    fn fixed_seed_reproducible() {
        let g = open_grid(30, 30, 0.5);
        let cfg = RrtConfig { max_samples: 800, ..Default::default() };
        let a = rrt_star_plan(&g, Pose::new(1.0, 1.0), Pose::new(13.0, 12.0), &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = rrt_star_plan(&g, Pose::new(1.0, 1.0), Pose::new(13.0, 12.0), &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
    }

    #[test]
    fn empty_probe_is_empty() {
        let graph = SrmGraph::new(Pose::new(0.5, 0.5), crate::world::SemanticLabel::Unlabeled);
        assert!(timing_probe(&ProbePlanner::SrmAstar(&graph), &[]).is_empty());
    }

    #[test]
    fn shared_tree_routes_to_many_goals() {
        let g = open_grid(30, 30, 0.5);
        let cfg = RrtConfig { max_samples: 1500, ..Default::default() };
        let (tree, _) = rrt_star_tree(&g, Pose::new(1.0, 1.0), &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        for goal in [Pose::new(13.0, 13.0), Pose::new(2.0, 12.0), Pose::new(12.0, 3.0)] {
            let t = tree.route_to(goal, 1.0, &g, cfg.r_robot).unwrap();
            assert_eq!(t.start(), Pose::new(1.0, 1.0));
            assert_eq!(t.end(), goal);
            assert!(t.length() < 1.3 * Pose::new(1.0, 1.0).distance(&goal));
        }
    }
}
