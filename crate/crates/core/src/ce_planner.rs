//! Informative path optimization with the cross-entropy method.
//!
//! A roadmap path is refined by treating each of its interior vertices as
//! the mean of a 2-D Gaussian. Every iteration draws whole waypoint
//! sequences from those Gaussians, scores them with
//! `C = -I(P) * exp(-lambda * len(P))`, keeps the elite quantile and refits
//! each Gaussian to the elite waypoints. Sampled paths must stay
//! collision-free and no longer than the seed path, so the seed is always a
//! valid fallback.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::Pose;
use crate::occupancy::{OccupancyGrid, VisibilitySet};
use crate::rng::substream;
use crate::srm::check_edge_validity;
use crate::world::SensorParams;

pub use crate::trajectory::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CEConfig {
    /// Per-meter decay of the reward.
    pub lambda: f64,
    pub sample_count: usize,
    pub elite_fraction: f64,
    pub max_iters: usize,
    pub sigma0: f64,
    pub sigma_floor: f64,
    pub alpha: f64,
    pub pose_sample_interval: f64,
    pub infeasible_retry_limit: usize,
}

impl Default for CEConfig {
    fn default() -> Self {
        Self {
            lambda: 0.2,
            sample_count: 50,
            elite_fraction: 0.2,
            max_iters: 30,
            sigma0: 0.8,
            sigma_floor: 0.05,
            alpha: 0.7,
            pose_sample_interval: 0.5,
            infeasible_retry_limit: 5,
        }
    }
}

impl CEConfig {
    pub fn elite_count(&self) -> usize {
        (self.elite_fraction * self.sample_count as f64).ceil() as usize
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.sample_count < 10 {
            return Err(format!("sample_count {} < 10", self.sample_count));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) || self.elite_count() < 2 {
            return Err(format!("elite fraction {} gives fewer than 2 elites", self.elite_fraction));
        }
        if !(self.sigma_floor > 0.0) || !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err("sigma_floor must be > 0 and alpha in (0, 1]".into());
        }
        if !(self.pose_sample_interval > 0.0) {
            return Err("pose_sample_interval must be > 0".into());
        }
        Ok(())
    }
}

/// Symmetric 2x2 covariance `[[xx, xy], [xy, yy]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cov2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Cov2 {
    pub fn isotropic(var: f64) -> Self {
        Self { xx: var, xy: 0.0, yy: var }
    }

    /// Eigenvalues (ascending) and the unit eigenvector of the larger one.
    pub fn eigen(&self) -> (f64, f64, (f64, f64)) {
        let tr = self.xx + self.yy;
        let diff = self.xx - self.yy;
        let disc = (diff * diff / 4.0 + self.xy * self.xy).sqrt();
        let hi = tr / 2.0 + disc;
        let lo = tr / 2.0 - disc;
        let v = if self.xy.abs() > 1e-300 {
            let (vx, vy) = (hi - self.yy, self.xy);
            let n = vx.hypot(vy);
            (vx / n, vy / n)
        } else if self.xx >= self.yy {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        (lo, hi, v)
    }

    /// Clamps both eigenvalues to at least `min_var`.
    pub fn floored(&self, min_var: f64) -> Self {
        let (lo, hi, (vx, vy)) = self.eigen();
        let lo = lo.max(min_var);
        let hi = hi.max(min_var);
        // hi along v, lo along v-perp
        Self {
            xx: hi * vx * vx + lo * vy * vy,
            xy: (hi - lo) * vx * vy,
            yy: hi * vy * vy + lo * vx * vx,
        }
    }

    pub fn max_std(&self) -> f64 {
        self.eigen().1.max(0.0).sqrt()
    }

    fn cholesky(&self) -> (f64, f64, f64) {
        let l11 = self.xx.max(0.0).sqrt();
        let l21 = if l11 > 0.0 { self.xy / l11 } else { 0.0 };
        let l22 = (self.yy - l21 * l21).max(0.0).sqrt();
        (l11, l21, l22)
    }

    fn blend(&self, other: &Cov2, alpha: f64) -> Cov2 {
        Cov2 {
            xx: alpha * other.xx + (1.0 - alpha) * self.xx,
            xy: alpha * other.xy + (1.0 - alpha) * self.xy,
            yy: alpha * other.yy + (1.0 - alpha) * self.yy,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub mean: Pose,
    pub cov: Cov2,
}

impl GmmComponent {
    fn sample<R: Rng>(&self, rng: &mut R) -> Pose {
        let (l11, l21, l22) = self.cov.cholesky();
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        Pose::new(self.mean.x + l11 * z1, self.mean.y + l21 * z1 + l22 * z2)
    }
}

/// One Gaussian per interior waypoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub components: Vec<GmmComponent>,
}

/// Per-iteration record of the optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CeIteration {
    pub iteration: usize,
    pub best_reward: f64,
    pub quantile: f64,
    pub max_std: f64,
    pub feasible_samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CeOutcome {
    pub trajectory: Trajectory,
    pub reward: f64,
    pub seed_reward: f64,
    pub params: GmmParams,
    pub trace: Vec<CeIteration>,
    /// True when the seed path was returned because nothing beat it.
    pub fell_back: bool,
}

/// Entropy of the union of cells visible from poses sampled every
/// `interval` meters along the trajectory.
pub fn path_information(traj: &Trajectory, grid: &OccupancyGrid, sensor: &SensorParams, interval: f64) -> f64 {
    let mut vis = VisibilitySet::new(grid.spec());
    path_information_with(traj, grid, sensor, interval, &mut vis)
}

pub fn path_information_with(
    traj: &Trajectory,
    grid: &OccupancyGrid,
    sensor: &SensorParams,
    interval: f64,
    vis: &mut VisibilitySet,
) -> f64 {
    vis.clear();
    for pose in traj.sample_every(interval) {
        if grid.spec().cell_at(&pose).is_some() {
            vis.add_view(grid, &pose, sensor);
        }
    }
    vis.entropy(grid)
}

/// `-info * exp(-lambda * length)`; lower is better.
pub fn reward_value(info: f64, length: f64, lambda: f64) -> f64 {
    if info == 0.0 {
        return 0.0;
    }
    -info * (-lambda * length).exp()
}

pub fn reward(traj: &Trajectory, grid: &OccupancyGrid, sensor: &SensorParams, cfg: &CEConfig) -> f64 {
    reward_value(path_information(traj, grid, sensor, cfg.pose_sample_interval), traj.length(), cfg.lambda)
}

/// Collision-free (with inflation) and no longer than `max_length`.
pub fn feasible(traj: &Trajectory, grid: &OccupancyGrid, max_length: f64, r_robot: f64) -> bool {
    traj.length() <= max_length + 1e-9
        && traj.waypoints().windows(2).all(|w| check_edge_validity(grid, &w[0], &w[1], r_robot))
}

/// Seed-derived RNG stream for sample `sample` of iteration `iteration`.
fn sample_rng(seed: u64, iteration: usize, sample: usize) -> crate::rng::Rng {
    substream(seed, "ce-sample", &[iteration as u64, sample as u64])
}

struct Sample {
    interior: Vec<Pose>,
    reward: f64,
}

/// Optimizes the interior waypoints of `seed_path`; endpoints stay fixed.
pub fn ce_optimize(
    seed_path: &Trajectory,
    grid: &OccupancyGrid,
    sensor: &SensorParams,
    cfg: &CEConfig,
    r_robot: f64,
    seed: u64,
) -> CeOutcome {
    let seed_info = path_information(seed_path, grid, sensor, cfg.pose_sample_interval);
    let seed_reward = reward_value(seed_info, seed_path.length(), cfg.lambda);
    let mut params = GmmParams {
        components: seed_path
            .interior()
            .iter()
            .map(|&mean| GmmComponent { mean, cov: Cov2::isotropic(cfg.sigma0 * cfg.sigma0) })
            .collect(),
    };
    let mut outcome = CeOutcome {
        trajectory: seed_path.clone(),
        reward: seed_reward,
        seed_reward,
        params: params.clone(),
        trace: Vec::new(),
        fell_back: true,
    };
    if params.components.is_empty() {
        return outcome;
    }

    let max_length = seed_path.length();
    let start = seed_path.start();
    let end = seed_path.end();
    let build = |interior: &[Pose]| {
        let mut pts = Vec::with_capacity(interior.len() + 2);
        pts.push(start);
        pts.extend_from_slice(interior);
        pts.push(end);
        Trajectory::new(pts)
    };
    let floor_var = cfg.sigma_floor * cfg.sigma_floor;
    let elite_count = cfg.elite_count().max(2);
    let mut best_interior = seed_path.interior().to_vec();
    let mut best_reward = seed_reward;
    let mut stalls = 0;
    let mut flat_iters = 0;

    for iteration in 0..cfg.max_iters {
        let samples: Vec<Sample> = (0..cfg.sample_count)
            .into_par_iter()
            .map_init(
                || VisibilitySet::new(grid.spec()),
                |vis, i| {
                    let mut rng = sample_rng(seed, iteration, i);
                    for _ in 0..=cfg.infeasible_retry_limit {
                        let interior: Vec<Pose> = params.components.iter().map(|c| c.sample(&mut rng)).collect();
                        let Some(traj) = build(&interior) else { continue };
                        if !feasible(&traj, grid, max_length, r_robot) {
                            continue;
                        }
                        let info = path_information_with(&traj, grid, sensor, cfg.pose_sample_interval, vis);
                        return Sample { interior, reward: reward_value(info, traj.length(), cfg.lambda) };
                    }
                    Sample { interior: Vec::new(), reward: f64::INFINITY }
                },
            )
            .collect();

        let mut order: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].reward.is_finite()).collect();
        let feasible_samples = order.len();
        let prev_best = best_reward;
        if order.is_empty() {
            stalls += 1;
            outcome.trace.push(CeIteration {
                iteration,
                best_reward,
                quantile: f64::INFINITY,
                max_std: max_std(&params),
                feasible_samples,
            });
            if stalls >= 3 {
                break;
            }
            continue;
        }
        order.sort_by(|&a, &b| samples[a].reward.total_cmp(&samples[b].reward).then(a.cmp(&b)));
        order.truncate(elite_count);
        let quantile = samples[*order.last().unwrap()].reward;

        if samples[order[0]].reward < best_reward {
            best_reward = samples[order[0]].reward;
            best_interior = samples[order[0]].interior.clone();
        }

        let n = order.len() as f64;
        for (k, comp) in params.components.iter_mut().enumerate() {
            let (mut mx, mut my) = (0.0, 0.0);
            for &i in &order {
                mx += samples[i].interior[k].x;
                my += samples[i].interior[k].y;
            }
            mx /= n;
            my /= n;
            let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
            for &i in &order {
                let dx = samples[i].interior[k].x - mx;
                let dy = samples[i].interior[k].y - my;
                sxx += dx * dx;
                sxy += dx * dy;
                syy += dy * dy;
            }
            let elite_cov = Cov2 { xx: sxx / n, xy: sxy / n, yy: syy / n };
            comp.mean = comp.mean.lerp(&Pose::new(mx, my), cfg.alpha);
            comp.cov = comp.cov.blend(&elite_cov, cfg.alpha).floored(floor_var);
        }

        let spread = max_std(&params);
        outcome.trace.push(CeIteration { iteration, best_reward, quantile, max_std: spread, feasible_samples });

        if prev_best - best_reward < 1e-6 {
            flat_iters += 1;
        } else {
            flat_iters = 0;
        }
        if spread < cfg.sigma_floor * 1.5 || flat_iters >= 3 {
            break;
        }
    }

    outcome.params = params;
    if best_reward <= seed_reward {
        if let Some(traj) = build(&best_interior) {
            outcome.fell_back = best_interior.as_slice() == seed_path.interior();
            outcome.trajectory = traj;
            outcome.reward = best_reward;
        }
    }
    outcome
}

fn max_std(params: &GmmParams) -> f64 {
    params.components.iter().map(|c| c.cov.max_std()).fold(0.0, f64::max)
}

/// CSV rendering of an optimizer trace.
pub fn trace_csv(trace: &[CeIteration]) -> String {
    let mut out = String::from("iteration,best_reward,quantile,max_std,feasible_samples\n");
    for t in trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            t.iteration, t.best_reward, t.quantile, t.max_std, t.feasible_samples
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Cell, GridSpec};
    use crate::occupancy::OccupancyParams;

    fn certain_grid(w: usize, h: usize) -> OccupancyGrid {
        let params = OccupancyParams { clamp_min: -1000.0, clamp_max: 1000.0, ..Default::default() };
        let mut g = OccupancyGrid::new(GridSpec::new(w, h, 1.0), params).unwrap();
        for r in 0..h {
            for c in 0..w {
                g.set_log_odds(Cell::new(c, r), -1000.0);
            }
        }
        g
    }

    #[test]
    fn reward_formula() {
        assert!((reward_value(10.0, 5.0, 0.2) - (-10.0 * (-1.0f64).exp())).abs() < 1e-12);
        assert_eq!(reward_value(0.0, 123.0, 0.2), 0.0);
        assert_eq!(reward_value(7.5, 40.0, 0.0), -7.5);
    }

    #[test]
    fn reward_magnitude_shrinks_with_lambda() {
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let c = reward_value(12.0, 3.0, k as f64 * 0.1).abs();
            assert!(c < prev);
            prev = c;
        }
    }

    #[test]
    fn info_zero_in_certain_space() {
        let g = certain_grid(20, 20);
        let t = Trajectory::new(vec![Pose::new(2.5, 2.5), Pose::new(15.5, 12.5)]).unwrap();
        assert_eq!(path_information(&t, &g, &SensorParams::full_circle(32, 4.0), 0.5), 0.0);
    }

    #[test]
    fn union_semantics() {
        // two sealed 1-cell unknown pockets, each visible from one pose only
        let mut g = certain_grid(30, 5);
        for c in 0..30 {
            g.set_log_odds(Cell::new(c, 0), 1000.0);
            g.set_log_odds(Cell::new(c, 4), 1000.0);
        }
        g.set_log_odds(Cell::new(15, 1), 1000.0);
        g.set_log_odds(Cell::new(15, 2), 1000.0);
        g.set_log_odds(Cell::new(15, 3), 1000.0);
        g.set_log_odds(Cell::new(3, 3), 0.0);
        g.set_log_odds(Cell::new(26, 3), 0.0);
        let sensor = SensorParams::full_circle(360, 6.0);
        let left = Trajectory::new(vec![Pose::new(2.5, 2.5), Pose::new(3.5, 2.5)]).unwrap();
        let both = Trajectory::new(vec![Pose::new(2.5, 2.5), Pose::new(3.5, 2.5), Pose::new(3.5, 2.5)]).unwrap();
        assert_eq!(path_information(&left, &g, &sensor, 0.5), 1.0);
        assert_eq!(path_information(&both, &g, &sensor, 0.5), 1.0);
        let mut open = g.clone();
        for r in 1..4 {
            open.set_log_odds(Cell::new(15, r), -1000.0);
        }
        let long = Trajectory::new(vec![Pose::new(2.5, 2.5), Pose::new(27.5, 2.5)]).unwrap();
        assert_eq!(path_information(&long, &open, &sensor, 0.5), 2.0);
    }

    #[test]
    fn feasibility_rules() {
        let mut g = certain_grid(20, 20);
        let seed = Trajectory::new(vec![Pose::new(2.5, 2.5), Pose::new(10.5, 2.5), Pose::new(10.5, 10.5)]).unwrap();
        assert!(feasible(&seed, &g, seed.length(), 0.5));
        let longer = Trajectory::new(vec![Pose::new(2.5, 2.5), Pose::new(12.5, 2.5), Pose::new(10.5, 10.5)]).unwrap();
        assert!(!feasible(&longer, &g, seed.length(), 0.5));
        g.set_log_odds(Cell::new(6, 3), 1000.0);
        assert!(!feasible(&seed, &g, seed.length(), 1.0));
        assert!(feasible(&seed, &g, seed.length(), 0.4));
    }

    #[test]
    fn straight_seed_unchanged() {
        let g = certain_grid(10, 10);
        let seed = Trajectory::new(vec![Pose::new(1.5, 1.5), Pose::new(8.5, 8.5)]).unwrap();
        let out = ce_optimize(&seed, &g, &SensorParams::default(), &CEConfig::default(), 0.3, 1);
        assert_eq!(out.trajectory, seed);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn certain_environment_falls_back_to_seed() {
        let g = certain_grid(20, 20);
        let seed = Trajectory::new(vec![Pose::new(2.5, 2.5), Pose::new(9.5, 14.5), Pose::new(16.5, 2.5)]).unwrap();
        let out = ce_optimize(&seed, &g, &SensorParams::full_circle(16, 3.0), &CEConfig::default(), 0.3, 9);
        assert_eq!(out.trajectory, seed);
        assert_eq!(out.reward, 0.0);
        assert!(out.fell_back);
    }

    #[test]
    fn covariance_floor_and_eigen() {
        let c = Cov2 { xx: 4.0, xy: 1.5, yy: 1.0 };
        let (lo, hi, _) = c.eigen();
        assert!((lo + hi - 5.0).abs() < 1e-12);
        assert!((lo * hi - (4.0 - 2.25)).abs() < 1e-12);
        let f = Cov2 { xx: 1e-6, xy: 0.0, yy: 2.0 }.floored(0.01);
        assert!((f.xx - 0.01).abs() < 1e-12 && (f.yy - 2.0).abs() < 1e-12);
        let g = c.floored(0.1);
        assert!((g.xx - c.xx).abs() < 1e-12 && (g.xy - c.xy).abs() < 1e-12);
    }
}
