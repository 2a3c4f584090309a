//! Ground-truth world: solid raster, semantic regions, a noise-free range
//! sensor and a point robot that follows polylines.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Cell, GridSpec, Pose, RayTraversal};
use crate::trajectory::Trajectory;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("pose ({x:.3}, {y:.3}) is not on a free cell")]
    InvalidSensingPose { x: f64, y: f64 },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("speed must be positive, got {0}")]
    NonPositiveSpeed(f64),
    #[error("invalid world: {0}")]
    Invalid(String),
}

/// Semantic class of a location.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SemanticLabel {
    Room(u16),
    Connection(u16),
    Unlabeled,
}

impl SemanticLabel {
    pub fn is_room(&self) -> bool {
        matches!(self, SemanticLabel::Room(_))
    }
}

impl fmt::Display for SemanticLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemanticLabel::Room(i) => write!(f, "room:{i}"),
            SemanticLabel::Connection(i) => write!(f, "connection:{i}"),
            SemanticLabel::Unlabeled => write!(f, "unlabeled"),
        }
    }
}

/// Inclusive cell rectangle `[x0, y0, x1, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl CellRect {
    pub fn contains(&self, cell: Cell) -> bool {
        (self.x0..=self.x1).contains(&cell.col) && (self.y0..=self.y1).contains(&cell.row)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (self.y0..=self.y1).flat_map(move |r| (self.x0..=self.x1).map(move |c| Cell::new(c, r)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticRegion {
    pub name: String,
    pub label: SemanticLabel,
    pub footprint: Vec<CellRect>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    pub beam_count: usize,
    pub max_range: f64,
    pub angular_span: f64,
}

impl SensorParams {
    pub fn full_circle(beam_count: usize, max_range: f64) -> Self {
        Self { beam_count, max_range, angular_span: std::f64::consts::TAU }
    }

    pub fn beam_angles(&self) -> impl Iterator<Item = f64> + '_ {
        let full = self.angular_span >= std::f64::consts::TAU - 1e-12;
        let n = self.beam_count;
        let (start, step) = if full || n < 2 {
            (0.0, self.angular_span / n.max(1) as f64)
        } else {
            (-self.angular_span / 2.0, self.angular_span / (n - 1) as f64)
        };
        (0..n).map(move |i| start + step * i as f64)
    }

    pub fn validate(&self, resolution: f64) -> Result<(), WorldError> {
        if self.beam_count < 8 {
            return Err(WorldError::Invalid(format!("beam_count {} < 8", self.beam_count)));
        }
        if !(self.max_range > resolution) {
            return Err(WorldError::Invalid(format!(
                "max_range {} must exceed resolution {}",
                self.max_range, resolution
            )));
        }
        Ok(())
    }
}

impl Default for SensorParams {
    fn default() -> Self {
        Self::full_circle(64, 4.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    pub angle: f64,
    pub range: f64,
    pub hit: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserScan {
    pub origin: Pose,
    pub max_range: f64,
    pub beams: Vec<Beam>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldModel {
    spec: GridSpec,
    solid: Vec<bool>,
    regions: Vec<SemanticRegion>,
    region_of: Vec<u16>,
    pub start_pose: Pose,
}

const NO_REGION: u16 = u16::MAX;

impl WorldModel {
    /// Builds a world and checks its invariants: region footprints in bounds,
    /// regions disjoint over free cells, labels unique, start on a free cell.
    pub fn new(
        spec: GridSpec,
        solid: Vec<bool>,
        regions: Vec<SemanticRegion>,
        start_pose: Pose,
    ) -> Result<Self, WorldError> {
        if solid.len() != spec.len() || spec.is_empty() {
            return Err(WorldError::Invalid("raster size mismatch".into()));
        }
        let mut region_of = vec![NO_REGION; spec.len()];
        for (ri, region) in regions.iter().enumerate() {
            if region.footprint.is_empty() {
                return Err(WorldError::Invalid(format!("region '{}' has empty footprint", region.name)));
            }
            if regions[..ri].iter().any(|r| r.label == region.label || r.name == region.name) {
                return Err(WorldError::Invalid(format!("duplicate region label '{}'", region.name)));
            }
            for rect in &region.footprint {
                if rect.x0 > rect.x1 || rect.y0 > rect.y1 || rect.x1 >= spec.width || rect.y1 >= spec.height {
                    return Err(WorldError::Invalid(format!("region '{}' rect out of bounds", region.name)));
                }
                for cell in rect.cells() {
                    let idx = spec.index(cell);
                    if solid[idx] {
                        continue;
                    }
                    if region_of[idx] != NO_REGION && region_of[idx] != ri as u16 {
                        return Err(WorldError::Invalid(format!(
                            "regions '{}' and '{}' overlap at cell ({}, {})",
                            regions[region_of[idx] as usize].name, region.name, cell.col, cell.row
                        )));
                    }
                    region_of[idx] = ri as u16;
                }
            }
        }
        let world = Self { spec, solid, regions, region_of, start_pose };
        if !world.is_free_pose(&start_pose) {
            return Err(WorldError::Invalid("start pose is not on a free cell".into()));
        }
        Ok(world)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn regions(&self) -> &[SemanticRegion] {
        &self.regions
    }

    pub fn is_solid(&self, cell: Cell) -> bool {
        self.solid[self.spec.index(cell)]
    }

    pub fn is_free_pose(&self, pose: &Pose) -> bool {
        self.spec.cell_at(pose).map_or(false, |c| !self.is_solid(c))
    }

    pub fn with_start(&self, start: Pose) -> Result<Self, WorldError> {
        let mut w = self.clone();
        if !w.is_free_pose(&start) {
            return Err(WorldError::Invalid("start pose is not on a free cell".into()));
        }
        w.start_pose = start;
        Ok(w)
    }

    /// Free cells 4-connected to the start cell.
    pub fn reachable_free_cells(&self) -> Vec<bool> {
        let mut seen = vec![false; self.spec.len()];
        let Some(start) = self.spec.cell_at(&self.start_pose) else {
            return seen;
        };
        let mut stack = vec![start];
        seen[self.spec.index(start)] = true;
        while let Some(c) = stack.pop() {
            for (dc, dr) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if let Some(n) = self.spec.offset(c, dc, dr) {
                    let i = self.spec.index(n);
                    if !seen[i] && !self.solid[i] {
                        seen[i] = true;
                        stack.push(n);
                    }
                }
            }
        }
        seen
    }

    /// Traces every beam from `pose` through the solid raster.
    pub fn simulate_scan(&self, pose: &Pose, sensor: &SensorParams) -> Result<LaserScan, WorldError> {
        if !self.is_free_pose(pose) {
            return Err(WorldError::InvalidSensingPose { x: pose.x, y: pose.y });
        }
        let beams = sensor
            .beam_angles()
            .map(|angle| {
                let hit = RayTraversal::new(&self.spec, pose, angle, sensor.max_range)
                    .find(|step| self.is_solid(step.cell));
                match hit {
                    Some(step) => Beam { angle, range: step.t_enter, hit: true },
                    None => Beam { angle, range: sensor.max_range, hit: false },
                }
            })
            .collect();
        Ok(LaserScan { origin: *pose, max_range: sensor.max_range, beams })
    }

    /// Ground-truth semantic label of the region containing `pose`.
    pub fn semantic_label_at(&self, pose: &Pose) -> SemanticLabel {
        self.spec
            .cell_at(pose)
            .map(|c| self.region_of[self.spec.index(c)])
            .filter(|&r| r != NO_REGION)
            .map_or(SemanticLabel::Unlabeled, |r| self.regions[r as usize].label)
    }

    pub fn region_name(&self, label: SemanticLabel) -> Option<&str> {
        self.regions.iter().find(|r| r.label == label).map(|r| r.name.as_str())
    }
}

/// Advances `speed * dt` meters of arc length along `trajectory` from the
/// projection of `pose`, clamping at the final waypoint.
pub fn step_motion(pose: &Pose, trajectory: &Trajectory, speed: f64, dt: f64) -> Result<Pose, WorldError> {
    if trajectory.waypoints().is_empty() {
        return Err(WorldError::EmptyTrajectory);
    }
    if !(speed > 0.0) {
        return Err(WorldError::NonPositiveSpeed(speed));
    }
    let s = trajectory.project(pose);
    Ok(trajectory.point_at(s + speed * dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point_polyline_distance;

    fn boxed_world(w: usize, h: usize, res: f64) -> WorldModel {
        let spec = GridSpec::new(w, h, res);
        let mut solid = vec![false; spec.len()];
        for r in 0..h {
            for c in 0..w {
                if r == 0 || c == 0 || r == h - 1 || c == w - 1 {
                    solid[r * w + c] = true;
                }
            }
        }
        let start = Pose::new(w as f64 * res / 2.0 + 0.013, h as f64 * res / 2.0 + 0.017);
        WorldModel::new(spec, solid, vec![], start).unwrap()
    }

    #[test]
    fn empty_world_all_beams_max_range() {
        let spec = GridSpec::new(200, 200, 0.1);
        let world = WorldModel::new(spec, vec![false; spec.len()], vec![], Pose::new(10.0, 10.0)).unwrap();
        let scan = world.simulate_scan(&Pose::new(10.03, 10.07), &SensorParams::full_circle(64, 5.0)).unwrap();
        assert_eq!(scan.beams.len(), 64);
        assert!(scan.beams.iter().all(|b| !b.hit && b.range == 5.0));
    }

    #[test]
    fn wall_at_one_meter() {
        let spec = GridSpec::new(100, 100, 0.1);
        let mut solid = vec![false; spec.len()];
        for r in 0..100 {
            solid[r * 100 + 60] = true; // wall face at x = 6.0
        }
        let world = WorldModel::new(spec, solid, vec![], Pose::new(5.0, 5.0)).unwrap();
        let scan = world.simulate_scan(&Pose::new(5.0, 5.05), &SensorParams::full_circle(16, 4.0)).unwrap();
        let beam = scan.beams[0];
        assert!(beam.hit);
        assert!((beam.range - 1.0).abs() <= 0.05 + 1e-9);
    }

    #[test]
    fn scan_on_solid_errors() {
        let world = boxed_world(10, 10, 1.0);
        let err = world.simulate_scan(&Pose::new(0.5, 0.5), &SensorParams::default()).unwrap_err();
        assert!(matches!(err, WorldError::InvalidSensingPose { .. }));
    }

    /// Fine-step marcher at a tenth of a cell; independent of the exact traversal.
    fn brute_force_range(world: &WorldModel, pose: &Pose, angle: f64, max_range: f64) -> (f64, bool) {
        let step = world.spec().resolution / 10.0;
        let (s, c) = angle.sin_cos();
        let mut d = 0.0;
        while d < max_range {
            let p = Pose::new(pose.x + c * d, pose.y + s * d);
            match world.spec().cell_at(&p) {
                Some(cell) if world.is_solid(cell) => return (d, true),
                None => return (max_range, false),
                _ => {}
            }
            d += step;
        }
        (max_range, false)
    }

    #[test]
    fn scan_matches_fine_step_marcher_in_small_room() {
        let world = boxed_world(10, 10, 1.0);
        let pose = Pose::new(4.37, 5.21);
        let sensor = SensorParams::full_circle(16, 20.0);
        let scan = world.simulate_scan(&pose, &sensor).unwrap();
        for beam in &scan.beams {
            let (range, hit) = brute_force_range(&world, &pose, beam.angle, sensor.max_range);
            assert_eq!(hit, beam.hit);
            // marcher overshoots the boundary by at most one step
            assert!(range >= beam.range - 1e-9 && range - beam.range <= 0.1 + 1e-9, "{range} vs {}", beam.range);
        }
    }

    #[test]
    fn hit_endpoint_is_solid_and_path_free() {
        let world = boxed_world(30, 20, 0.2);
        let pose = Pose::new(2.11, 1.93);
        let scan = world.simulate_scan(&pose, &SensorParams::full_circle(64, 4.0)).unwrap();
        for beam in scan.beams.iter().filter(|b| b.hit) {
            let cells: Vec<_> = RayTraversal::new(world.spec(), &pose, beam.angle, 4.0)
                .take_while(|s| s.t_enter <= beam.range)
                .collect();
            let (last, before) = cells.split_last().unwrap();
            assert!(world.is_solid(last.cell));
            assert!(before.iter().all(|s| !world.is_solid(s.cell)));
        }
    }

    #[test]
    fn labels_from_regions() {
        let spec = GridSpec::new(20, 10, 1.0);
        let regions = vec![
            SemanticRegion {
                name: "room1".into(),
                label: SemanticLabel::Room(0),
                footprint: vec![CellRect { x0: 0, y0: 0, x1: 9, y1: 9 }],
            },
            SemanticRegion {
                name: "hall".into(),
                label: SemanticLabel::Connection(0),
                footprint: vec![CellRect { x0: 10, y0: 0, x1: 14, y1: 9 }],
            },
        ];
        let world = WorldModel::new(spec, vec![false; spec.len()], regions, Pose::new(1.0, 1.0)).unwrap();
        assert_eq!(world.semantic_label_at(&Pose::new(3.2, 4.1)), SemanticLabel::Room(0));
        assert_eq!(world.semantic_label_at(&Pose::new(12.5, 4.1)), SemanticLabel::Connection(0));
        assert_eq!(world.semantic_label_at(&Pose::new(17.5, 4.1)), SemanticLabel::Unlabeled);
    }

    #[test]
    fn overlapping_regions_rejected() {
        let spec = GridSpec::new(10, 10, 1.0);
        let r = |name: &str, label, x0| SemanticRegion {
            name: name.into(),
            label,
            footprint: vec![CellRect { x0, y0: 0, x1: x0 + 4, y1: 4 }],
        };
        let err = WorldModel::new(
            spec,
            vec![false; 100],
            vec![r("a", SemanticLabel::Room(0), 0), r("b", SemanticLabel::Room(1), 3)],
            Pose::new(0.5, 0.5),
        );
        assert!(err.is_err());
    }

    #[test]
    fn motion_straight_clamp_and_corner() {
        let straight = Trajectory::new(vec![Pose::new(0.0, 0.0), Pose::new(10.0, 0.0)]).unwrap();
        let p = step_motion(&Pose::new(0.0, 0.0), &straight, 1.0, 1.0).unwrap();
        assert!((p.x - 1.0).abs() < 1e-12 && p.y == 0.0);
        let p = step_motion(&Pose::new(9.7, 0.0), &straight, 1.0, 1.0).unwrap();
        assert_eq!(p, Pose::new(10.0, 0.0));

        let ell = Trajectory::new(vec![Pose::new(0.0, 0.0), Pose::new(3.0, 0.0), Pose::new(3.0, 4.0)]).unwrap();
        let p = step_motion(&Pose::new(0.0, 0.0), &ell, 5.0, 1.0).unwrap();
        assert!((p.x - 3.0).abs() < 1e-12 && (p.y - 2.0).abs() < 1e-12);
        assert!(point_polyline_distance(&p, ell.waypoints()) < 1e-9);
    }

    #[test]
    fn motion_rejects_bad_speed() {
        let t = Trajectory::new(vec![Pose::new(0.0, 0.0), Pose::new(1.0, 0.0)]).unwrap();
        assert_eq!(step_motion(&Pose::new(0.0, 0.0), &t, 0.0, 1.0), Err(WorldError::NonPositiveSpeed(0.0)));
    }

    #[test]
    fn scan_is_deterministic() {
        let world = boxed_world(25, 25, 0.2);
        let pose = Pose::new(2.3, 2.7);
        let s = SensorParams::default();
        assert_eq!(world.simulate_scan(&pose, &s).unwrap(), world.simulate_scan(&pose, &s).unwrap());
    }
}
