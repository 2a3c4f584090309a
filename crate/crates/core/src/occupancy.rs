//! Log-odds occupancy belief, scan integration, entropy and
//! visibility-based information gain.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Cell, GridSpec, Pose, RayTraversal};
use crate::world::{LaserScan, SensorParams};

#[derive(Debug, Error, PartialEq)]
pub enum OccupancyError {
    #[error("scan origin ({x:.3}, {y:.3}) outside the grid")]
    OriginOutOfBounds { x: f64, y: f64 },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("pose ({x:.3}, {y:.3}) is not on a free belief cell")]
    PoseNotFree { x: f64, y: f64 },
    #[error("invalid occupancy parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

/// How Unknown cells behave for gain ray casting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnknownVisibility {
    Transparent,
    Opaque,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyParams {
    pub l_occ: f64,
    pub l_free: f64,
    pub clamp_min: f64,
    pub clamp_max: f64,
    pub p_free_threshold: f64,
    pub p_occ_threshold: f64,
    pub gain_ray_unknown: UnknownVisibility,
}

impl Default for OccupancyParams {
    fn default() -> Self {
        Self {
            l_occ: 2.2,
            l_free: -0.85,
            clamp_min: -7.0,
            clamp_max: 7.0,
            p_free_threshold: 0.35,
            p_occ_threshold: 0.65,
            gain_ray_unknown: UnknownVisibility::Transparent,
        }
    }
}

impl OccupancyParams {
    pub fn validate(&self) -> Result<(), OccupancyError> {
        let ok = 0.0 < self.p_free_threshold
            && self.p_free_threshold < 0.5
            && 0.5 < self.p_occ_threshold
            && self.p_occ_threshold < 1.0
            && self.clamp_min < 0.0
            && self.clamp_max > 0.0
            && self.l_free < 0.0
            && self.l_occ > 0.0;
        if ok {
            Ok(())
        } else {
            Err(OccupancyError::InvalidParams(format!("{self:?}")))
        }
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn probability(log_odds: f64) -> f64 {
    1.0 / (1.0 + (-log_odds).exp())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    spec: GridSpec,
    params: OccupancyParams,
    log_odds: Vec<f64>,
    free_below: f64,
    occ_above: f64,
}

impl OccupancyGrid {
    pub fn new(spec: GridSpec, params: OccupancyParams) -> Result<Self, OccupancyError> {
        params.validate()?;
        Ok(Self {
            spec,
            params,
            log_odds: vec![0.0; spec.len()],
            free_below: logit(params.p_free_threshold),
            occ_above: logit(params.p_occ_threshold),
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn params(&self) -> &OccupancyParams {
        &self.params
    }

    pub fn log_odds(&self, cell: Cell) -> f64 {
        self.log_odds[self.spec.index(cell)]
    }

    pub fn log_odds_slice(&self) -> &[f64] {
        &self.log_odds
    }

    /// Sets a cell's log-odds, clamped to the configured range.
    pub fn set_log_odds(&mut self, cell: Cell, value: f64) {
        let i = self.spec.index(cell);
        self.log_odds[i] = value.clamp(self.params.clamp_min, self.params.clamp_max);
    }

    pub fn probability(&self, cell: Cell) -> f64 {
        probability(self.log_odds(cell))
    }

    fn state_of_log_odds(&self, l: f64) -> CellState {
        if l < self.free_below {
            CellState::Free
        } else if l > self.occ_above {
            CellState::Occupied
        } else {
            CellState::Unknown
        }
    }

    pub fn state(&self, cell: Cell) -> CellState {
        self.state_of_log_odds(self.log_odds(cell))
    }

    pub fn state_at_index(&self, idx: usize) -> CellState {
        self.state_of_log_odds(self.log_odds[idx])
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        self.log_odds(cell) > self.occ_above
    }

    pub fn state_at_pose(&self, pose: &Pose) -> Option<CellState> {
        self.spec.cell_at(pose).map(|c| self.state(c))
    }

    /// Applies the inverse sensor model for every beam and returns the cells
    /// whose thresholded state changed.
    pub fn integrate_scan(&mut self, scan: &LaserScan) -> Result<Vec<Cell>, OccupancyError> {
        if self.spec.cell_at(&scan.origin).is_none() {
            return Err(OccupancyError::OriginOutOfBounds { x: scan.origin.x, y: scan.origin.y });
        }
        let tol = 1e-9 * self.spec.resolution;
        let mut changed = Vec::new();
        let mut touched = Vec::new();
        for beam in &scan.beams {
            touched.clear();
            for step in RayTraversal::new(&self.spec, &scan.origin, beam.angle, scan.max_range) {
                if beam.hit {
                    if step.t_enter > beam.range + tol {
                        break;
                    }
                } else if step.t_enter >= beam.range {
                    break;
                }
                touched.push(step.cell);
            }
            let hit_cell = if beam.hit { touched.pop() } else { None };
            for &cell in &touched {
                self.apply(cell, self.params.l_free, &mut changed);
            }
            if let Some(cell) = hit_cell {
                self.apply(cell, self.params.l_occ, &mut changed);
            }
        }
        changed.sort_unstable();
        changed.dedup();
        Ok(changed)
    }

    fn apply(&mut self, cell: Cell, delta: f64, changed: &mut Vec<Cell>) {
        let i = self.spec.index(cell);
        let before = self.state_of_log_odds(self.log_odds[i]);
        self.log_odds[i] = (self.log_odds[i] + delta).clamp(self.params.clamp_min, self.params.clamp_max);
        if self.state_of_log_odds(self.log_odds[i]) != before {
            changed.push(cell);
        }
    }

    pub fn cell_entropy_at(&self, idx: usize) -> f64 {
        binary_entropy(probability(self.log_odds[idx]))
    }

    /// Sum of per-cell binary entropies, in bits.
    pub fn map_entropy(&self) -> f64 {
        self.log_odds.iter().map(|&l| binary_entropy(probability(l))).sum()
    }

    /// Entropy the sensor would remove at `pose`, assuming every visible
    /// cell becomes certain.
    pub fn expected_info_gain(&self, pose: &Pose, sensor: &SensorParams) -> Result<f64, OccupancyError> {
        match self.state_at_pose(pose) {
            None | Some(CellState::Occupied) => return Err(OccupancyError::PoseNotFree { x: pose.x, y: pose.y }),
            _ => {}
        }
        let mut vis = VisibilitySet::new(&self.spec);
        vis.add_view(self, pose, sensor);
        Ok(vis.entropy(self))
    }

    /// Thresholded view as a compact byte raster (0 free, 1 unknown, 2 occupied).
    pub fn state_raster(&self) -> Vec<u8> {
        self.log_odds
            .iter()
            .map(|&l| match self.state_of_log_odds(l) {
                CellState::Free => 0,
                CellState::Unknown => 1,
                CellState::Occupied => 2,
            })
            .collect()
    }
}

/// Binary entropy in bits; errors outside `[0, 1]`.
pub fn cell_entropy(p: f64) -> Result<f64, OccupancyError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(OccupancyError::InvalidProbability(p));
    }
    Ok(binary_entropy(p))
}

fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    term(p) + term(1.0 - p)
}

/// Set of distinct cells seen by one or more simulated views, tracked with a
/// generation stamp so it can be reused without clearing.
#[derive(Clone, Debug)]
pub struct VisibilitySet {
    stamp: Vec<u32>,
    generation: u32,
    cells: Vec<usize>,
}

impl VisibilitySet {
    pub fn new(spec: &GridSpec) -> Self {
        Self { stamp: vec![0; spec.len()], generation: 1, cells: Vec::new() }
    }

    pub fn clear(&mut self) {
        self.cells.clear();
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.cells
    }

    /// Casts the sensor's rays from `pose`; rays stop at (and include) the
    /// first Occupied cell, and at Unknown cells when those are opaque.
    pub fn add_view(&mut self, grid: &OccupancyGrid, pose: &Pose, sensor: &SensorParams) {
        let opaque_unknown = grid.params.gain_ray_unknown == UnknownVisibility::Opaque;
        for angle in sensor.beam_angles() {
            for step in RayTraversal::new(&grid.spec, pose, angle, sensor.max_range) {
                let idx = grid.spec.index(step.cell);
                if self.stamp[idx] != self.generation {
                    self.stamp[idx] = self.generation;
                    self.cells.push(idx);
                }
                match grid.state_at_index(idx) {
                    CellState::Occupied => break,
                    CellState::Unknown if opaque_unknown => break,
                    _ => {}
                }
            }
        }
    }

    pub fn entropy(&self, grid: &OccupancyGrid) -> f64 {
        self.cells.iter().map(|&i| grid.cell_entropy_at(i)).sum()
    }
}

/// Quantized snapshot of a belief grid, exported as a plain-text graymap
/// plus a JSON sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub p_free_threshold: f64,
    pub p_occ_threshold: f64,
    pub quantization: String,
}

impl OccupancyGrid {
    /// `P2` graymap of p(c) quantized to 0–255, top row first.
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n{} {}\n255\n", self.spec.width, self.spec.height);
        for row in (0..self.spec.height).rev() {
            let line: Vec<String> = (0..self.spec.width)
                .map(|col| quantize(self.probability(Cell::new(col, row))).to_string())
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn sidecar(&self) -> GridSidecar {
        GridSidecar {
            width: self.spec.width,
            height: self.spec.height,
            resolution: self.spec.resolution,
            p_free_threshold: self.params.p_free_threshold,
            p_occ_threshold: self.params.p_occ_threshold,
            quantization: "round(255 * p)".into(),
        }
    }

    /// Rebuilds a grid from a graymap and sidecar. Log-odds are recovered
    /// from the quantized probabilities, so thresholded states survive the
    /// round trip but exact values do not.
    pub fn from_pgm(pgm: &str, sidecar: &GridSidecar, params: OccupancyParams) -> Result<Self, OccupancyError> {
        let bad = |m: &str| OccupancyError::InvalidParams(format!("graymap: {m}"));
        let mut tokens = pgm.split_whitespace();
        if tokens.next() != Some("P2") {
            return Err(bad("missing P2 header"));
        }
        let mut num = || -> Result<usize, OccupancyError> {
            tokens.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("truncated"))
        };
        let (w, h, maxv) = (num()?, num()?, num()?);
        if w != sidecar.width || h != sidecar.height || maxv != 255 {
            return Err(bad("header does not match sidecar"));
        }
        let params = OccupancyParams {
            p_free_threshold: sidecar.p_free_threshold,
            p_occ_threshold: sidecar.p_occ_threshold,
            ..params
        };
        let mut grid = OccupancyGrid::new(GridSpec::new(w, h, sidecar.resolution), params)?;
        for row in (0..h).rev() {
            for col in 0..w {
                let q = num()?;
                let p = (q as f64 / 255.0).clamp(1e-6, 1.0 - 1e-6);
                grid.set_log_odds(Cell::new(col, row), logit(p));
            }
        }
        Ok(grid)
    }
}

fn quantize(p: f64) -> u8 {
    (p * 255.0).round().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Beam;
    use rand::{Rng, SeedableRng};

    fn grid(w: usize, h: usize) -> OccupancyGrid {
        OccupancyGrid::new(GridSpec::new(w, h, 1.0), OccupancyParams::default()).unwrap()
    }

    /// Wide clamps so that saturated cells have exactly zero entropy.
    fn certain_grid(w: usize, h: usize) -> OccupancyGrid {
        let params = OccupancyParams { clamp_min: -1000.0, clamp_max: 1000.0, ..Default::default() };
        OccupancyGrid::new(GridSpec::new(w, h, 1.0), params).unwrap()
    }

    #[test]
    fn entropy_endpoints() {
        assert_eq!(cell_entropy(0.5).unwrap(), 1.0);
        assert_eq!(cell_entropy(1.0).unwrap(), 0.0);
        assert_eq!(cell_entropy(0.0).unwrap(), 0.0);
        assert!(cell_entropy(1.2).is_err());
        assert!(cell_entropy(-0.1).is_err());
    }

    #[test]
    fn entropy_at_point_nine() {
        // -0.9 log2 0.9 - 0.1 log2 0.1, evaluated via natural logs and ln 2
        let expected = 0.468_995_593_589_281_2;
        assert!((cell_entropy(0.9).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn map_entropy_counts() {
        let mut g = certain_grid(10, 10);
        assert_eq!(g.map_entropy(), 100.0);
        for r in 0..10 {
            for c in 0..10 {
                g.set_log_odds(Cell::new(c, r), if (r + c) % 2 == 0 { 1000.0 } else { -1000.0 });
            }
        }
        assert_eq!(g.map_entropy(), 0.0);
    }

    #[test]
    fn map_entropy_equals_double_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut g = grid(23, 17);
        for l in g.log_odds.iter_mut() {
            *l = rng.gen_range(-7.0..7.0);
        }
        let mut naive = 0.0;
        for row in 0..17 {
            for col in 0..23 {
                let p = 1.0 / (1.0 + (-g.log_odds(Cell::new(col, row))).exp());
                naive += -p * p.ln() / std::f64::consts::LN_2 - (1.0 - p) * (1.0 - p).ln() / std::f64::consts::LN_2;
            }
        }
        assert!((g.map_entropy() - naive).abs() <= 1e-9 * naive);
    }

    #[test]
    fn one_hit_beam_over_five_cells() {
        let mut g = grid(10, 3);
        let scan = LaserScan {
            origin: Pose::new(0.5, 1.5),
            max_range: 8.0,
            beams: vec![Beam { angle: 0.0, range: 3.5, hit: true }],
        };
        g.integrate_scan(&scan).unwrap();
        for c in 0..4 {
            assert_eq!(g.log_odds(Cell::new(c, 1)), -0.85);
        }
        assert_eq!(g.log_odds(Cell::new(4, 1)), 2.2);
        assert_eq!(g.log_odds(Cell::new(5, 1)), 0.0);
    }

    #[test]
    fn repeated_scans_saturate() {
        let mut g = grid(10, 3);
        let scan = LaserScan {
            origin: Pose::new(0.5, 1.5),
            max_range: 8.0,
            beams: vec![Beam { angle: 0.0, range: 3.5, hit: true }],
        };
        for _ in 0..50 {
            g.integrate_scan(&scan).unwrap();
        }
        assert_eq!(g.log_odds(Cell::new(0, 1)), g.params().clamp_min);
        assert_eq!(g.log_odds(Cell::new(4, 1)), g.params().clamp_max);
        assert!(g.log_odds.iter().all(|&l| (-7.0..=7.0).contains(&l)));
    }

    #[test]
    fn origin_out_of_bounds() {
        let mut g = grid(4, 4);
        let scan = LaserScan { origin: Pose::new(-1.0, 1.0), max_range: 2.0, beams: vec![] };
        assert!(g.integrate_scan(&scan).is_err());
    }

    #[test]
    fn gain_zero_when_certain() {
        let mut g = certain_grid(20, 20);
        g.log_odds.iter_mut().for_each(|l| *l = -1000.0);
        let gain = g.expected_info_gain(&Pose::new(10.3, 10.6), &SensorParams::full_circle(32, 5.0)).unwrap();
        assert_eq!(gain, 0.0);
    }

    #[test]
    fn gain_counts_unknown_cells() {
        // free 3x3 pocket enclosed by certain walls, one unknown cell inside
        let mut g = certain_grid(7, 7);
        g.log_odds.iter_mut().for_each(|l| *l = 1000.0);
        for r in 2..5 {
            for c in 2..5 {
                g.set_log_odds(Cell::new(c, r), -1000.0);
            }
        }
        let i = g.spec.index(Cell::new(4, 4));
        g.log_odds[i] = 0.0;
        let gain = g.expected_info_gain(&Pose::new(3.5, 3.5), &SensorParams::full_circle(64, 5.0)).unwrap();
        assert_eq!(gain, 1.0);
    }

    #[test]
    fn gain_on_occupied_errors() {
        let mut g = grid(5, 5);
        g.set_log_odds(Cell::new(2, 2), 5.0);
        assert!(g.expected_info_gain(&Pose::new(2.5, 2.5), &SensorParams::default()).is_err());
    }

    #[test]
    fn pgm_round_trip_preserves_states() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut g = grid(9, 6);
        for l in g.log_odds.iter_mut() {
            *l = [-7.0, 0.0, 7.0][rng.gen_range(0..3)];
        }
        let back = OccupancyGrid::from_pgm(&g.to_pgm(), &g.sidecar(), OccupancyParams::default()).unwrap();
        assert_eq!(back.state_raster(), g.state_raster());
    }
}
