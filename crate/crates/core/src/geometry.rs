//! Planar primitives shared by every layer: poses, cell indices, raster
//! layout and exact grid traversal.

use serde::{Deserialize, Serialize};

/// A position in the plane, in meters.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(&self, other: &Pose, t: f64) -> Pose {
        Pose::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }
}

/// Column/row index of a raster cell. Row 0 is the bottom row (y = 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

impl Cell {
    pub const fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

pub const NEIGHBORS_8: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Raster dimensions and metric scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
}

impl GridSpec {
    pub fn new(width: usize, height: usize, resolution: f64) -> Self {
        Self { width, height, resolution }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    pub fn cell_of_index(&self, idx: usize) -> Cell {
        Cell::new(idx % self.width, idx / self.width)
    }

    pub fn width_m(&self) -> f64 {
        self.width as f64 * self.resolution
    }

    pub fn height_m(&self) -> f64 {
        self.height as f64 * self.resolution
    }

    pub fn contains_pose(&self, pose: &Pose) -> bool {
        pose.x >= 0.0 && pose.y >= 0.0 && pose.x < self.width_m() && pose.y < self.height_m()
    }

    pub fn cell_at(&self, pose: &Pose) -> Option<Cell> {
        if !pose.is_finite() || !self.contains_pose(pose) {
            return None;
        }
        let col = ((pose.x / self.resolution).floor() as usize).min(self.width - 1);
        let row = ((pose.y / self.resolution).floor() as usize).min(self.height - 1);
        Some(Cell::new(col, row))
    }

    pub fn cell_center(&self, cell: Cell) -> Pose {
        Pose::new(
            (cell.col as f64 + 0.5) * self.resolution,
            (cell.row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn offset(&self, cell: Cell, dc: i64, dr: i64) -> Option<Cell> {
        let c = cell.col as i64 + dc;
        let r = cell.row as i64 + dr;
        if c < 0 || r < 0 || c >= self.width as i64 || r >= self.height as i64 {
            None
        } else {
            Some(Cell::new(c as usize, r as usize))
        }
    }

    pub fn neighbors8(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        NEIGHBORS_8
            .iter()
            .filter_map(move |&(dc, dr)| self.offset(cell, dc, dr))
    }

    /// Cells whose centers lie within `radius` of the segment `a`–`b`.
    /// Cells outside the raster are reported as `None`.
    pub fn cells_near_segment(&self, a: &Pose, b: &Pose, radius: f64, mut visit: impl FnMut(Option<Cell>) -> bool) -> bool {
        let res = self.resolution;
        let (ymin, ymax) = (a.y.min(b.y) - radius, a.y.max(b.y) + radius);
        let row_lo = ((ymin / res) - 0.5).ceil() as i64;
        let row_hi = ((ymax / res) - 0.5).floor() as i64;
        let dy = b.y - a.y;
        let dx = b.x - a.x;
        let reach2 = (radius + 1e-12) * (radius + 1e-12);
        for row in row_lo..=row_hi {
            let yc = (row as f64 + 0.5) * res;
            // x-extent of the segment portion whose y is within `radius` of this row
            let (t0, t1) = if dy.abs() < 1e-15 {
                if (a.y - yc).abs() > radius {
                    continue;
                }
                (0.0, 1.0)
            } else {
                let ta = (yc - radius - a.y) / dy;
                let tb = (yc + radius - a.y) / dy;
                let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
                let lo = lo.max(0.0);
                let hi = hi.min(1.0);
                if lo > hi {
                    continue;
                }
                (lo, hi)
            };
            let xa = a.x + dx * t0;
            let xb = a.x + dx * t1;
            let xmin = xa.min(xb) - radius;
            let xmax = xa.max(xb) + radius;
            let col_lo = ((xmin / res) - 0.5).ceil() as i64;
            let col_hi = ((xmax / res) - 0.5).floor() as i64;
            for col in col_lo..=col_hi {
                let center = Pose::new((col as f64 + 0.5) * res, yc);
                if point_segment_distance_sq(&center, a, b) > reach2 {
                    continue;
                }
                let cell = if col < 0 || row < 0 || col >= self.width as i64 || row >= self.height as i64 {
                    None
                } else {
                    Some(Cell::new(col as usize, row as usize))
                };
                if !visit(cell) {
                    return false;
                }
            }
        }
        true
    }
}

pub fn point_segment_distance(p: &Pose, a: &Pose, b: &Pose) -> f64 {
    point_segment_distance_sq(p, a, b).sqrt()
}

fn point_segment_distance_sq(p: &Pose, a: &Pose, b: &Pose) -> f64 {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0) };
    let (ex, ey) = (a.x + t * dx - p.x, a.y + t * dy - p.y);
    ex * ex + ey * ey
}

/// Distance from `p` to the closest point of a polyline.
pub fn point_polyline_distance(p: &Pose, pts: &[Pose]) -> f64 {
    match pts {
        [] => f64::INFINITY,
        [only] => p.distance(only),
        _ => pts
            .windows(2)
            .map(|w| point_segment_distance(p, &w[0], &w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

pub fn polyline_length(pts: &[Pose]) -> f64 {
    pts.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

/// One cell crossed by a ray, with the entry and exit distances along it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayStep {
    pub cell: Cell,
    pub t_enter: f64,
    pub t_exit: f64,
}

/// Exact cell-by-cell traversal of a ray (Amanatides–Woo), bounded by
/// `max_dist` and the raster. Produces every cell whose interior the ray
/// enters before `max_dist`.
#[derive(Clone, Debug)]
pub struct RayTraversal {
    col: i64,
    row: i64,
    step_c: i64,
    step_r: i64,
    t_max_c: f64,
    t_max_r: f64,
    t_delta_c: f64,
    t_delta_r: f64,
    t: f64,
    max_dist: f64,
    width: i64,
    height: i64,
    done: bool,
}

impl RayTraversal {
    pub fn new(spec: &GridSpec, origin: &Pose, angle: f64, max_dist: f64) -> Self {
        let res = spec.resolution;
        let (dir_y, dir_x) = angle.sin_cos();
        let gx = origin.x / res;
        let gy = origin.y / res;
        let col = gx.floor() as i64;
        let row = gy.floor() as i64;
        let (step_c, t_max_c, t_delta_c) = axis_setup(gx, dir_x, res);
        let (step_r, t_max_r, t_delta_r) = axis_setup(gy, dir_y, res);
        let inside = col >= 0 && row >= 0 && col < spec.width as i64 && row < spec.height as i64;
        Self {
            col,
            row,
            step_c,
            step_r,
            t_max_c,
            t_max_r,
            t_delta_c,
            t_delta_r,
            t: 0.0,
            max_dist,
            width: spec.width as i64,
            height: spec.height as i64,
            done: !inside || !(max_dist > 0.0),
        }
    }
}

fn axis_setup(g: f64, dir: f64, res: f64) -> (i64, f64, f64) {
    if dir > 1e-15 {
        let next = g.floor() + 1.0;
        (1, (next - g) * res / dir, res / dir)
    } else if dir < -1e-15 {
        let next = g.floor();
        (-1, (g - next) * res / -dir, res / -dir)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

impl Iterator for RayTraversal {
    type Item = RayStep;

    fn next(&mut self) -> Option<RayStep> {
        if self.done {
            return None;
        }
        let t_enter = self.t;
        let cell = Cell::new(self.col as usize, self.row as usize);
        let t_exit = self.t_max_c.min(self.t_max_r).min(self.max_dist);
        if self.t_max_c < self.t_max_r {
            self.t = self.t_max_c;
            self.t_max_c += self.t_delta_c;
            self.col += self.step_c;
        } else {
            self.t = self.t_max_r;
            self.t_max_r += self.t_delta_r;
            self.row += self.step_r;
        }
        if self.t >= self.max_dist
            || self.col < 0
            || self.row < 0
            || self.col >= self.width
            || self.row >= self.height
        {
            self.done = true;
        }
        Some(RayStep { cell, t_enter, t_exit })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn traversal_axis_aligned() {
        let spec = GridSpec::new(10, 10, 1.0);
        let cells: Vec<_> = RayTraversal::new(&spec, &Pose::new(0.5, 0.5), 0.0, 3.0)
            .map(|s| (s.cell.col, s.t_enter))
            .collect();
        assert_eq!(cells, vec![(0, 0.0), (1, 0.5), (2, 1.5), (3, 2.5)]);
    }

    #[test]
    fn traversal_stops_at_border() {
        let spec = GridSpec::new(4, 4, 0.5);
        let n = RayTraversal::new(&spec, &Pose::new(1.0, 1.0), std::f64::consts::PI, 100.0).count();
        assert_eq!(n, 3);
    }

    #[test]
    fn segment_inflation_counts_cells() {
        let spec = GridSpec::new(20, 20, 1.0);
        let mut n = 0;
        spec.cells_near_segment(&Pose::new(5.5, 5.5), &Pose::new(10.5, 5.5), 1.0, |_| {
            n += 1;
            true
        });
        // rows 4..=6: centre row 6 cells + 2 extra caps each, off rows 6 cells each
        assert_eq!(n, 6 + 2 + 6 + 6);
    }

    #[test]
    fn polyline_distance_basic() {
        let pts = [Pose::new(0.0, 0.0), Pose::new(3.0, 0.0), Pose::new(3.0, 4.0)];
        assert!((polyline_length(&pts) - 7.0).abs() < 1e-12);
        assert!((point_polyline_distance(&Pose::new(4.0, 2.0), &pts) - 1.0).abs() < 1e-12);
    }
}
