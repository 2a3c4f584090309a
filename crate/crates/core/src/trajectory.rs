use serde::{Deserialize, Serialize};

use crate::geometry::{point_segment_distance, polyline_length, Pose};

/// Dense waypoint path with cached arc length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    waypoints: Vec<Pose>,
    length: f64,
}

impl Trajectory {
    /// Builds a trajectory, collapsing consecutive duplicate waypoints.
    /// A single distinct point is kept twice so the two-waypoint invariant holds.
    pub fn new(points: Vec<Pose>) -> Option<Self> {
        if points.is_empty() || points.iter().any(|p| !p.is_finite()) {
            return None;
        }
        let mut waypoints: Vec<Pose> = Vec::with_capacity(points.len());
        for p in points {
            if waypoints.last().map_or(true, |q| q.distance(&p) > 1e-12) {
                waypoints.push(p);
            }
        }
        if waypoints.len() == 1 {
            waypoints.push(waypoints[0]);
        }
        let length = polyline_length(&waypoints);
        Some(Self { waypoints, length })
    }

    pub fn waypoints(&self) -> &[Pose] {
        &self.waypoints
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn start(&self) -> Pose {
        self.waypoints[0]
    }

    pub fn end(&self) -> Pose {
        *self.waypoints.last().unwrap()
    }

    /// Interior waypoints (everything but the fixed endpoints).
    pub fn interior(&self) -> &[Pose] {
        let n = self.waypoints.len();
        if n <= 2 {
            &[]
        } else {
            &self.waypoints[1..n - 1]
        }
    }

    /// Point at arc length `s`, clamped to the ends.
    pub fn point_at(&self, s: f64) -> Pose {
        if s <= 0.0 {
            return self.start();
        }
        let mut acc = 0.0;
        for w in self.waypoints.windows(2) {
            let seg = w[0].distance(&w[1]);
            if acc + seg >= s {
                if seg == 0.0 {
                    return w[1];
                }
                return w[0].lerp(&w[1], (s - acc) / seg);
            }
            acc += seg;
        }
        self.end()
    }

    /// Samples points every `interval` meters of arc length, endpoints included.
    pub fn sample_every(&self, interval: f64) -> Vec<Pose> {
        let mut out = vec![self.start()];
        if self.length > 0.0 && interval > 0.0 {
            let n = (self.length / interval).floor() as usize;
            for k in 1..=n {
                let s = k as f64 * interval;
                if s < self.length - 1e-9 {
                    out.push(self.point_at(s));
                }
            }
            out.push(self.end());
        }
        out
    }

    /// Arc length of the projection of `pose` onto the polyline (earliest
    /// closest segment).
    pub fn project(&self, pose: &Pose) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        let mut acc = 0.0;
        for w in self.waypoints.windows(2) {
            let seg = w[0].distance(&w[1]);
            let d = point_segment_distance(pose, &w[0], &w[1]);
            if d < best.0 - 1e-12 {
                let t = if seg == 0.0 {
                    0.0
                } else {
                    (((pose.x - w[0].x) * (w[1].x - w[0].x) + (pose.y - w[0].y) * (w[1].y - w[0].y))
                        / (seg * seg))
                        .clamp(0.0, 1.0)
                };
                best = (d, acc + t * seg);
            }
            acc += seg;
        }
        best.1
    }

    /// Remaining polyline from arc length `s` onward, starting at the point at `s`.
    pub fn remaining_from(&self, s: f64) -> Vec<Pose> {
        let mut out = vec![self.point_at(s)];
        let mut acc = 0.0;
        for w in self.waypoints.windows(2) {
            acc += w[0].distance(&w[1]);
            if acc > s + 1e-12 {
                out.push(w[1]);
            }
        }
        out
    }
}
