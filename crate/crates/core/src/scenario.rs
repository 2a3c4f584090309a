//! Scenario files: JSON with a character raster (`#` solid, `.` free), labeled
//! rectangular regions, a start pose, sensor settings and a seed.
//!
//! The first grid string is row 0, i.e. the bottom of the map (y = 0).
//! Region rects are inclusive cell ranges `[x0, y0, x1, y1]`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GridSpec, Pose};
use crate::world::{CellRect, SemanticLabel, SemanticRegion, SensorParams, WorldModel};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },
    #[error("line {line}: {msg}")]
    Invalid { line: usize, msg: String },
}

/// Optional per-scenario tuning; absent fields keep library defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    pub min_edge_len: Option<f64>,
    pub r_robot: Option<f64>,
    pub raycast_radius: Option<f64>,
    pub speed: Option<f64>,
    pub dt: Option<f64>,
    pub max_sim_time: Option<f64>,
    pub info_beams: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensor {
    beams: usize,
    max_range_m: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    label: String,
    kind: String,
    rect: [i64; 4],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    name: Option<String>,
    resolution: f64,
    grid: Vec<String>,
    regions: Vec<RawRegion>,
    start: [f64; 2],
    #[serde(default)]
    starts: Vec<[f64; 2]>,
    sensor: RawSensor,
    seed: u64,
    #[serde(default)]
    params: ScenarioParams,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub world: WorldModel,
    pub sensor: SensorParams,
    pub seed: u64,
    /// Alternative start poses (the primary start is `world.start_pose`).
    pub starts: Vec<Pose>,
    pub params: ScenarioParams,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        let default_name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::parse(&text, &default_name)
    }

    pub fn parse(text: &str, default_name: &str) -> Result<Self, ScenarioError> {
        let raw: RawScenario = serde_json::from_str(text)
            .map_err(|e| ScenarioError::Syntax { line: e.line(), column: e.column(), msg: e.to_string() })?;
        let key_line = |key: &str| key_lines(text, key).first().copied().unwrap_or(1);
        let row_lines = array_string_lines(text, "grid");
        let rect_lines = key_lines(text, "rect");

        if !(raw.resolution.is_finite() && raw.resolution > 0.0) {
            return Err(ScenarioError::Invalid { line: key_line("resolution"), msg: "resolution must be positive".into() });
        }
        let height = raw.grid.len();
        let width = raw.grid.first().map_or(0, |r| r.chars().count());
        if height == 0 || width == 0 {
            return Err(ScenarioError::Invalid { line: key_line("grid"), msg: "grid is empty".into() });
        }
        let mut solid = Vec::with_capacity(width * height);
        for (row, s) in raw.grid.iter().enumerate() {
            let line = row_lines.get(row).copied().unwrap_or_else(|| key_line("grid"));
            let n = s.chars().count();
            if n != width {
                return Err(ScenarioError::Invalid {
                    line,
                    msg: format!("ragged grid: row {row} has {n} cells, expected {width}"),
                });
            }
            for ch in s.chars() {
                solid.push(match ch {
                    '#' => true,
                    '.' => false,
                    other => {
                        return Err(ScenarioError::Invalid { line, msg: format!("unexpected grid character {other:?}") })
                    }
                });
            }
        }
        let spec = GridSpec::new(width, height, raw.resolution);

        let (mut rooms, mut connections) = (0u16, 0u16);
        let mut regions = Vec::with_capacity(raw.regions.len());
        for (i, r) in raw.regions.iter().enumerate() {
            let line = rect_lines.get(i).copied().unwrap_or_else(|| key_line("regions"));
            let [x0, y0, x1, y1] = r.rect;
            if x0 < 0 || y0 < 0 || x0 > x1 || y0 > y1 || x1 >= width as i64 || y1 >= height as i64 {
                return Err(ScenarioError::Invalid {
                    line,
                    msg: format!("region '{}' rect {:?} outside the {width}x{height} grid", r.label, r.rect),
                });
            }
            let label = match r.kind.as_str() {
                "room" => {
                    rooms += 1;
                    SemanticLabel::Room(rooms - 1)
                }
                "connection" => {
                    connections += 1;
                    SemanticLabel::Connection(connections - 1)
                }
                other => {
                    return Err(ScenarioError::Invalid {
                        line,
                        msg: format!("region kind must be 'room' or 'connection', got '{other}'"),
                    })
                }
            };
            let rect = CellRect { x0: x0 as usize, y0: y0 as usize, x1: x1 as usize, y1: y1 as usize };
            regions.push(SemanticRegion { name: r.label.clone(), label, footprint: vec![rect] });
        }

        let start = Pose::new(raw.start[0], raw.start[1]);
        let world = WorldModel::new(spec, solid, regions, start)
            .map_err(|e| ScenarioError::Invalid { line: key_line("regions"), msg: e.to_string() })?;
        let sensor = SensorParams::full_circle(raw.sensor.beams, raw.sensor.max_range_m);
        sensor
            .validate(raw.resolution)
            .map_err(|e| ScenarioError::Invalid { line: key_line("sensor"), msg: e.to_string() })?;
        let starts: Vec<Pose> = raw.starts.iter().map(|s| Pose::new(s[0], s[1])).collect();
        for s in &starts {
            if !world.is_free_pose(s) {
                return Err(ScenarioError::Invalid {
                    line: key_line("starts"),
                    msg: format!("start ({}, {}) is not on a free cell", s.x, s.y),
                });
            }
        }
        Ok(Self {
            name: raw.name.unwrap_or_else(|| default_name.to_string()),
            world,
            sensor,
            seed: raw.seed,
            starts,
            params: raw.params,
        })
    }

    /// Free area of the map in square meters.
    pub fn free_area(&self) -> f64 {
        let spec = self.world.spec();
        let free = (0..spec.len()).filter(|&i| !self.world.is_solid(spec.cell_of_index(i))).count();
        free as f64 * spec.resolution * spec.resolution
    }
}

/// 1-based line of every occurrence of `"key"` used as an object key.
fn key_lines(text: &str, key: &str) -> Vec<usize> {
    let needle = format!("\"{key}\"");
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(off) = text[from..].find(&needle) {
        let at = from + off;
        let rest = text[at + needle.len()..].trim_start();
        if rest.starts_with(':') {
            out.push(line_of(text, at));
        }
        from = at + needle.len();
    }
    out
}

/// Lines of the string elements of the array stored under `key`.
fn array_string_lines(text: &str, key: &str) -> Vec<usize> {
    let needle = format!("\"{key}\"");
    let Some(at) = text.find(&needle) else { return Vec::new() };
    let bytes = text.as_bytes();
    let mut i = at + needle.len();
    while i < bytes.len() && bytes[i] != b'[' {
        i += 1;
    }
    let mut out = Vec::new();
    let mut line = line_of(text, i);
    i += 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\n' => line += 1,
            b']' => break,
            b'"' => {
                out.push(line);
                i += 1;
                while i < bytes.len() && bytes[i] != b'"' {
                    if bytes[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
            }
            _ => {}
        }
        i += 1;
    }
    out
}

fn line_of(text: &str, byte: usize) -> usize {
    text[..byte].bytes().filter(|&b| b == b'\n').count() + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r######"{
  "resolution": 0.5,
  "grid": [
    "#####",
    "#...#",
    "#...#",
    "#####"
  ],
  "regions": [
    {"label": "lab", "kind": "room", "rect": [1, 1, 3, 2]}
  ],
  "start": [1.25, 0.75],
  "sensor": {"beams": 32, "max_range_m": 3.0},
  "seed": 9
}"######;

    #[test]
    fn parses_small_scenario() {
        let s = Scenario::parse(SMALL, "small").unwrap();
        assert_eq!(s.name, "small");
        assert_eq!(s.world.spec().width, 5);
        assert_eq!(s.world.spec().height, 4);
        assert_eq!(s.seed, 9);
        assert_eq!(s.world.semantic_label_at(&Pose::new(1.25, 0.75)), SemanticLabel::Room(0));
        assert!((s.free_area() - 6.0 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn ragged_row_reports_its_line() {
        let text = SMALL.replace("\"#...#\",\n    \"#...#\"", "\"#...#\",\n    \"#..#\"");
        match Scenario::parse(&text, "x") {
            Err(ScenarioError::Invalid { line, msg }) => {
                assert_eq!(line, 6, "{msg}");
                assert!(msg.contains("ragged"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_bounds_rect_reports_its_line() {
        let text = SMALL.replace("[1, 1, 3, 2]", "[1, 1, 3, 9]");
        match Scenario::parse(&text, "x") {
            Err(ScenarioError::Invalid { line, msg }) => {
                assert_eq!(line, 10, "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        let text = SMALL.replace("\"seed\": 9", "\"seed\": ");
        assert!(matches!(Scenario::parse(&text, "x"), Err(ScenarioError::Syntax { line: 15, .. })));
    }

    #[test]
    fn unknown_kind_rejected() {
        let text = SMALL.replace("\"room\"", "\"hall\"");
        assert!(matches!(Scenario::parse(&text, "x"), Err(ScenarioError::Invalid { line: 10, .. })));
    }
}
