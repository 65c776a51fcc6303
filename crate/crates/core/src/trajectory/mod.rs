//! Depot maneuvers for a kinematic bicycle: motion-primitive search on a
//! discretised (x, y, heading) lattice with analytic curve shots, every
//! candidate clearance-checked against convex obstacles, plus an independent
//! validator and a precomputed maneuver library.

mod dubins;
mod geometry;
mod library;
mod path;
mod search;
mod validate;

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depot::DepotSpot;
pub use crate::depot::Pose;

pub use geometry::{point_segment_distance, polygon_distance, Point, Polygon};
pub use library::{build_library, write_library, Direction, Library, LibraryEntry, LibraryKey};
pub use path::Segment;
pub use search::plan;
pub use validate::{validate_trajectory, TrajectoryViolation, ViolationKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),
    #[error("invalid vehicle geometry: {0}")]
    InvalidGeometry(String),
    #[error("start pose violates clearance ({0:.4} m)")]
    StartInCollision(f64),
    #[error("goal pose violates clearance ({0:.4} m)")]
    GoalInCollision(f64),
    #[error("start and goal are not connected in free space")]
    ProvenBlocked,
    #[error("no path within {expanded} expansions")]
    Exhausted { expanded: usize },
    #[error("map: {0}")]
    Map(String),
}

/// Body rectangle of the bus around the rear-axle reference point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleGeometry {
    pub length: f64,
    pub width: f64,
    /// Rear axle to tail.
    pub rear_overhang: f64,
    pub wheelbase: f64,
}

impl Default for VehicleGeometry {
    /// A 40 ft transit bus.
    fn default() -> Self {
        Self {
            length: 12.0,
            width: 2.55,
            rear_overhang: 3.0,
            wheelbase: 6.0,
        }
    }
}

impl VehicleGeometry {
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let all = [self.length, self.width, self.rear_overhang, self.wheelbase];
        if !all.iter().all(|&x| x.is_finite() && x > 0.0) {
            return Err(TrajectoryError::InvalidGeometry(
                "all dimensions must be positive".into(),
            ));
        }
        if self.wheelbase >= self.length {
            return Err(TrajectoryError::InvalidGeometry(
                "wheelbase must be shorter than the body".into(),
            ));
        }
        if self.rear_overhang >= self.length {
            return Err(TrajectoryError::InvalidGeometry(
                "rear overhang must be shorter than the body".into(),
            ));
        }
        Ok(())
    }

    /// Body polygon at `pose`.
    pub fn body(&self, pose: Pose) -> Polygon {
        let (s, c) = pose.heading.sin_cos();
        let (rear, front, half) = (
            -self.rear_overhang,
            self.length - self.rear_overhang,
            self.width / 2.0,
        );
        let corners = [[rear, -half], [front, -half], [front, half], [rear, half]]
            .map(|[u, v]| [pose.x + c * u - s * v, pose.y + s * u + c * v]);
        Polygon::new(corners.to_vec()).expect("validated geometry yields a proper rectangle")
    }

    /// Farthest body point from the rear axle.
    pub fn reach(&self) -> f64 {
        let front = self.length - self.rear_overhang;
        front.max(self.rear_overhang).hypot(self.width / 2.0)
    }

    /// Radius of the disc around the rear axle that the body always covers.
    pub fn inner_radius(&self) -> f64 {
        (self.width / 2.0)
            .min(self.rear_overhang)
            .min(self.length - self.rear_overhang)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub steer_max: f64,
    /// Odd count of steer values spread over `[-steer_max, steer_max]`.
    pub steer_samples: usize,
    pub v_max: f64,
    pub a_max: f64,
    pub d_min: f64,
    pub arc_length: f64,
    pub cell: f64,
    pub heading_bins: usize,
    pub goal_position_tol: f64,
    pub goal_heading_tol: f64,
    pub node_budget: usize,
    /// Largest gap between stored trajectory states.
    pub sample_spacing: f64,
    pub reversal_penalty: f64,
    pub steer_change_penalty: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            steer_max: 0.6,
            steer_samples: 5,
            v_max: 2.0,
            a_max: 0.5,
            d_min: 0.3,
            arc_length: 1.5,
            cell: 0.5,
            heading_bins: 72,
            goal_position_tol: 0.15,
            goal_heading_tol: 5f64.to_radians(),
            node_budget: 60_000,
            sample_spacing: 0.1,
            reversal_penalty: 5.0,
            steer_change_penalty: 0.1,
        }
    }
}

/// A named way into the depot; the heading points inward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub id: String,
    pub pose: Pose,
}

/// Depot geometry. The drivable area is the intersection of the `boundary`
/// polygons (the whole plane when empty) minus the `obstacles`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DepotMap {
    #[serde(default)]
    pub id: String,
    #[serde(default)]
    pub boundary: Vec<Polygon>,
    #[serde(default)]
    pub obstacles: Vec<Polygon>,
    #[serde(default)]
    pub spots: Vec<DepotSpot>,
    #[serde(default)]
    pub entries: Vec<MapEntry>,
    #[serde(default)]
    pub lanes: Vec<Vec<Point>>,
}

/// Extrusion depth of boundary edges turned into wall obstacles.
const WALL_DEPTH: f64 = 10.0;

impl DepotMap {
    pub fn from_json_str(text: &str) -> Result<Self, TrajectoryError> {
        serde_json::from_str(text).map_err(|e| TrajectoryError::Map(e.to_string()))
    }

    pub fn from_json_file(path: &FsPath) -> Result<Self, TrajectoryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TrajectoryError::Map(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Obstacles plus every boundary edge extruded outward. For a body inside
    /// the boundary, distance to the walls equals distance to the outside.
    pub fn collision_set(&self) -> Vec<Polygon> {
        let mut out = self.obstacles.clone();
        for poly in &self.boundary {
            for (a, b) in poly.edges() {
                let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                let len = dx.hypot(dy);
                let n = [dy / len * WALL_DEPTH, -dx / len * WALL_DEPTH];
                let quad = vec![a, [a[0] + n[0], a[1] + n[1]], [b[0] + n[0], b[1] + n[1]], b];
                out.push(Polygon::new(quad).expect("outward extrusion of a CCW edge is CCW"));
            }
        }
        out
    }

    /// Reflection across the x-axis.
    pub fn mirrored(&self) -> Self {
        let pose = |p: Pose| Pose::new(p.x, -p.y, -p.heading);
        Self {
            id: format!("{}-mirrored", self.id),
            boundary: self.boundary.iter().map(Polygon::mirrored).collect(),
            obstacles: self.obstacles.iter().map(Polygon::mirrored).collect(),
            spots: self
                .spots
                .iter()
                .map(|s| DepotSpot {
                    pose: pose(s.pose),
                    ..s.clone()
                })
                .collect(),
            entries: self
                .entries
                .iter()
                .map(|e| MapEntry {
                    id: e.id.clone(),
                    pose: pose(e.pose),
                })
                .collect(),
            lanes: self
                .lanes
                .iter()
                .map(|l| l.iter().map(|p| [p[0], -p[1]]).collect())
                .collect(),
        }
    }
}

/// One stored trajectory state. `accel` and `steer` hold from this state
/// to the next.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub accel: f64,
    pub steer: f64,
}

impl TrajState {
    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.heading)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start: Pose,
    pub goal: Pose,
    pub states: Vec<TrajState>,
    pub segments: Vec<Segment>,
    pub total_time: f64,
    pub total_cost: f64,
    /// Smallest body clearance over the states and ten samples between
    /// each consecutive pair.
    pub clearance_certificate: f64,
}

impl Trajectory {
    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    pub fn reversals(&self) -> usize {
        self.segments
            .windows(2)
            .filter(|w| w[0].direction != w[1].direction)
            .count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,x_m,y_m,heading_rad,v_mps,accel_mps2,steer_rad\n");
        for s in &self.states {
            out.push_str(&format!(
                "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                s.t, s.x, s.y, s.heading, s.speed, s.accel, s.steer
            ));
        }
        out
    }
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_corners_follow_heading() {
        let g = VehicleGeometry::default();
        let b = g.body(Pose::new(0.0, 0.0, std::f64::consts::FRAC_PI_2));
        let v = b.vertices();
        assert!((v[0][0] - 1.275).abs() < 1e-12 && (v[0][1] + 3.0).abs() < 1e-12);
        assert!((v[2][1] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn geometry_invariants() {
        assert!(VehicleGeometry::default().validate().is_ok());
        let bad = VehicleGeometry {
            wheelbase: 13.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn walls_measure_distance_to_outside() {
        let map = DepotMap {
            boundary: vec![Polygon::rect(0.0, 0.0, 10.0, 10.0).unwrap()],
            ..Default::default()
        };
        let walls = map.collision_set();
        assert_eq!(walls.len(), 4);
        let probe = Polygon::rect(2.0, 3.0, 4.0, 4.0).unwrap();
        let d = walls
            .iter()
            .map(|w| polygon_distance(&probe, w))
            .fold(f64::INFINITY, f64::min);
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn wrap_is_half_open() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
    }
}
