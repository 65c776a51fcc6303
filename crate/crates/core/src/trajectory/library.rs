//! Maneuvers for every (entry, spot, direction) of a depot map.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::Serialize;

use super::{
    plan, validate_trajectory, wrap_angle, DepotMap, PlannerConfig, Pose, Trajectory,
    TrajectoryError, TrajectoryViolation, VehicleGeometry,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Entry to spot.
    In,
    /// Spot back to the entry, leaving against the entry heading.
    Out,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::In => "in",
            Direction::Out => "out",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LibraryKey {
    pub entry: String,
    pub spot: String,
    pub direction: Direction,
}

impl LibraryKey {
    pub fn file_stem(&self) -> String {
        format!("{}__{}__{}", self.entry, self.spot, self.direction)
    }
}

#[derive(Debug, Clone)]
pub enum LibraryEntry {
    Planned(Trajectory),
    /// The planner proved the poses disconnected.
    Blocked {
        reason: String,
    },
    /// The planner failed for another reason.
    Failed(TrajectoryError),
    /// Planned, but the validator rejected it.
    Invalid(Trajectory, TrajectoryViolation),
}

#[derive(Debug, Clone, Default)]
pub struct Library {
    pub entries: BTreeMap<LibraryKey, LibraryEntry>,
}

impl Library {
    /// Keys that neither validated nor were proven blocked.
    pub fn failures(&self) -> Vec<&LibraryKey> {
        self.entries
            .iter()
            .filter(|(_, e)| matches!(e, LibraryEntry::Failed(_) | LibraryEntry::Invalid(..)))
            .map(|(k, _)| k)
            .collect()
    }
}

/// Start and goal of a key's maneuver.
pub fn endpoints(entry: Pose, spot: Pose, dir: Direction) -> (Pose, Pose) {
    match dir {
        Direction::In => (entry, spot),
        Direction::Out => (
            spot,
            Pose::new(entry.x, entry.y, wrap_angle(entry.heading + PI)),
        ),
    }
}

/// Plans and validates every key. Keys are independent, so they run on
/// scoped threads; the result does not depend on scheduling.
pub fn build_library(map: &DepotMap, geom: &VehicleGeometry, cfg: &PlannerConfig) -> Library {
    let mut jobs = Vec::new();
    for e in &map.entries {
        for s in &map.spots {
            for dir in [Direction::In, Direction::Out] {
                let key = LibraryKey {
                    entry: e.id.clone(),
                    spot: s.id.clone(),
                    direction: dir,
                };
                jobs.push((key, endpoints(e.pose, s.pose, dir)));
            }
        }
    }
    let run = |(start, goal): (Pose, Pose)| match plan(map, geom, start, goal, cfg) {
        Ok(t) => match validate_trajectory(map, geom, &t, cfg) {
            Ok(()) => LibraryEntry::Planned(t),
            Err(v) => LibraryEntry::Invalid(t, v),
        },
        Err(TrajectoryError::ProvenBlocked) => LibraryEntry::Blocked {
            reason: TrajectoryError::ProvenBlocked.to_string(),
        },
        Err(e) => LibraryEntry::Failed(e),
    };
    let entries = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(key, ends)| {
                let ends = *ends;
                (key.clone(), scope.spawn(move || run(ends)))
            })
            .collect();
        handles
            .into_iter()
            .map(|(k, h)| (k, h.join().expect("planner threads do not panic")))
            .collect()
    });
    Library { entries }
}

#[derive(Serialize)]
struct ManifestRow<'a> {
    entry: &'a str,
    spot: &'a str,
    direction: Direction,
    status: &'static str,
    file: Option<String>,
    cost: Option<f64>,
    total_time_s: Option<f64>,
    clearance_certificate_m: Option<f64>,
    reason: Option<String>,
}

/// Writes one CSV per planned key and `manifest.json` covering every key.
pub fn write_library(dir: &Path, lib: &Library) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut rows = Vec::new();
    for (key, entry) in &lib.entries {
        let mut row = ManifestRow {
            entry: &key.entry,
            spot: &key.spot,
            direction: key.direction,
            status: "planned",
            file: None,
            cost: None,
            total_time_s: None,
            clearance_certificate_m: None,
            reason: None,
        };
        let traj = match entry {
            LibraryEntry::Planned(t) => Some(t),
            LibraryEntry::Invalid(t, v) => {
                row.status = "invalid";
                row.reason = Some(v.to_string());
                Some(t)
            }
            LibraryEntry::Blocked { reason } => {
                row.status = "blocked";
                row.reason = Some(reason.clone());
                None
            }
            LibraryEntry::Failed(e) => {
                row.status = "failed";
                row.reason = Some(e.to_string());
                None
            }
        };
        if let Some(t) = traj {
            let file = format!("{}.csv", key.file_stem());
            std::fs::write(dir.join(&file), t.to_csv())?;
            row.file = Some(file);
            row.cost = Some(t.total_cost);
            row.total_time_s = Some(t.total_time);
            row.clearance_certificate_m = Some(t.clearance_certificate);
        }
        rows.push(row);
    }
    let json = serde_json::to_string_pretty(&rows).map_err(std::io::Error::other)?;
    std::fs::write(dir.join("manifest.json"), json + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depot::{DepotSpot, SpotKind};
    use crate::trajectory::{MapEntry, Polygon};

    #[test]
    fn out_leaves_against_the_entry_heading() {
        let (s, g) = endpoints(
            Pose::new(0.0, 0.0, 0.0),
            Pose::new(5.0, 5.0, 1.0),
            Direction::Out,
        );
        assert_eq!(s, Pose::new(5.0, 5.0, 1.0));
        assert!((g.heading - PI).abs() < 1e-12);
    }

    #[test]
    fn keys_cover_entries_spots_and_directions() {
        let map = DepotMap {
            boundary: vec![Polygon::rect(-15.0, -25.0, 70.0, 25.0).unwrap()],
            entries: vec![MapEntry {
                id: "gate".into(),
                pose: Pose::new(0.0, 0.0, 0.0),
            }],
            spots: vec![DepotSpot {
                id: "s1".into(),
                kind: SpotKind::ParkingOnly,
                charger_id: None,
                pose: Pose::new(40.0, 0.0, 0.0),
            }],
            ..Default::default()
        };
        let lib = build_library(&map, &VehicleGeometry::default(), &PlannerConfig::default());
        assert_eq!(lib.entries.len(), 2);
        assert!(lib.failures().is_empty(), "{:?}", lib.entries);
    }
}
