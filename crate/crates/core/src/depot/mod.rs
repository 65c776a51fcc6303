//! Spot assignment, charger waitlist and pull-out checks at the depot.
//!
//! [`DepotState`] follows a plan slot by slot. Within one slot, events are
//! processed as completions, departures, arrivals, promotions.

mod state;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Defect, Scenario};

pub use state::{DepotState, WaitlistOp};

/// A planar pose: metres and radians, heading measured from +x.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpotKind {
    Charger,
    ParkingOnly,
}

/// `charger_id` is present iff `kind` is [`SpotKind::Charger`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepotSpot {
    pub id: String,
    pub kind: SpotKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charger_id: Option<String>,
    #[serde(default)]
    pub pose: Pose,
}

impl DepotSpot {
    pub fn is_charger(&self) -> bool {
        self.kind == SpotKind::Charger
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Arrival,
    SpotAssigned,
    ChargeStart,
    ChargeComplete,
    Interchange,
    Departure,
    ReplanTrigger,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::SpotAssigned => "spot-assigned",
            EventKind::ChargeStart => "charge-start",
            EventKind::ChargeComplete => "charge-complete",
            EventKind::Interchange => "interchange",
            EventKind::Departure => "departure",
            EventKind::ReplanTrigger => "replan-trigger",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepotEvent {
    pub slot: usize,
    pub kind: EventKind,
    pub bus: String,
    pub spot: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DepotError {
    #[error("depot layout: {0}")]
    Layout(String),
    #[error("no free spot for arriving bus `{bus}` at slot {slot}")]
    Full { bus: String, slot: usize },
    #[error("bus `{bus}` is already in the depot")]
    AlreadyPresent { bus: String },
    #[error("step to slot {got}, expected slot {expected}")]
    OutOfOrder { expected: usize, got: usize },
    #[error("cannot read depot layout {path}: {reason}")]
    Io { path: String, reason: String },
}

/// The spots of one depot. Charger spots are tied to scenario chargers by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DepotLayout {
    pub spots: Vec<DepotSpot>,
}

impl DepotLayout {
    /// One charger spot per scenario charger and one parking-only spot per
    /// bus, laid out in two rows 4 m apart.
    pub fn default_for(s: &Scenario) -> Self {
        let mut spots: Vec<DepotSpot> = s
            .chargers
            .iter()
            .enumerate()
            .map(|(k, c)| DepotSpot {
                id: c.spot_id.clone(),
                kind: SpotKind::Charger,
                charger_id: Some(c.id.clone()),
                pose: Pose::new(4.0 * k as f64, 0.0, std::f64::consts::FRAC_PI_2),
            })
            .collect();
        spots.extend(s.buses.iter().enumerate().map(|(k, b)| DepotSpot {
            id: format!("parking-{}", b.id),
            kind: SpotKind::ParkingOnly,
            charger_id: None,
            pose: Pose::new(4.0 * k as f64, 20.0, std::f64::consts::FRAC_PI_2),
        }));
        Self { spots }
    }

    pub fn from_json_str(text: &str) -> Result<Self, DepotError> {
        serde_json::from_str(text).map_err(|e| DepotError::Layout(e.to_string()))
    }

    pub fn from_json_file(path: &Path) -> Result<Self, DepotError> {
        let text = std::fs::read_to_string(path).map_err(|e| DepotError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json_str(&text)
    }

    pub fn spot_index(&self, id: &str) -> Option<usize> {
        self.spots.iter().position(|p| p.id == id)
    }

    /// Structural defects, and mismatches against the scenario's chargers.
    pub fn check(&self, s: &Scenario) -> Vec<Defect> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for p in &self.spots {
            let e = format!("spot/{}", p.id);
            if !seen.insert(p.id.as_str()) {
                out.push(Defect::new(&e, "duplicate id"));
            }
            if p.is_charger() != p.charger_id.is_some() {
                out.push(Defect::new(&e, "kind=charger iff charger_id is present"));
            }
            if let Some(c) = &p.charger_id {
                if !s.chargers.iter().any(|x| &x.id == c) {
                    out.push(Defect::new(&e, format!("unknown charger `{c}`")));
                }
            }
        }
        for c in &s.chargers {
            if !self
                .spots
                .iter()
                .any(|p| p.charger_id.as_deref() == Some(c.id.as_str()))
            {
                out.push(Defect::new(
                    format!("charger/{}", c.id),
                    "no depot spot hosts this charger",
                ));
            }
        }
        if self.spots.iter().filter(|p| p.is_charger()).count() > s.chargers.len() {
            out.push(Defect::new("depot", "more charger spots than chargers"));
        }
        out
    }
}

/// CSV rows `slot,time,kind,bus_id,spot_id`.
pub fn events_csv(s: &Scenario, events: &[DepotEvent]) -> String {
    let mut out = String::from("slot,time,kind,bus_id,spot_id\n");
    for e in events {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            e.slot,
            s.grid.clock_label(e.slot),
            e.kind,
            e.bus,
            e.spot.as_deref().unwrap_or("")
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::one_bus_one_block;

    #[test]
    fn default_layout_is_clean() {
        let s = one_bus_one_block();
        let l = DepotLayout::default_for(&s);
        assert_eq!(l.spots.len(), 2);
        assert!(l.check(&s).is_empty());
    }

    #[test]
    fn layout_json_uses_kebab_kinds() {
        let l = DepotLayout::from_json_str(
            r#"[{"id":"a","kind":"charger","charger_id":"c1","pose":{"x":1,"y":2,"heading":0}},
                {"id":"p","kind":"parking-only"}]"#,
        )
        .unwrap();
        assert_eq!(l.spots[1].kind, SpotKind::ParkingOnly);
        assert!(l.check(&one_bus_one_block()).is_empty());
    }

    #[test]
    fn charger_without_id_is_a_defect() {
        let s = one_bus_one_block();
        let mut l = DepotLayout::default_for(&s);
        l.spots[0].charger_id = None;
        let d = l.check(&s);
        assert!(d.iter().any(|d| d.entity == "spot/s1"));
        assert!(d.iter().any(|d| d.entity == "charger/c1"));
    }
}
