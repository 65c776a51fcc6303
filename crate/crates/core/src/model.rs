//! Shared vocabulary: the slot grid, fleet, blocks, chargers, operating
//! rules and plans for one service day at a single depot.
//!
//! All SOC quantities are fractions of the owning bus type's battery
//! capacity. Conversions to and from kWh only happen in [`crate::twin`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Minutes in a day, used when resolving `HH:MM` strings that fall before
/// `day_start` onto the following day.
pub const MINUTES_PER_DAY: u32 = 24 * 60;

/// Longest supported horizon, in minutes (one service day plus the
/// overnight charging tail).
pub const MAX_HORIZON_MINUTES: u32 = 30 * 60;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimeError {
    #[error("time {minutes} min is {offset} min past a slot boundary (slot = {slot_minutes} min)")]
    OffBoundary {
        minutes: u32,
        offset: u32,
        slot_minutes: u32,
    },
    #[error("time {minutes} min lies outside the horizon [{start}, {end}] min")]
    OutOfHorizon { minutes: u32, start: u32, end: u32 },
    #[error("cannot parse `{0}` as HH:MM")]
    Parse(String),
}

/// Uniform discretisation of the planning horizon.
///
/// Slot `k` covers `[day_start + k*slot_minutes, day_start + (k+1)*slot_minutes)`.
/// Boundary `slot_count` is the horizon end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    /// Wall-clock minutes after midnight of slot 0.
    pub day_start: u32,
    pub slot_minutes: u32,
    pub slot_count: usize,
}

impl TimeGrid {
    pub fn new(day_start: u32, slot_minutes: u32, slot_count: usize) -> Self {
        Self {
            day_start,
            slot_minutes,
            slot_count,
        }
    }

    pub fn horizon_minutes(&self) -> u32 {
        self.slot_minutes * self.slot_count as u32
    }

    /// Absolute wall-clock minutes (may exceed 24 h) of slot boundary `slot`.
    pub fn time_of(&self, slot: usize) -> u32 {
        self.day_start + slot as u32 * self.slot_minutes
    }

    /// Exact slot index of an absolute wall-clock minute value.
    pub fn slot_of(&self, wall_clock_minutes: u32) -> Result<usize, TimeError> {
        let end = self.day_start + self.horizon_minutes();
        if wall_clock_minutes < self.day_start || wall_clock_minutes > end {
            return Err(TimeError::OutOfHorizon {
                minutes: wall_clock_minutes,
                start: self.day_start,
                end,
            });
        }
        let rel = wall_clock_minutes - self.day_start;
        let offset = rel % self.slot_minutes;
        if offset != 0 {
            return Err(TimeError::OffBoundary {
                minutes: wall_clock_minutes,
                offset,
                slot_minutes: self.slot_minutes,
            });
        }
        Ok((rel / self.slot_minutes) as usize)
    }

    /// Resolves an `HH:MM` string against `day_start`: clock times earlier
    /// than `day_start` refer to the next calendar day. Hours of 24 and up
    /// are taken literally.
    pub fn resolve_clock(&self, hhmm: &str) -> Result<u32, TimeError> {
        let minutes = parse_hhmm(hhmm)?;
        if minutes < self.day_start && minutes < MINUTES_PER_DAY {
            Ok(minutes + MINUTES_PER_DAY)
        } else {
            Ok(minutes)
        }
    }

    pub fn slot_of_clock(&self, hhmm: &str) -> Result<usize, TimeError> {
        self.slot_of(self.resolve_clock(hhmm)?)
    }

    /// `HH:MM` label of a slot boundary, wrapped to a 24 h clock.
    pub fn clock_label(&self, slot: usize) -> String {
        format_hhmm(self.time_of(slot) % MINUTES_PER_DAY)
    }

    pub fn slot_hours(&self) -> f64 {
        self.slot_minutes as f64 / 60.0
    }
}

pub fn parse_hhmm(s: &str) -> Result<u32, TimeError> {
    let (h, m) = s
        .trim()
        .split_once(':')
        .ok_or_else(|| TimeError::Parse(s.to_string()))?;
    let h: u32 = h.parse().map_err(|_| TimeError::Parse(s.to_string()))?;
    let m: u32 = m.parse().map_err(|_| TimeError::Parse(s.to_string()))?;
    if m >= 60 {
        return Err(TimeError::Parse(s.to_string()));
    }
    Ok(h * 60 + m)
}

pub fn format_hhmm(minutes: u32) -> String {
    format!("{:02}:{:02}", minutes / 60, minutes % 60)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusType {
    pub id: String,
    /// kWh.
    pub battery_capacity: f64,
    pub compatible_profile: BTreeSet<String>,
    pub twin_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: String,
    pub bus_type: String,
    pub soc_initial: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc_final_target: f64,
}

/// Where a block's energy demand comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum RouteDescriptor {
    /// kWh per bus type id.
    Energy(BTreeMap<String, f64>),
    /// Id of a trip profile evaluated through each type's twin.
    Profile(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: String,
    pub start_slot: usize,
    pub end_slot: usize,
    /// Miles.
    pub distance: f64,
    pub route: RouteDescriptor,
    pub required_profile: BTreeSet<String>,
}

impl Block {
    pub fn len_slots(&self) -> usize {
        self.end_slot.saturating_sub(self.start_slot)
    }

    pub fn covers(&self, slot: usize) -> bool {
        self.start_slot <= slot && slot < self.end_slot
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Charger {
    pub id: String,
    pub spot_id: String,
    /// kW.
    pub max_power: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperationalConstraints {
    pub max_concurrent_sessions_peak: usize,
    /// Half-open slot interval `[start, end)`.
    pub peak_window: (usize, usize),
    pub min_buses_in_service: Vec<(usize, usize)>,
    pub setup_slots: usize,
}

impl OperationalConstraints {
    pub fn in_peak(&self, slot: usize) -> bool {
        self.peak_window.0 <= slot && slot < self.peak_window.1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: TimeGrid,
    pub bus_types: Vec<BusType>,
    pub buses: Vec<Bus>,
    pub blocks: Vec<Block>,
    pub chargers: Vec<Charger>,
    pub constraints: OperationalConstraints,
    pub depot_map_id: Option<String>,
}

impl Scenario {
    pub fn bus_type_index(&self, id: &str) -> Option<usize> {
        self.bus_types.iter().position(|t| t.id == id)
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn block_index(&self, id: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.id == id)
    }

    pub fn type_of(&self, bus: usize) -> Option<&BusType> {
        self.bus_type_index(&self.buses[bus].bus_type)
            .map(|t| &self.bus_types[t])
    }

    /// Profile tags permit the pairing (energy feasibility is a separate check).
    pub fn profile_compatible(&self, bus_type: &BusType, block: &Block) -> bool {
        block
            .required_profile
            .is_subset(&bus_type.compatible_profile)
    }

    pub fn total_distance(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.distance)
            .fold(0.0, |a, b| a + b)
    }
}

/// A broken scenario invariant. Defects are data: validation never fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Defect {
    pub entity: String,
    pub rule: String,
}

impl Defect {
    pub fn new(entity: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            entity: entity.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.rule)
    }
}

fn duplicates<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = BTreeSet::new();
    let mut dup = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            dup.insert(id);
        }
    }
    dup.into_iter().collect()
}

fn is_fraction(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

/// Checks every structural invariant of the scenario types. Twin and trip
/// profile references are checked by [`crate::twin::TwinLibrary::check_references`].
pub fn validate_scenario(s: &Scenario) -> Vec<Defect> {
    let mut out = Vec::new();
    let g = &s.grid;

    if g.slot_minutes == 0 || 60 % g.slot_minutes != 0 {
        out.push(Defect::new(
            "grid",
            "slot_minutes must be positive and divide 60",
        ));
    }
    if g.slot_count == 0 {
        out.push(Defect::new("grid", "slot_count must be positive"));
    }
    if g.slot_minutes as u64 * g.slot_count as u64 > MAX_HORIZON_MINUTES as u64 {
        out.push(Defect::new("grid", "horizon exceeds 30 h"));
    }

    for (list, ids) in [
        (
            "bus_types",
            s.bus_types
                .iter()
                .map(|t| t.id.as_str())
                .collect::<Vec<_>>(),
        ),
        ("buses", s.buses.iter().map(|b| b.id.as_str()).collect()),
        ("blocks", s.blocks.iter().map(|b| b.id.as_str()).collect()),
        (
            "chargers",
            s.chargers.iter().map(|c| c.id.as_str()).collect(),
        ),
    ] {
        for d in duplicates(ids.into_iter()) {
            out.push(Defect::new(format!("{list}/{d}"), "duplicate id"));
        }
    }

    for t in &s.bus_types {
        if !(t.battery_capacity > 0.0) {
            out.push(Defect::new(
                format!("bus_type/{}", t.id),
                "battery_capacity must be > 0",
            ));
        }
    }

    for b in &s.buses {
        let e = format!("bus/{}", b.id);
        if s.bus_type_index(&b.bus_type).is_none() {
            out.push(Defect::new(
                &e,
                format!("unknown bus_type `{}`", b.bus_type),
            ));
        }
        let fracs = [b.soc_initial, b.soc_min, b.soc_max, b.soc_final_target];
        if !fracs.iter().all(|&x| is_fraction(x)) {
            out.push(Defect::new(&e, "SOC values must lie in [0, 1]"));
        }
        if !(b.soc_min < b.soc_final_target && b.soc_final_target <= b.soc_max && b.soc_max <= 1.0)
        {
            out.push(Defect::new(
                &e,
                "require soc_min < soc_final_target <= soc_max <= 1",
            ));
        }
        if !(b.soc_min <= b.soc_initial && b.soc_initial <= b.soc_max) {
            out.push(Defect::new(&e, "require soc_min <= soc_initial <= soc_max"));
        }
    }

    for blk in &s.blocks {
        let e = format!("block/{}", blk.id);
        if blk.start_slot >= blk.end_slot {
            out.push(Defect::new(&e, "start_slot must be < end_slot"));
        }
        if blk.end_slot > g.slot_count {
            out.push(Defect::new(&e, "end_slot beyond horizon"));
        }
        if !(blk.distance > 0.0) {
            out.push(Defect::new(&e, "distance must be > 0"));
        }
        if let RouteDescriptor::Energy(per_type) = &blk.route {
            for t in &s.bus_types {
                if !s.profile_compatible(t, blk) {
                    continue;
                }
                match per_type.get(&t.id) {
                    None => out.push(Defect::new(
                        &e,
                        format!("no energy defined for compatible bus type `{}`", t.id),
                    )),
                    Some(&kwh) if !(kwh >= 0.0) => out.push(Defect::new(&e, "energy must be >= 0")),
                    _ => {}
                }
            }
            for tid in per_type.keys() {
                if s.bus_type_index(tid).is_none() {
                    out.push(Defect::new(
                        &e,
                        format!("energy given for unknown bus type `{tid}`"),
                    ));
                }
            }
        }
    }

    let mut spots = BTreeSet::new();
    for c in &s.chargers {
        let e = format!("charger/{}", c.id);
        if !(c.max_power > 0.0) {
            out.push(Defect::new(&e, "max_power must be > 0"));
        }
        if !spots.insert(c.spot_id.as_str()) {
            out.push(Defect::new(
                &e,
                format!("spot `{}` already has a charger", c.spot_id),
            ));
        }
    }

    let oc = &s.constraints;
    if oc.max_concurrent_sessions_peak > s.chargers.len() {
        out.push(Defect::new(
            "constraints",
            "max_concurrent_sessions_peak exceeds charger count",
        ));
    }
    if oc.setup_slots < 1 {
        out.push(Defect::new("constraints", "setup_slots must be >= 1"));
    }
    if oc.peak_window.0 > oc.peak_window.1 || oc.peak_window.1 > g.slot_count {
        out.push(Defect::new(
            "constraints",
            "peak_window must be an ordered interval inside the horizon",
        ));
    }
    for &(slot, count) in &oc.min_buses_in_service {
        if slot >= g.slot_count {
            out.push(Defect::new(
                "constraints",
                format!("service requirement at slot {slot} beyond horizon"),
            ));
        }
        if count > s.buses.len() {
            out.push(Defect::new(
                "constraints",
                format!("service requirement at slot {slot} exceeds fleet size"),
            ));
        }
    }
    out
}

/// How much trust a plan's objective deserves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Certificate {
    ProvenOptimal,
    /// Best plan found; no plan can exceed `bound` miles.
    BestFound {
        bound: f64,
    },
    Heuristic,
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Certificate::ProvenOptimal => write!(f, "proven-optimal"),
            Certificate::BestFound { bound } => write!(f, "best-found-with-bound({bound:.6})"),
            Certificate::Heuristic => write!(f, "heuristic"),
        }
    }
}

/// The decision variables: who serves which block, and who charges when.
///
/// Indices refer to `Scenario::buses` and `Scenario::blocks`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decisions {
    pub assignments: BTreeSet<(usize, usize)>,
    /// `charging[bus][slot]`.
    pub charging: Vec<Vec<bool>>,
}

impl Decisions {
    pub fn empty(buses: usize, slots: usize) -> Self {
        Self {
            assignments: BTreeSet::new(),
            charging: vec![vec![false; slots]; buses],
        }
    }

    pub fn for_scenario(s: &Scenario) -> Self {
        Self::empty(s.buses.len(), s.grid.slot_count)
    }

    pub fn blocks_of(&self, bus: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignments
            .iter()
            .filter(move |(b, _)| *b == bus)
            .map(|&(_, j)| j)
    }

    pub fn bus_of(&self, block: usize) -> Option<usize> {
        self.assignments
            .iter()
            .find(|(_, j)| *j == block)
            .map(|&(i, _)| i)
    }

    pub fn served_miles(&self, s: &Scenario) -> f64 {
        self.assignments
            .iter()
            .map(|&(_, j)| s.blocks[j].distance)
            .fold(0.0, |a, b| a + b)
    }

    /// Maximal runs of charging slots per bus, as `(start, end)` half-open.
    pub fn sessions(&self, bus: usize) -> Vec<(usize, usize)> {
        runs(&self.charging[bus])
    }
}

pub(crate) fn runs(bits: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut t = 0;
    while t < bits.len() {
        if bits[t] {
            let s = t;
            while t < bits.len() && bits[t] {
                t += 1;
            }
            out.push((s, t));
        } else {
            t += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub decisions: Decisions,
    /// `soc_trace[bus][boundary]`, `slot_count + 1` entries per bus.
    pub soc_trace: Vec<Vec<f64>>,
    pub objective_miles: f64,
    pub certificate: Certificate,
}

impl Plan {
    pub fn recomputed_objective(&self, s: &Scenario) -> f64 {
        self.decisions.served_miles(s)
    }

    pub fn served_blocks(&self) -> Vec<usize> {
        self.decisions.assignments.iter().map(|&(_, j)| j).collect()
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn grid_15() -> TimeGrid {
        TimeGrid::new(5 * 60, 15, 96)
    }

    pub fn one_bus_one_block() -> Scenario {
        Scenario {
            grid: grid_15(),
            bus_types: vec![BusType {
                id: "std".into(),
                battery_capacity: 400.0,
                compatible_profile: ["40ft".to_string()].into(),
                twin_id: "twin".into(),
            }],
            buses: vec![Bus {
                id: "b1".into(),
                bus_type: "std".into(),
                soc_initial: 0.85,
                soc_min: 0.35,
                soc_max: 1.0,
                soc_final_target: 0.85,
            }],
            blocks: vec![Block {
                id: "blk1".into(),
                start_slot: 4,
                end_slot: 8,
                distance: 30.0,
                route: RouteDescriptor::Energy([("std".to_string(), 80.0)].into()),
                required_profile: ["40ft".to_string()].into(),
            }],
            chargers: vec![Charger {
                id: "c1".into(),
                spot_id: "s1".into(),
                max_power: 120.0,
            }],
            constraints: OperationalConstraints {
                max_concurrent_sessions_peak: 1,
                peak_window: (4, 68),
                min_buses_in_service: vec![],
                setup_slots: 1,
            },
            depot_map_id: None,
        }
    }
}
