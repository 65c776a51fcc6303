//! Scenario JSON ingestion and CSV plan exchange.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::depot::DepotLayout;
use crate::model::{
    format_hhmm, parse_hhmm, runs, validate_scenario, Block, Bus, BusType, Certificate, Charger,
    Decisions, OperationalConstraints, Plan, RouteDescriptor, Scenario, TimeGrid,
};
use crate::solver::Instance;
use crate::twin::{DigitalTwin, TripProfile, TwinLibrary};

use super::HarnessError;

const MINUTES_PER_DAY: u32 = 24 * 60;

/// A slot boundary given either as an index or as `HH:MM`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum TimeSpec {
    Slot(usize),
    Clock(String),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DayStart {
    Minutes(u32),
    Clock(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    day_start: DayStart,
    slot_minutes: u32,
    slot_count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum RawRoute {
    EnergyKwh(BTreeMap<String, f64>),
    TripProfile(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlock {
    id: String,
    start_slot: TimeSpec,
    end_slot: TimeSpec,
    distance: f64,
    route_descriptor: RawRoute,
    #[serde(default)]
    required_profile: BTreeSet<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraints {
    max_concurrent_sessions_peak: usize,
    peak_window: (TimeSpec, TimeSpec),
    #[serde(default)]
    min_buses_in_service: Vec<(TimeSpec, usize)>,
    setup_slots: usize,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum TwinSource {
    Path(String),
    Inline(Box<DigitalTwin>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBusType {
    id: String,
    battery_capacity: f64,
    compatible_profile: BTreeSet<String>,
    twin_id: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBus {
    id: String,
    bus_type: String,
    soc_initial: f64,
    soc_min: f64,
    soc_max: f64,
    soc_final_target: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCharger {
    id: String,
    spot_id: String,
    max_power: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    grid: RawGrid,
    bus_types: Vec<RawBusType>,
    buses: Vec<RawBus>,
    blocks: Vec<RawBlock>,
    chargers: Vec<RawCharger>,
    constraints: RawConstraints,
    #[serde(default)]
    depot_map_id: Option<String>,
    #[serde(default)]
    twins: BTreeMap<String, TwinSource>,
    #[serde(default)]
    trip_profiles: BTreeMap<String, String>,
    #[serde(default)]
    depot_layout: Option<String>,
}

/// A scenario with everything it references resolved.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub twins: TwinLibrary,
    pub layout: DepotLayout,
}

fn resolve(grid: &TimeGrid, t: &TimeSpec, what: &str) -> Result<usize, HarnessError> {
    match t {
        TimeSpec::Slot(k) => Ok(*k),
        TimeSpec::Clock(c) => grid
            .slot_of_clock(c)
            .map_err(|e| HarnessError::Parse(format!("{what}: {e}"))),
    }
}

/// Like [`resolve`], but a clock time at or before `after` means the next day.
fn resolve_end(
    grid: &TimeGrid,
    t: &TimeSpec,
    after: usize,
    what: &str,
) -> Result<usize, HarnessError> {
    match t {
        TimeSpec::Slot(k) => Ok(*k),
        TimeSpec::Clock(c) => {
            let m = grid
                .resolve_clock(c)
                .map_err(|e| HarnessError::Parse(format!("{what}: {e}")))?;
            let m = if m <= grid.time_of(after) {
                m + MINUTES_PER_DAY
            } else {
                m
            };
            grid.slot_of(m)
                .map_err(|e| HarnessError::Parse(format!("{what}: {e}")))
        }
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

impl LoadedScenario {
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json_str(&read(path)?, &base)
    }

    /// Relative paths inside the document resolve against `base`.
    pub fn from_json_str(text: &str, base: &Path) -> Result<Self, HarnessError> {
        let raw: RawScenario =
            serde_json::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        let day_start = match &raw.grid.day_start {
            DayStart::Minutes(m) => *m,
            DayStart::Clock(c) => {
                parse_hhmm(c).map_err(|e| HarnessError::Parse(format!("grid.day_start: {e}")))?
            }
        };
        let grid = TimeGrid::new(day_start, raw.grid.slot_minutes, raw.grid.slot_count);
        if grid.slot_minutes == 0 {
            return Err(HarnessError::Parse(
                "grid.slot_minutes must be positive".into(),
            ));
        }

        let mut blocks = Vec::with_capacity(raw.blocks.len());
        for b in raw.blocks {
            let what = format!("block/{}", b.id);
            let start_slot = resolve(&grid, &b.start_slot, &what)?;
            let end_slot = resolve_end(&grid, &b.end_slot, start_slot, &what)?;
            blocks.push(Block {
                id: b.id,
                start_slot,
                end_slot,
                distance: b.distance,
                route: match b.route_descriptor {
                    RawRoute::EnergyKwh(m) => RouteDescriptor::Energy(m),
                    RawRoute::TripProfile(p) => RouteDescriptor::Profile(p),
                },
                required_profile: b.required_profile,
            });
        }
        let c = raw.constraints;
        let peak_start = resolve(&grid, &c.peak_window.0, "constraints.peak_window")?;
        let peak_end = resolve_end(
            &grid,
            &c.peak_window.1,
            peak_start,
            "constraints.peak_window",
        )?;
        let mut min_buses_in_service = Vec::new();
        for (t, count) in &c.min_buses_in_service {
            min_buses_in_service.push((
                resolve(&grid, t, "constraints.min_buses_in_service")?,
                *count,
            ));
        }

        let scenario = Scenario {
            grid,
            bus_types: raw
                .bus_types
                .into_iter()
                .map(|t| BusType {
                    id: t.id,
                    battery_capacity: t.battery_capacity,
                    compatible_profile: t.compatible_profile,
                    twin_id: t.twin_id,
                })
                .collect(),
            buses: raw
                .buses
                .into_iter()
                .map(|b| Bus {
                    id: b.id,
                    bus_type: b.bus_type,
                    soc_initial: b.soc_initial,
                    soc_min: b.soc_min,
                    soc_max: b.soc_max,
                    soc_final_target: b.soc_final_target,
                })
                .collect(),
            blocks,
            chargers: raw
                .chargers
                .into_iter()
                .map(|c| Charger {
                    id: c.id,
                    spot_id: c.spot_id,
                    max_power: c.max_power,
                })
                .collect(),
            constraints: OperationalConstraints {
                max_concurrent_sessions_peak: c.max_concurrent_sessions_peak,
                peak_window: (peak_start, peak_end),
                min_buses_in_service,
                setup_slots: c.setup_slots,
            },
            depot_map_id: raw.depot_map_id,
        };
        let mut defects = validate_scenario(&scenario);

        let mut twins = TwinLibrary::default();
        for (id, src) in raw.twins {
            let twin = match src {
                TwinSource::Inline(t) => *t,
                TwinSource::Path(p) => {
                    let path = base.join(p);
                    DigitalTwin::from_json_str(&read(&path)?)
                        .map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?
                }
            };
            twins.twins.insert(id, twin);
        }
        for (id, p) in raw.trip_profiles {
            let path: PathBuf = base.join(p);
            let text = read(&path)?;
            let profile = TripProfile::from_csv(text.as_bytes())
                .map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?;
            twins.profiles.insert(id, profile);
        }
        defects.extend(twins.check_references(&scenario));

        let layout = match raw.depot_layout {
            Some(p) => {
                let path = base.join(p);
                DepotLayout::from_json_str(&read(&path)?)
                    .map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?
            }
            None => DepotLayout::default_for(&scenario),
        };
        defects.extend(layout.check(&scenario));
        if !defects.is_empty() {
            return Err(HarnessError::Defects(defects));
        }
        Ok(Self {
            scenario,
            twins,
            layout,
        })
    }
}

/// Absolute clock label, past 24:00 when the horizon crosses midnight, so
/// labels are unambiguous.
pub fn time_label(grid: &TimeGrid, slot: usize) -> String {
    format_hhmm(grid.time_of(slot))
}

/// Spreads charging sessions over charger ids: each session holds one
/// charger from its setup start to its end, first free charger first.
pub fn charger_of_sessions(inst: &Instance, d: &Decisions) -> BTreeMap<(usize, usize), String> {
    let s = inst.scenario();
    let setup = s.constraints.setup_slots;
    let mut sessions: Vec<(usize, usize, usize, usize)> = Vec::new();
    for i in 0..s.buses.len() {
        for (c, e) in d.sessions(i) {
            sessions.push((c.saturating_sub(setup), i, c, e));
        }
    }
    sessions.sort();
    let mut free_at = vec![0usize; s.chargers.len()];
    let mut out = BTreeMap::new();
    for (hold, i, c, e) in sessions {
        // Interval colouring by start time never overflows a feasible plan.
        let k = (0..free_at.len())
            .find(|&k| free_at[k] <= hold)
            .or_else(|| (0..free_at.len()).min_by_key(|&k| free_at[k]));
        if let Some(k) = k {
            free_at[k] = e;
            out.insert((i, c), s.chargers[k].id.clone());
        }
    }
    out
}

fn parse_certificate(s: &str) -> Option<Certificate> {
    match s {
        "proven-optimal" => Some(Certificate::ProvenOptimal),
        "heuristic" => Some(Certificate::Heuristic),
        _ => s
            .strip_prefix("best-found-with-bound(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|b| b.parse().ok())
            .map(|bound| Certificate::BestFound { bound }),
    }
}

/// Rows `bus_id,kind,start_time,end_time,ref,soc_start,soc_end` in bus
/// order, then a `# summary` line.
pub fn plan_csv(inst: &Instance, plan: &Plan) -> String {
    let s = inst.scenario();
    let g = &s.grid;
    let setup = s.constraints.setup_slots;
    let chargers = charger_of_sessions(inst, &plan.decisions);
    let mut out = String::from("bus_id,kind,start_time,end_time,ref,soc_start,soc_end\n");
    for (i, bus) in s.buses.iter().enumerate() {
        let trace = &plan.soc_trace[i];
        let mut rows: Vec<(usize, u8, usize, String)> = Vec::new();
        for j in plan.decisions.blocks_of(i) {
            let b = &s.blocks[j];
            if setup > 0 && b.start_slot >= setup {
                rows.push((b.start_slot - setup, 0, b.start_slot, b.id.clone()));
            }
            rows.push((b.start_slot, 1, b.end_slot, b.id.clone()));
        }
        for (c, e) in plan.decisions.sessions(i) {
            let id = chargers.get(&(i, c)).cloned().unwrap_or_default();
            if setup > 0 && c >= setup {
                rows.push((c - setup, 0, c, id.clone()));
            }
            rows.push((c, 2, e, id));
        }
        rows.sort();
        for (a, kind, b, r) in rows {
            let kind = ["setup", "block", "charge"][kind as usize];
            out.push_str(&format!(
                "{},{},{},{},{},{:.6},{:.6}\n",
                bus.id,
                kind,
                time_label(g, a),
                time_label(g, b),
                r,
                trace[a],
                trace[b]
            ));
        }
    }
    out.push_str(&format!(
        "# summary objective_miles={:.6} certificate={}\n",
        plan.objective_miles, plan.certificate
    ));
    out
}

#[derive(Debug, Deserialize)]
struct PlanRow {
    bus_id: String,
    kind: String,
    start_time: String,
    end_time: String,
    #[serde(rename = "ref")]
    reference: String,
}

/// Reads decisions and the certificate back from [`plan_csv`] output.
/// SOC columns are ignored; they follow from the decisions.
pub fn read_plan_csv(s: &Scenario, text: &str) -> Result<(Decisions, Certificate), HarnessError> {
    let bad = |m: String| HarnessError::Parse(format!("plan: {m}"));
    let mut certificate = Certificate::Heuristic;
    let body: String = text
        .lines()
        .filter(|l| {
            if let Some(rest) = l.strip_prefix("# summary") {
                if let Some(c) = rest
                    .split_whitespace()
                    .find_map(|kv| kv.strip_prefix("certificate="))
                {
                    certificate = parse_certificate(c).unwrap_or(Certificate::Heuristic);
                }
                false
            } else {
                !l.starts_with('#')
            }
        })
        .map(|l| format!("{l}\n"))
        .collect();
    let mut d = Decisions::for_scenario(s);
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    for row in rdr.deserialize::<PlanRow>() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let i = s
            .bus_index(&row.bus_id)
            .ok_or_else(|| bad(format!("unknown bus `{}`", row.bus_id)))?;
        let start = parse_hhmm(&row.start_time)
            .and_then(|m| s.grid.slot_of(m))
            .map_err(|e| bad(e.to_string()))?;
        let end = parse_hhmm(&row.end_time)
            .and_then(|m| s.grid.slot_of(m))
            .map_err(|e| bad(e.to_string()))?;
        match row.kind.as_str() {
            "block" => {
                let j = s
                    .block_index(&row.reference)
                    .ok_or_else(|| bad(format!("unknown block `{}`", row.reference)))?;
                let b = &s.blocks[j];
                if (b.start_slot, b.end_slot) != (start, end) {
                    return Err(bad(format!(
                        "block `{}` times do not match the scenario",
                        b.id
                    )));
                }
                d.assignments.insert((i, j));
            }
            "charge" => {
                if start >= end || end > s.grid.slot_count {
                    return Err(bad(format!(
                        "charge row for `{}` has an empty or out-of-range span",
                        row.bus_id
                    )));
                }
                for t in start..end {
                    d.charging[i][t] = true;
                }
            }
            "setup" => {}
            k => return Err(bad(format!("unknown row kind `{k}`"))),
        }
    }
    Ok((d, certificate))
}

/// `slot,time,<bus ids>` at every slot boundary.
pub fn soc_trace_csv(s: &Scenario, trace: &[Vec<f64>]) -> String {
    let mut out = String::from("slot,time");
    for b in &s.buses {
        out.push(',');
        out.push_str(&b.id);
    }
    out.push('\n');
    for k in 0..=s.grid.slot_count {
        out.push_str(&format!("{k},{}", time_label(&s.grid, k)));
        for tr in trace {
            out.push_str(&format!(",{:.6}", tr[k]));
        }
        out.push('\n');
    }
    out
}

/// Busiest slot's count of charging buses.
pub fn peak_concurrent(d: &Decisions, slots: usize) -> usize {
    (0..slots)
        .map(|t| {
            d.charging
                .iter()
                .filter(|row| row.get(t).copied().unwrap_or(false))
                .count()
        })
        .max()
        .unwrap_or(0)
}

/// Charging slots over charger-slots available.
pub fn charger_utilization(s: &Scenario, d: &Decisions) -> f64 {
    let total = s.chargers.len() * s.grid.slot_count;
    if total == 0 {
        return 0.0;
    }
    let used: usize = d
        .charging
        .iter()
        .map(|row| runs(row).iter().map(|(a, b)| b - a).sum::<usize>())
        .sum();
    used as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::testkit::{block, instance, scenario};
    use crate::solver::{solve_exact, Budget};

    const TINY: &str = r#"{
        "grid": {"day_start": "05:00", "slot_minutes": 15, "slot_count": 96},
        "bus_types": [{"id": "std", "battery_capacity": 400, "compatible_profile": ["40ft"], "twin_id": "t"}],
        "buses": [{"id": "b1", "bus_type": "std", "soc_initial": 0.85, "soc_min": 0.35, "soc_max": 1.0, "soc_final_target": 0.85}],
        "blocks": [{"id": "k1", "start_slot": "06:00", "end_slot": "07:00", "distance": 30,
                    "route_descriptor": {"energy_kwh": {"std": 80}}, "required_profile": ["40ft"]}],
        "chargers": [{"id": "c1", "spot_id": "s1", "max_power": 120}],
        "constraints": {"max_concurrent_sessions_peak": 1, "peak_window": ["06:00", "05:00"],
                        "min_buses_in_service": [["06:30", 1]], "setup_slots": 1},
        "twins": {"t": {
            "vehicle_params": {"mass_total": 15000, "mass_effective": 15600, "aero_coeff": 3.0, "rolling_coeff": 0.008,
                               "cornering_stiffness": 200000, "config_id": "std", "aux_power": 5},
            "efficiency_map": {"force_axis": [0, 1], "speed_axis": [0, 1], "efficiency": [[0.9, 0.9], [0.9, 0.9]], "floor": 0.5},
            "brake_allocation": {"regen_min_speed": 3, "max_regen_force": 20000},
            "charging_curve": {"breakpoints": [[0.0, 120], [1.0, 120]], "charge_efficiency": 1.0}}}
    }"#;

    #[test]
    fn clock_times_resolve_to_slots() {
        let l = LoadedScenario::from_json_str(TINY, Path::new(".")).unwrap();
        let s = &l.scenario;
        assert_eq!((s.blocks[0].start_slot, s.blocks[0].end_slot), (4, 8));
        assert_eq!(s.constraints.peak_window, (4, 96));
        assert_eq!(s.constraints.min_buses_in_service, vec![(6, 1)]);
        assert_eq!(l.layout.spots.len(), 2);
    }

    #[test]
    fn defects_are_collected() {
        let broken = TINY.replace("\"soc_initial\": 0.85", "\"soc_initial\": 0.30");
        match LoadedScenario::from_json_str(&broken, Path::new(".")) {
            Err(HarnessError::Defects(d)) => assert_eq!(d.len(), 1),
            other => panic!("{other:?}"),
        }
        let missing = TINY.replace("\"twin_id\": \"t\"", "\"twin_id\": \"nope\"");
        assert!(matches!(
            LoadedScenario::from_json_str(&missing, Path::new(".")),
            Err(HarnessError::Defects(_))
        ));
    }

    #[test]
    fn plan_csv_reads_back() {
        let mut s = scenario(24, 2, 1);
        s.blocks = vec![block("a", 2, 6, 10.0, 0.3), block("b", 8, 12, 12.0, 0.3)];
        let inst = instance(&s);
        let plan = solve_exact(&inst, Budget::default()).unwrap();
        let text = plan_csv(&inst, &plan);
        assert!(text
            .lines()
            .last()
            .unwrap()
            .starts_with("# summary objective_miles=22.000000"));
        let (d, cert) = read_plan_csv(&s, &text).unwrap();
        assert_eq!(d, plan.decisions);
        assert_eq!(cert, plan.certificate);
    }

    #[test]
    fn labels_pass_midnight() {
        let g = TimeGrid::new(20 * 60, 60, 8);
        assert_eq!(time_label(&g, 5), "25:00");
        assert_eq!(g.slot_of(parse_hhmm("25:00").unwrap()).unwrap(), 5);
    }
}
