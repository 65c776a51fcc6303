use std::fmt;

use crate::model::{runs, Certificate, Decisions, Plan};

use super::Instance;

pub(crate) const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    DoubleService,
    Overlap,
    SocBelowMin,
    SocAboveMax,
    FinalSoc,
    ChargerCapacity,
    PeakCap,
    SetupGap,
    IncompatibleType,
    ServiceCoverage,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::DoubleService => "double-service",
            ViolationKind::Overlap => "overlap",
            ViolationKind::SocBelowMin => "soc-below-min",
            ViolationKind::SocAboveMax => "soc-above-max",
            ViolationKind::FinalSoc => "final-soc",
            ViolationKind::ChargerCapacity => "charger-capacity",
            ViolationKind::PeakCap => "peak-cap",
            ViolationKind::SetupGap => "setup-gap",
            ViolationKind::IncompatibleType => "incompatible-type",
            ViolationKind::ServiceCoverage => "service-coverage",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A broken plan constraint. `slot` is the slot (or boundary, for SOC
/// kinds) where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub slot: usize,
    pub kind: ViolationKind,
    pub entities: Vec<String>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} at slot {}: {}",
            self.kind,
            self.slot,
            self.entities.join(", ")
        )
    }
}

/// Which constraint families are enforced, and with which SOC bounds.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Rules {
    pub coverage: bool,
    pub final_target: bool,
    pub floor: Option<Vec<f64>>,
    pub ceiling: Option<Vec<f64>>,
}

impl Rules {
    pub fn strict() -> Self {
        Self {
            coverage: true,
            final_target: true,
            floor: None,
            ceiling: None,
        }
    }

    pub fn without_coverage() -> Self {
        Self {
            coverage: false,
            ..Self::strict()
        }
    }

    pub fn soc_min(&self, inst: &Instance, bus: usize) -> f64 {
        self.floor
            .as_ref()
            .map_or(inst.scenario().buses[bus].soc_min, |f| f[bus])
    }

    pub fn soc_max(&self, inst: &Instance, bus: usize) -> f64 {
        self.ceiling
            .as_ref()
            .map_or(inst.scenario().buses[bus].soc_max, |c| c[bus])
    }
}

/// Per-bus, per-slot SOC drawn by assigned blocks at unit scale.
pub fn depletion(inst: &Instance, d: &Decisions) -> Vec<Vec<f64>> {
    let s = inst.scenario();
    let mut dep = vec![vec![0.0; s.grid.slot_count]; s.buses.len()];
    for &(i, j) in &d.assignments {
        let b = &s.blocks[j];
        let per_slot = inst.energy(i, j).unwrap_or(0.0) / b.len_slots() as f64;
        for t in b.start_slot..b.end_slot.min(s.grid.slot_count) {
            dep[i][t] += per_slot;
        }
    }
    dep
}

fn charging_at(d: &Decisions, bus: usize, t: usize) -> bool {
    d.charging
        .get(bus)
        .and_then(|row| row.get(t))
        .copied()
        .unwrap_or(false)
}

/// SOC at every boundary. With an anchor `(t0, soc)`, boundaries up to `t0`
/// hold the unanchored simulation and the trace restarts from `soc` at `t0`.
pub(crate) fn simulate_trace(
    inst: &Instance,
    d: &Decisions,
    scale: f64,
    anchor: Option<(usize, &[f64])>,
) -> Vec<Vec<f64>> {
    let s = inst.scenario();
    let n = s.grid.slot_count;
    let dep = depletion(inst, d);
    (0..s.buses.len())
        .map(|i| {
            let mut trace = Vec::with_capacity(n + 1);
            trace.push(s.buses[i].soc_initial);
            for t in 0..n {
                if let Some((t0, live)) = anchor {
                    if t == t0 {
                        *trace.last_mut().expect("non-empty") = live[i];
                    }
                }
                let mut soc = trace[t];
                if charging_at(d, i, t) {
                    soc = inst.charge_step(i, soc);
                }
                soc -= scale * dep[i][t];
                trace.push(soc);
            }
            if let Some((t0, live)) = anchor {
                if t0 == n {
                    trace[n] = live[i];
                }
            }
            trace
        })
        .collect()
}

/// Forward simulation of `decisions` with block demand scaled by
/// `consumption_scale`. Charging gains are evaluated from slot-start SOC.
pub fn simulate_plan(inst: &Instance, decisions: &Decisions, consumption_scale: f64) -> Plan {
    let soc_trace = simulate_trace(inst, decisions, consumption_scale, None);
    Plan {
        objective_miles: decisions.served_miles(inst.scenario()),
        decisions: decisions.clone(),
        soc_trace,
        certificate: Certificate::Heuristic,
    }
}

/// Every constraint the plan breaks; empty iff the plan is feasible.
pub fn validate_plan(inst: &Instance, plan: &Plan) -> Vec<Violation> {
    validate_with(inst, plan, 0, &Rules::strict())
}

/// Violations detected at or after slot `t0` (SOC boundaries strictly after
/// `t0` when `t0 > 0`).
pub(crate) fn validate_with(
    inst: &Instance,
    plan: &Plan,
    t0: usize,
    rules: &Rules,
) -> Vec<Violation> {
    let s = inst.scenario();
    let n = s.grid.slot_count;
    let setup = s.constraints.setup_slots;
    let d = &plan.decisions;
    let mut out = Vec::new();
    let mut push = |slot: usize, kind: ViolationKind, entities: Vec<String>| {
        if slot >= t0 {
            out.push(Violation {
                slot,
                kind,
                entities,
            });
        }
    };
    let bus_id = |i: usize| s.buses[i].id.clone();
    let block_id = |j: usize| s.blocks[j].id.clone();

    for (j, b) in s.blocks.iter().enumerate() {
        let servers: Vec<usize> = d
            .assignments
            .iter()
            .filter(|p| p.1 == j)
            .map(|p| p.0)
            .collect();
        if servers.len() > 1 {
            let mut ents = vec![block_id(j)];
            ents.extend(servers.iter().map(|&i| bus_id(i)));
            push(b.start_slot, ViolationKind::DoubleService, ents);
        }
    }

    let mut block_of: Vec<Vec<bool>> = vec![vec![false; n]; s.buses.len()];
    for i in 0..s.buses.len() {
        let mut mine: Vec<usize> = d.blocks_of(i).collect();
        mine.sort_by_key(|&j| (s.blocks[j].start_slot, s.blocks[j].id.clone()));
        for &j in &mine {
            let b = &s.blocks[j];
            if !inst.compatible(i, j) {
                push(
                    b.start_slot,
                    ViolationKind::IncompatibleType,
                    vec![bus_id(i), block_id(j)],
                );
            }
            for t in b.start_slot..b.end_slot.min(n) {
                block_of[i][t] = true;
                if charging_at(d, i, t) {
                    push(t, ViolationKind::Overlap, vec![bus_id(i), block_id(j)]);
                }
            }
            for t in b.start_slot.saturating_sub(setup)..b.start_slot {
                if charging_at(d, i, t) {
                    push(t, ViolationKind::SetupGap, vec![bus_id(i), block_id(j)]);
                }
            }
        }
        for (x, &a) in mine.iter().enumerate() {
            for &b in &mine[x + 1..] {
                let (ba, bb) = (&s.blocks[a], &s.blocks[b]);
                if ba.start_slot < bb.end_slot && bb.start_slot < ba.end_slot {
                    push(
                        bb.start_slot,
                        ViolationKind::Overlap,
                        vec![bus_id(i), block_id(a), block_id(b)],
                    );
                } else if bb.start_slot < ba.end_slot + setup && bb.start_slot >= ba.end_slot {
                    push(
                        bb.start_slot,
                        ViolationKind::SetupGap,
                        vec![bus_id(i), block_id(a), block_id(b)],
                    );
                }
            }
        }
    }

    let mut occupancy = vec![0usize; n];
    let mut charging = vec![0usize; n];
    for i in 0..s.buses.len() {
        let row: Vec<bool> = (0..n).map(|t| charging_at(d, i, t)).collect();
        for (t, &c) in row.iter().enumerate() {
            if c {
                charging[t] += 1;
                occupancy[t] += 1;
            }
        }
        for (c, _) in runs(&row) {
            let mut broken = false;
            for t in c.saturating_sub(setup)..c {
                occupancy[t] += 1;
                broken |= block_of[i][t] || row[t];
            }
            if broken {
                push(c, ViolationKind::SetupGap, vec![bus_id(i)]);
            }
        }
    }
    let chargers = s.chargers.len();
    let cap = s.constraints.max_concurrent_sessions_peak;
    for t in 0..n {
        if occupancy[t] > chargers {
            push(
                t,
                ViolationKind::ChargerCapacity,
                vec![format!("{} of {chargers}", occupancy[t])],
            );
        }
        if s.constraints.in_peak(t) && charging[t] > cap {
            push(
                t,
                ViolationKind::PeakCap,
                vec![format!("{} of {cap}", charging[t])],
            );
        }
    }

    let first_boundary = if t0 == 0 { 0 } else { t0 + 1 };
    for i in 0..s.buses.len() {
        let lo = rules.soc_min(inst, i);
        let hi = rules.soc_max(inst, i);
        let trace = plan.soc_trace.get(i);
        for k in first_boundary..=n {
            let soc = trace.and_then(|tr| tr.get(k)).copied().unwrap_or(f64::NAN);
            if !(soc >= lo - EPS) {
                push(
                    k,
                    ViolationKind::SocBelowMin,
                    vec![bus_id(i), format!("{soc:.6}")],
                );
            }
            if soc > hi + EPS {
                push(
                    k,
                    ViolationKind::SocAboveMax,
                    vec![bus_id(i), format!("{soc:.6}")],
                );
            }
        }
        if rules.final_target {
            let fin = trace.and_then(|tr| tr.get(n)).copied().unwrap_or(f64::NAN);
            if !(fin >= s.buses[i].soc_final_target - EPS) {
                push(
                    n,
                    ViolationKind::FinalSoc,
                    vec![bus_id(i), format!("{fin:.6}")],
                );
            }
        }
    }

    if rules.coverage {
        for &(slot, count) in &s.constraints.min_buses_in_service {
            let serving = (0..s.buses.len())
                .filter(|&i| d.blocks_of(i).any(|j| s.blocks[j].covers(slot)))
                .count();
            if serving < count {
                push(
                    slot,
                    ViolationKind::ServiceCoverage,
                    vec![format!("{serving} of {count}")],
                );
            }
        }
    }
    out.sort();
    out
}

/// Shortfall against the service requirements, which depend on
/// assignments only.
pub(crate) fn coverage_deficit(inst: &Instance, d: &Decisions) -> usize {
    let s = inst.scenario();
    s.constraints
        .min_buses_in_service
        .iter()
        .map(|&(slot, count)| {
            let serving = (0..s.buses.len())
                .filter(|&i| d.blocks_of(i).any(|j| s.blocks[j].covers(slot)))
                .count();
            count.saturating_sub(serving)
        })
        .sum()
}
