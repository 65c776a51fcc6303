//! Charging schedules for fixed assignments: a latest-feasible greedy and an
//! exhaustive depth-first fallback.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use crate::model::{Certificate, Decisions, Plan};

use super::validate::{simulate_trace, validate_with, Rules, EPS};
use super::Instance;

/// Where a search starts: boundary `t0` with the given SOC, charging before
/// `t0` frozen to `prefix`.
#[derive(Debug, Clone)]
pub(crate) struct Frame {
    pub t0: usize,
    pub start: Vec<f64>,
    pub prefix: Vec<Vec<bool>>,
    pub rules: Rules,
}

impl Frame {
    pub fn initial(inst: &Instance) -> Self {
        let s = inst.scenario();
        Self {
            t0: 0,
            start: s.buses.iter().map(|b| b.soc_initial).collect(),
            prefix: vec![vec![false; s.grid.slot_count]; s.buses.len()],
            rules: Rules::without_coverage(),
        }
    }

    fn anchor(&self) -> Option<(usize, &[f64])> {
        (self.t0 > 0).then_some((self.t0, self.start.as_slice()))
    }

    pub fn plan(&self, inst: &Instance, d: Decisions) -> Plan {
        let soc_trace = simulate_trace(inst, &d, 1.0, self.anchor());
        Plan {
            objective_miles: d.served_miles(inst.scenario()),
            decisions: d,
            soc_trace,
            certificate: Certificate::Heuristic,
        }
    }

    /// Validates everything except service coverage from `t0` on.
    pub fn accepts(&self, inst: &Instance, d: &Decisions) -> bool {
        validate_with(inst, &self.plan(inst, d.clone()), self.t0, &self.rules).is_empty()
    }

    fn chargeable(&self, inst: &Instance, t: usize) -> bool {
        let c = &inst.scenario().constraints;
        t >= self.t0
            && !inst.scenario().chargers.is_empty()
            && !(c.in_peak(t) && c.max_concurrent_sessions_peak == 0)
    }
}

/// Per-bus slot layout implied by the assignments.
pub(crate) struct Layout {
    /// In a block, or in the setup slots before one.
    pub blocked: Vec<Vec<bool>>,
    pub in_block: Vec<Vec<bool>>,
    pub dep: Vec<Vec<f64>>,
    /// Assigned blocks per bus, by start slot.
    pub blocks: Vec<Vec<usize>>,
}

impl Layout {
    pub fn new(inst: &Instance, assignments: &BTreeSet<(usize, usize)>) -> Self {
        let s = inst.scenario();
        let n = s.grid.slot_count;
        let setup = s.constraints.setup_slots;
        let buses = s.buses.len();
        let mut out = Self {
            blocked: vec![vec![false; n]; buses],
            in_block: vec![vec![false; n]; buses],
            dep: vec![vec![0.0; n]; buses],
            blocks: vec![Vec::new(); buses],
        };
        for &(i, j) in assignments {
            let b = &s.blocks[j];
            let e = inst.energy(i, j).unwrap_or(0.0) / b.len_slots() as f64;
            for t in b.start_slot.saturating_sub(setup)..b.end_slot.min(n) {
                out.blocked[i][t] = true;
            }
            for t in b.start_slot..b.end_slot.min(n) {
                out.in_block[i][t] = true;
                out.dep[i][t] += e;
            }
            out.blocks[i].push(j);
        }
        for list in &mut out.blocks {
            list.sort_by_key(|&j| (s.blocks[j].start_slot, s.blocks[j].id.clone()));
        }
        out
    }
}

/// Optimistic single-bus check: charge at every slot the bus is free,
/// ignoring setup and other buses, capping at the SOC ceiling.
pub(crate) fn relaxation_holds(
    inst: &Instance,
    frame: &Frame,
    bus: usize,
    from: usize,
    soc: f64,
    blocked: &[bool],
    dep: &[f64],
) -> bool {
    let n = inst.slot_count();
    let lo = frame.rules.soc_min(inst, bus);
    let hi = frame.rules.soc_max(inst, bus);
    let mut soc = soc;
    for t in from..n {
        if !blocked[t] && frame.chargeable(inst, t) {
            soc = inst.charge_step(bus, soc).min(hi.max(soc));
        }
        soc -= dep[t];
        if soc < lo - EPS {
            return false;
        }
    }
    !frame.rules.final_target || soc >= inst.scenario().buses[bus].soc_final_target - EPS
}

/// Fleet-wide energy check: for every slot `u`, the kWh the buses must gain
/// by the end of `u` cannot exceed what the session caps could deliver at
/// peak power over `[t0, u]`.
pub(crate) fn fleet_relaxation(inst: &Instance, frame: &Frame, layout: &Layout) -> bool {
    let s = inst.scenario();
    let n = inst.slot_count();
    let c = &s.constraints;
    let hours = s.grid.slot_minutes as f64 / 60.0;
    let gain: Vec<f64> = (0..s.buses.len())
        .map(|i| {
            let curve = inst.charging_curve(inst.bus_type_of(i));
            curve.peak_power() * curve.charge_efficiency * hours
        })
        .collect();
    let mut level: Vec<f64> = frame.start.clone();
    let mut need = vec![0.0f64; s.buses.len()];
    let mut supply = 0.0;
    for u in frame.t0..n {
        if frame.chargeable(inst, u) {
            let cap = if c.in_peak(u) {
                s.chargers.len().min(c.max_concurrent_sessions_peak)
            } else {
                s.chargers.len()
            };
            let mut free: Vec<f64> = (0..s.buses.len())
                .filter(|&i| !layout.blocked[i][u])
                .map(|i| gain[i])
                .collect();
            free.sort_by(|a, b| b.total_cmp(a));
            supply += free.iter().take(cap).fold(0.0, |a, b| a + b);
        }
        let mut required = 0.0;
        for i in 0..s.buses.len() {
            level[i] -= layout.dep[i][u];
            let mut floor = frame.rules.soc_min(inst, i);
            if u + 1 == n && frame.rules.final_target {
                floor = floor.max(s.buses[i].soc_final_target);
            }
            need[i] = need[i].max(floor - level[i]);
            required += need[i].max(0.0) * inst.capacity(i);
        }
        if required > supply + EPS * (1.0 + supply) {
            return false;
        }
    }
    true
}

/// Relaxation for one bus serving `blocks` (indices into the scenario).
pub(crate) fn bus_relaxation(inst: &Instance, frame: &Frame, bus: usize, blocks: &[usize]) -> bool {
    let set: BTreeSet<(usize, usize)> = blocks.iter().map(|&j| (bus, j)).collect();
    let l = Layout::new(inst, &set);
    relaxation_holds(
        inst,
        frame,
        bus,
        frame.t0,
        frame.start[bus],
        &l.blocked[bus],
        &l.dep[bus],
    )
}

/// Latest-feasible charging for fixed assignments, or `None`.
///
/// Each bus gets one SOC requirement per upcoming block and one for the end
/// of the horizon. Requirements are met in order of deadline (then bus id),
/// each with the fewest slots that reach it, placed as late as the charger
/// pool, the peak cap and setup allow.
pub fn complete_charging(
    inst: &Instance,
    assignments: &BTreeSet<(usize, usize)>,
) -> Option<Vec<Vec<bool>>> {
    greedy(inst, &Frame::initial(inst), assignments)
}

struct Requirement {
    bus: usize,
    lo: usize,
    deadline: usize,
    target: f64,
}

struct Pool<'a> {
    inst: &'a Instance,
    frame: &'a Frame,
    layout: &'a Layout,
    charging: Vec<Vec<bool>>,
    occupancy: Vec<usize>,
    active: Vec<usize>,
}

impl Pool<'_> {
    fn slot_ok(&self, bus: usize, t: usize) -> bool {
        let c = &self.inst.scenario().constraints;
        self.frame.chargeable(self.inst, t)
            && !self.layout.blocked[bus][t]
            && !self.charging[bus][t]
            && self.occupancy[t] < self.inst.scenario().chargers.len()
            && !(c.in_peak(t) && self.active[t] >= c.max_concurrent_sessions_peak)
    }

    fn continues(&self, bus: usize, c: usize) -> bool {
        c > 0 && c == self.frame.t0 && self.charging[bus][c - 1]
    }

    fn setup_ok(&self, bus: usize, c: usize) -> bool {
        if self.continues(bus, c) {
            return true;
        }
        let setup = self.inst.scenario().constraints.setup_slots;
        let chargers = self.inst.scenario().chargers.len();
        (c.saturating_sub(setup)..c).all(|t| {
            !self.layout.in_block[bus][t]
                && !self.charging[bus][t]
                && (t < self.frame.t0 || self.occupancy[t] < chargers)
        })
    }

    fn place(&mut self, bus: usize, c: usize, e: usize) {
        let setup = self.inst.scenario().constraints.setup_slots;
        if !self.continues(bus, c) {
            for t in c.saturating_sub(setup).max(self.frame.t0)..c {
                self.occupancy[t] += 1;
            }
        }
        for t in c..e {
            self.charging[bus][t] = true;
            self.occupancy[t] += 1;
            self.active[t] += 1;
        }
    }

    /// Places `n` charging slots in `[lo, hi)`, latest runs first.
    fn place_latest(&mut self, bus: usize, lo: usize, mut hi: usize, n: usize) -> bool {
        let setup = self.inst.scenario().constraints.setup_slots;
        let mut remaining = n;
        while remaining > 0 {
            let mut e = hi;
            let mut placed = false;
            while e > lo {
                if !self.slot_ok(bus, e - 1) {
                    e -= 1;
                    continue;
                }
                let mut c = e - 1;
                while c > lo && e - c < remaining && self.slot_ok(bus, c - 1) {
                    c -= 1;
                }
                if let Some(start) = (c..e).find(|&x| self.setup_ok(bus, x)) {
                    self.place(bus, start, e);
                    remaining -= e - start;
                    hi = start.saturating_sub(setup);
                    placed = true;
                    break;
                }
                e -= 1;
            }
            if !placed {
                return false;
            }
        }
        true
    }

    fn soc_at(&self, bus: usize, boundary: usize) -> f64 {
        let mut soc = self.frame.start[bus];
        for t in self.frame.t0..boundary {
            if self.charging[bus][t] {
                soc = self.inst.charge_step(bus, soc);
            }
            soc -= self.layout.dep[bus][t];
        }
        soc
    }
}

fn requirements(inst: &Instance, frame: &Frame, layout: &Layout) -> Option<Vec<Requirement>> {
    let s = inst.scenario();
    let n = s.grid.slot_count;
    let setup = s.constraints.setup_slots;
    let minutes = s.grid.slot_minutes as f64;
    let mut out = Vec::new();
    for &i in inst.bus_order() {
        let curve = inst.charging_curve(inst.bus_type_of(i));
        let cap = inst.capacity(i);
        let floor = frame.rules.soc_min(inst, i);
        let ceiling = frame.rules.soc_max(inst, i);
        // Windows in time order: (lo, deadline, demand of the block that follows).
        let mut windows = Vec::new();
        let mut prev_end = 0;
        for &j in &layout.blocks[i] {
            let b = &s.blocks[j];
            if b.start_slot >= frame.t0 {
                let lo = prev_end.max(frame.t0);
                windows.push((
                    lo,
                    b.start_slot.saturating_sub(setup).max(lo),
                    Some(inst.energy(i, j).unwrap_or(0.0)),
                ));
            }
            prev_end = prev_end.max(b.end_slot);
        }
        let lo = prev_end.max(frame.t0);
        windows.push((lo, n.max(lo), None));

        let mut target_after = if frame.rules.final_target {
            s.buses[i].soc_final_target
        } else {
            f64::NEG_INFINITY
        };
        let mut targets = vec![0.0; windows.len()];
        for (k, &(lo, deadline, demand)) in windows.iter().enumerate().rev() {
            let target = match demand {
                None => target_after,
                Some(e) => (floor + e).max(target_after + e),
            };
            if target > ceiling + EPS {
                return None;
            }
            targets[k] = target;
            let free = if lo > 0 {
                deadline.saturating_sub(lo + setup)
            } else {
                deadline - lo
            };
            target_after = if target.is_finite() {
                curve.soc_before(cap, target, free as f64 * minutes)
            } else {
                target
            };
        }
        for (k, &(lo, deadline, _)) in windows.iter().enumerate() {
            out.push(Requirement {
                bus: i,
                lo,
                deadline,
                target: targets[k],
            });
        }
    }
    let rank: Vec<usize> = {
        let mut r = vec![0; inst.bus_count()];
        for (pos, &i) in inst.bus_order().iter().enumerate() {
            r[i] = pos;
        }
        r
    };
    out.sort_by_key(|r| (r.deadline, rank[r.bus]));
    Some(out)
}

pub(crate) fn greedy(
    inst: &Instance,
    frame: &Frame,
    assignments: &BTreeSet<(usize, usize)>,
) -> Option<Vec<Vec<bool>>> {
    let s = inst.scenario();
    let n = s.grid.slot_count;
    let layout = Layout::new(inst, assignments);
    let reqs = requirements(inst, frame, &layout)?;
    let mut charging = vec![vec![false; n]; s.buses.len()];
    for (row, prefix) in charging.iter_mut().zip(&frame.prefix) {
        row[..frame.t0].copy_from_slice(&prefix[..frame.t0]);
    }
    let mut pool = Pool {
        inst,
        frame,
        layout: &layout,
        charging,
        occupancy: vec![0; n],
        active: vec![0; n],
    };
    for r in &reqs {
        let mut soc = pool.soc_at(r.bus, r.lo);
        let mut slots = 0;
        while soc < r.target - EPS / 2.0 {
            soc = inst.charge_step(r.bus, soc);
            slots += 1;
            if slots > r.deadline.saturating_sub(r.lo) {
                return None;
            }
        }
        if slots > 0 && !pool.place_latest(r.bus, r.lo, r.deadline, slots) {
            return None;
        }
    }
    let d = Decisions {
        assignments: assignments.clone(),
        charging: pool.charging,
    };
    frame.accepts(inst, &d).then_some(d.charging)
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Exact {
    Found(Vec<Vec<bool>>),
    Infeasible,
    Exhausted,
}

struct Dfs<'a> {
    inst: &'a Instance,
    frame: &'a Frame,
    layout: Layout,
    charging: Vec<Vec<bool>>,
    occupancy: Vec<usize>,
    active: Vec<usize>,
    soc: Vec<f64>,
    /// Failed SOC vectors per (slot, setup tail). Any state at or below a
    /// stored vector fails too, since charging is optional, monotone in SOC
    /// and never exceeds a ceiling of 1. With a lower ceiling the key keeps
    /// the exact SOC and only equal states match.
    failed: HashMap<Vec<u64>, Vec<Vec<f64>>>,
    dominance: bool,
    nodes: u64,
    budget: u64,
    deadline: Option<Instant>,
    exhausted: bool,
}

impl Dfs<'_> {
    fn key(&self, t: usize) -> Vec<u64> {
        let setup = self.inst.scenario().constraints.setup_slots;
        let mut k = vec![t as u64];
        if !self.dominance {
            k.extend(self.soc.iter().map(|x| x.to_bits()));
        }
        for u in t.saturating_sub(setup)..t {
            k.push(self.occupancy[u] as u64);
            for row in &self.charging {
                k.push(row[u] as u64);
            }
        }
        k
    }

    fn can_charge(&self, bus: usize, t: usize) -> bool {
        let s = self.inst.scenario();
        let c = &s.constraints;
        if !self.frame.chargeable(self.inst, t)
            || self.layout.blocked[bus][t]
            || self.occupancy[t] >= s.chargers.len()
            || (c.in_peak(t) && self.active[t] >= c.max_concurrent_sessions_peak)
        {
            return false;
        }
        if t > 0 && self.charging[bus][t - 1] {
            return true;
        }
        (t.saturating_sub(c.setup_slots)..t).all(|u| {
            !self.layout.in_block[bus][u]
                && !self.charging[bus][u]
                && (u < self.frame.t0 || self.occupancy[u] < s.chargers.len())
        })
    }

    fn set(&mut self, bus: usize, t: usize, on: bool) {
        let setup = self.inst.scenario().constraints.setup_slots;
        let starts = !(t > 0 && self.charging[bus][t - 1]);
        let delta = |x: &mut usize| if on { *x += 1 } else { *x -= 1 };
        if starts {
            for u in t.saturating_sub(setup).max(self.frame.t0)..t {
                delta(&mut self.occupancy[u]);
            }
        }
        delta(&mut self.occupancy[t]);
        delta(&mut self.active[t]);
        self.charging[bus][t] = on;
    }

    fn slot(&mut self, t: usize) -> bool {
        let n = self.inst.slot_count();
        if t == n {
            return true;
        }
        let key = self.key(t);
        let below = |f: &Vec<f64>| f.iter().zip(&self.soc).all(|(a, b)| b <= a);
        if self
            .failed
            .get(&key)
            .is_some_and(|list| list.iter().any(below))
        {
            return false;
        }
        let soc = self.soc.clone();
        let ok = self.choose(t, 0);
        if !ok && !self.exhausted {
            let list = self.failed.entry(key).or_default();
            list.retain(|f| !f.iter().zip(&soc).all(|(a, b)| a <= b));
            list.push(soc);
        }
        ok
    }

    fn choose(&mut self, t: usize, pos: usize) -> bool {
        self.nodes += 1;
        if self.nodes > self.budget
            || (self.nodes.is_multiple_of(1024)
                && self.deadline.is_some_and(|d| Instant::now() >= d))
        {
            self.exhausted = true;
            return false;
        }
        let order = self.inst.bus_order();
        if pos == order.len() {
            return self.advance(t);
        }
        let bus = order[pos];
        if self.choose(t, pos + 1) {
            return true;
        }
        if self.exhausted || !self.can_charge(bus, t) {
            return false;
        }
        self.set(bus, t, true);
        if self.choose(t, pos + 1) {
            return true;
        }
        self.set(bus, t, false);
        false
    }

    fn advance(&mut self, t: usize) -> bool {
        let saved = self.soc.clone();
        let mut ok = true;
        for i in 0..self.soc.len() {
            let mut x = self.soc[i];
            if self.charging[i][t] {
                x = self.inst.charge_step(i, x);
            }
            x -= self.layout.dep[i][t];
            self.soc[i] = x;
            if x < self.frame.rules.soc_min(self.inst, i) - EPS
                || x > self.frame.rules.soc_max(self.inst, i) + EPS
                || !relaxation_holds(
                    self.inst,
                    self.frame,
                    i,
                    t + 1,
                    x,
                    &self.layout.blocked[i],
                    &self.layout.dep[i],
                )
            {
                ok = false;
                break;
            }
        }
        if ok && self.slot(t + 1) {
            return true;
        }
        self.soc = saved;
        false
    }
}

/// Exhaustive search for any charging schedule that validates.
pub(crate) fn exact_charging(
    inst: &Instance,
    frame: &Frame,
    assignments: &BTreeSet<(usize, usize)>,
    budget: u64,
    deadline: Option<Instant>,
) -> Exact {
    let s = inst.scenario();
    let n = s.grid.slot_count;
    let layout = Layout::new(inst, assignments);
    for i in 0..s.buses.len() {
        if !relaxation_holds(
            inst,
            frame,
            i,
            frame.t0,
            frame.start[i],
            &layout.blocked[i],
            &layout.dep[i],
        ) {
            return Exact::Infeasible;
        }
    }
    if !fleet_relaxation(inst, frame, &layout) {
        return Exact::Infeasible;
    }
    let mut charging = vec![vec![false; n]; s.buses.len()];
    for (row, prefix) in charging.iter_mut().zip(&frame.prefix) {
        row[..frame.t0].copy_from_slice(&prefix[..frame.t0]);
    }
    let mut dfs = Dfs {
        inst,
        frame,
        layout,
        charging,
        occupancy: vec![0; n],
        active: vec![0; n],
        soc: frame.start.clone(),
        failed: HashMap::new(),
        dominance: (0..s.buses.len()).all(|i| frame.rules.soc_max(inst, i) >= 1.0),
        nodes: 0,
        budget,
        deadline,
        exhausted: false,
    };
    if dfs.slot(frame.t0) {
        let d = Decisions {
            assignments: assignments.clone(),
            charging: dfs.charging,
        };
        if frame.accepts(inst, &d) {
            return Exact::Found(d.charging);
        }
        // The incremental checks mirror the validator; disagreement means
        // the schedule is unusable, not that none exists.
        return Exact::Exhausted;
    }
    if dfs.exhausted {
        Exact::Exhausted
    } else {
        Exact::Infeasible
    }
}

/// Greedy first, exhaustive search when the greedy fails.
pub(crate) fn schedule(
    inst: &Instance,
    frame: &Frame,
    assignments: &BTreeSet<(usize, usize)>,
    budget: u64,
    deadline: Option<Instant>,
) -> Exact {
    match greedy(inst, frame, assignments) {
        Some(c) => Exact::Found(c),
        None => exact_charging(inst, frame, assignments, budget, deadline),
    }
}
