use std::collections::{BTreeSet, VecDeque};

use crate::model::{Decisions, Plan, Scenario};
use crate::solver::Instance;

use super::{DepotError, DepotEvent, DepotLayout, EventKind};

/// Minutes of slack when comparing required against available charge time.
const MINUTES_EPS: f64 = 1e-6;
const SOC_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaitlistOp {
    Join,
    Promote,
    /// Left without a charger: departed, or the plan dropped its session.
    Leave,
}

/// Who is where, who waits for a charger, and what happened so far.
///
/// Invariants between calls: a spot holds at most one bus, a bus holds at
/// most one spot, every present bus holds a spot, and waitlisted buses sit on
/// parking-only spots.
#[derive(Debug, Clone)]
pub struct DepotState {
    layout: DepotLayout,
    bus_ids: Vec<String>,
    setup: usize,
    clock: Option<usize>,
    occupant: Vec<Option<usize>>,
    location: Vec<Option<usize>>,
    waitlist: VecDeque<usize>,
    history: Vec<(usize, WaitlistOp, usize)>,
    ready_at: Vec<usize>,
    charging: Vec<bool>,
    triggered: BTreeSet<(usize, usize)>,
    events: Vec<DepotEvent>,
}

fn charges(d: &Decisions, bus: usize, t: usize) -> bool {
    d.charging
        .get(bus)
        .and_then(|r| r.get(t))
        .copied()
        .unwrap_or(false)
}

impl DepotState {
    pub fn new(layout: DepotLayout, s: &Scenario) -> Result<Self, DepotError> {
        let defects = layout.check(s);
        if !defects.is_empty() {
            let text: Vec<String> = defects.iter().map(|d| d.to_string()).collect();
            return Err(DepotError::Layout(text.join("; ")));
        }
        let nb = s.buses.len();
        Ok(Self {
            occupant: vec![None; layout.spots.len()],
            layout,
            bus_ids: s.buses.iter().map(|b| b.id.clone()).collect(),
            setup: s.constraints.setup_slots,
            clock: None,
            location: vec![None; nb],
            waitlist: VecDeque::new(),
            history: Vec::new(),
            ready_at: vec![0; nb],
            charging: vec![false; nb],
            triggered: BTreeSet::new(),
            events: Vec::new(),
        })
    }

    pub fn layout(&self) -> &DepotLayout {
        &self.layout
    }

    pub fn clock(&self) -> Option<usize> {
        self.clock
    }

    pub fn events(&self) -> &[DepotEvent] {
        &self.events
    }

    /// Bus index per spot.
    pub fn occupancy(&self) -> &[Option<usize>] {
        &self.occupant
    }

    /// Spot index of `bus`, or `None` while it is out on a block.
    pub fn location(&self, bus: usize) -> Option<usize> {
        self.location[bus]
    }

    pub fn waitlist(&self) -> Vec<usize> {
        self.waitlist.iter().copied().collect()
    }

    /// Every join and promotion as `(slot, op, bus)`, in order.
    pub fn waitlist_history(&self) -> &[(usize, WaitlistOp, usize)] {
        &self.history
    }

    pub fn on_charger(&self, bus: usize) -> bool {
        self.location[bus].is_some_and(|p| self.layout.spots[p].is_charger())
    }

    /// Forget which pull-out targets already raised a trigger; call after
    /// the plan changes.
    pub fn plan_changed(&mut self) {
        self.triggered.clear();
    }

    fn emit(&mut self, slot: usize, kind: EventKind, bus: usize, spot: Option<usize>) {
        self.events.push(DepotEvent {
            slot,
            kind,
            bus: self.bus_ids[bus].clone(),
            spot: spot.map(|p| self.layout.spots[p].id.clone()),
        });
    }

    /// Charging scheduled at one of `t..=t + setup`: the bus needs a charger now.
    fn due(&self, d: &Decisions, bus: usize, t: usize) -> bool {
        (t..=t + self.setup).any(|s| charges(d, bus, s))
    }

    fn free_spot(&self, charger: bool) -> Option<usize> {
        (0..self.occupant.len())
            .find(|&p| self.occupant[p].is_none() && self.layout.spots[p].is_charger() == charger)
    }

    fn place(&mut self, bus: usize, spot: usize) {
        if let Some(old) = self.location[bus] {
            self.occupant[old] = None;
        }
        self.occupant[spot] = Some(bus);
        self.location[bus] = Some(spot);
    }

    fn move_to_charger(&mut self, bus: usize, spot: usize, slot: usize) {
        self.place(bus, spot);
        self.ready_at[bus] = slot + self.setup;
    }

    /// A bus returns from a block. It takes a charger directly when charging
    /// is due, a charger is free and nobody is waiting; otherwise it parks and
    /// queues if charging is due.
    pub fn on_arrival(&mut self, bus: usize, slot: usize, d: &Decisions) -> Result<(), DepotError> {
        if self.location[bus].is_some() {
            return Err(DepotError::AlreadyPresent {
                bus: self.bus_ids[bus].clone(),
            });
        }
        self.emit(slot, EventKind::Arrival, bus, None);
        let due = self.due(d, bus, slot);
        if due && self.waitlist.is_empty() {
            if let Some(c) = self.free_spot(true) {
                self.move_to_charger(bus, c, slot);
                self.emit(slot, EventKind::SpotAssigned, bus, Some(c));
                return Ok(());
            }
        }
        let p = self.free_spot(false).ok_or_else(|| DepotError::Full {
            bus: self.bus_ids[bus].clone(),
            slot,
        })?;
        self.place(bus, p);
        self.emit(slot, EventKind::SpotAssigned, bus, Some(p));
        if due {
            self.join(bus, slot);
        }
        Ok(())
    }

    fn join(&mut self, bus: usize, slot: usize) {
        self.waitlist.push_back(bus);
        self.history.push((slot, WaitlistOp::Join, bus));
    }

    /// A bus releases its charger. The waitlist head swaps in when there is
    /// one; otherwise the bus moves to a free parking-only spot, or stays put
    /// if the depot has none.
    pub fn on_charge_complete(&mut self, bus: usize, slot: usize) {
        let Some(c) = self.location[bus].filter(|&p| self.layout.spots[p].is_charger()) else {
            return;
        };
        if let Some(head) = self.waitlist.pop_front() {
            self.history.push((slot, WaitlistOp::Promote, head));
            let p = self.location[head].expect("waitlisted buses are parked");
            self.occupant[c] = None;
            self.occupant[p] = None;
            self.location[bus] = None;
            self.move_to_charger(head, c, slot);
            self.place(bus, p);
            self.emit(slot, EventKind::Interchange, head, Some(c));
            self.emit(slot, EventKind::SpotAssigned, bus, Some(p));
        } else if let Some(p) = self.free_spot(false) {
            self.place(bus, p);
            self.emit(slot, EventKind::SpotAssigned, bus, Some(p));
        }
    }

    fn depart(&mut self, bus: usize, slot: usize) {
        let spot = self.location[bus];
        if let Some(p) = spot {
            self.occupant[p] = None;
        }
        self.location[bus] = None;
        self.leave(bus, slot);
        self.emit(slot, EventKind::Departure, bus, spot);
    }

    fn leave(&mut self, bus: usize, slot: usize) {
        if let Some(k) = self.waitlist.iter().position(|&b| b == bus) {
            self.waitlist.remove(k);
            self.history.push((slot, WaitlistOp::Leave, bus));
        }
    }

    fn promote(&mut self, slot: usize, d: &Decisions) {
        for i in 0..self.bus_ids.len() {
            if self.location[i].is_some()
                && !self.on_charger(i)
                && !self.waitlist.contains(&i)
                && self.due(d, i, slot)
            {
                self.join(i, slot);
            }
        }
        while let Some(&head) = self.waitlist.front() {
            let Some(c) = self.free_spot(true) else { break };
            self.waitlist.pop_front();
            self.history.push((slot, WaitlistOp::Promote, head));
            self.move_to_charger(head, c, slot);
            self.emit(slot, EventKind::Interchange, head, Some(c));
        }
    }

    fn process(&mut self, slot: usize, d: &Decisions, s: &Scenario) -> Result<(), DepotError> {
        // A new plan may have dropped a waiting bus's session.
        let stale: Vec<usize> = self
            .waitlist
            .iter()
            .copied()
            .filter(|&i| !self.due(d, i, slot))
            .collect();
        for i in stale {
            self.leave(i, slot);
        }
        for i in 0..self.bus_ids.len() {
            if self.on_charger(i) && !self.due(d, i, slot) {
                self.on_charge_complete(i, slot);
            }
        }
        let starts: Vec<usize> = d
            .assignments
            .iter()
            .filter(|&&(_, j)| s.blocks[j].start_slot == slot)
            .map(|&(i, _)| i)
            .collect();
        for &i in &starts {
            if self.location[i].is_some() {
                self.depart(i, slot);
            }
        }
        let ends: BTreeSet<usize> = d
            .assignments
            .iter()
            .filter(|&&(_, j)| s.blocks[j].end_slot == slot)
            .map(|&(i, _)| i)
            .collect();
        for &i in &ends {
            if self.location[i].is_none() {
                self.on_arrival(i, slot, d)?;
                if starts.contains(&i) {
                    self.depart(i, slot);
                }
            }
        }
        self.promote(slot, d);
        Ok(())
    }

    /// Slot 0: every bus not out on a block arrives.
    pub fn open(&mut self, d: &Decisions, s: &Scenario) -> Result<(), DepotError> {
        if let Some(c) = self.clock {
            return Err(DepotError::OutOfOrder {
                expected: c + 1,
                got: 0,
            });
        }
        self.clock = Some(0);
        let out: BTreeSet<usize> = d
            .assignments
            .iter()
            .filter(|&&(_, j)| s.blocks[j].start_slot == 0)
            .map(|&(i, _)| i)
            .collect();
        for i in 0..self.bus_ids.len() {
            if !out.contains(&i) {
                self.on_arrival(i, 0, d)?;
            }
        }
        self.promote(0, d);
        // Setup before the horizon is taken as done: slot 0 may charge.
        self.ready_at.iter_mut().for_each(|r| *r = 0);
        Ok(())
    }

    /// Advances to `slot`, which must follow the clock.
    pub fn step(&mut self, slot: usize, d: &Decisions, s: &Scenario) -> Result<(), DepotError> {
        let expected = self.clock.map_or(0, |c| c + 1);
        if slot != expected || self.clock.is_none() {
            return Err(DepotError::OutOfOrder {
                expected,
                got: slot,
            });
        }
        self.clock = Some(slot);
        self.process(slot, d, s)
    }

    /// Which buses actually charge during `slot`: those the plan charges that
    /// sit on a charger whose setup has elapsed. Emits session starts and ends.
    pub fn realize(&mut self, slot: usize, d: &Decisions) -> Vec<bool> {
        let flags: Vec<bool> = (0..self.bus_ids.len())
            .map(|i| charges(d, i, slot) && self.on_charger(i) && self.ready_at[i] <= slot)
            .collect();
        for (i, &now) in flags.iter().enumerate() {
            if now && !self.charging[i] {
                self.emit(slot, EventKind::ChargeStart, i, self.location[i]);
            } else if !now && self.charging[i] {
                self.emit(slot, EventKind::ChargeComplete, i, self.location[i]);
            }
        }
        self.charging = flags.clone();
        flags
    }

    /// Closes sessions still running at the horizon `n`.
    pub fn finish(&mut self, n: usize) {
        for i in 0..self.bus_ids.len() {
            if self.charging[i] {
                self.emit(n, EventKind::ChargeComplete, i, self.location[i]);
                self.charging[i] = false;
            }
        }
    }

    /// Whether `bus` at `soc` can still reach the plan's SOC at its next
    /// pull-out using the plan's remaining charging slots. Emits one
    /// replan-trigger per (bus, block) until [`Self::plan_changed`]; returns
    /// true iff a trigger fired now.
    pub fn check_pullout_feasibility(
        &mut self,
        inst: &Instance,
        plan: &Plan,
        bus: usize,
        slot: usize,
        soc: f64,
    ) -> bool {
        if self.location[bus].is_none() {
            return false;
        }
        let s = inst.scenario();
        let Some(next) = plan
            .decisions
            .blocks_of(bus)
            .filter(|&j| s.blocks[j].start_slot >= slot)
            .min_by_key(|&j| s.blocks[j].start_slot)
        else {
            return false;
        };
        let pullout = s.blocks[next].start_slot;
        let target = plan.soc_trace[bus][pullout];
        if soc >= target - SOC_EPS {
            return false;
        }
        let from = if self.on_charger(bus) {
            slot.max(self.ready_at[bus])
        } else {
            slot + self.setup
        };
        let slots = (from..pullout)
            .filter(|&t| charges(&plan.decisions, bus, t))
            .count();
        let available = slots as f64 * s.grid.slot_minutes as f64;
        let reachable = inst
            .charging_curve(inst.bus_type_of(bus))
            .time_to_charge(inst.capacity(bus), soc, target)
            .is_ok_and(|needed| needed <= available + MINUTES_EPS);
        if reachable || !self.triggered.insert((bus, next)) {
            return false;
        }
        self.emit(slot, EventKind::ReplanTrigger, bus, self.location[bus]);
        true
    }
}
