//! Depot replay with per-slot snapshots and the protocol invariants.

use std::collections::VecDeque;

use bebfleet::depot::{DepotLayout, DepotState, EventKind, WaitlistOp};
use bebfleet::harness::{replay_with, ReplayConfig, ReplayOutcome};
use bebfleet::model::Plan;
use bebfleet::solver::Instance;

pub struct Snapshot {
    pub location: Vec<Option<usize>>,
    pub occupancy: Vec<Option<usize>>,
    pub waitlist: Vec<usize>,
    pub charger_spot: Vec<bool>,
}

pub fn snapshot(st: &DepotState, buses: usize) -> Snapshot {
    Snapshot {
        location: (0..buses).map(|i| st.location(i)).collect(),
        occupancy: st.occupancy().to_vec(),
        waitlist: st.waitlist(),
        charger_spot: st.layout().spots.iter().map(|p| p.is_charger()).collect(),
    }
}

pub fn run(
    inst: &Instance,
    plan: &Plan,
    cfg: &ReplayConfig,
) -> (
    ReplayOutcome,
    Vec<Snapshot>,
    Vec<(usize, WaitlistOp, usize)>,
) {
    let s = inst.scenario();
    let layout = DepotLayout::default_for(s);
    let mut snaps = Vec::new();
    let mut history = Vec::new();
    let out = replay_with(inst, plan, &layout, cfg, |_, st| {
        snaps.push(snapshot(st, s.buses.len()));
        history = st.waitlist_history().to_vec();
    })
    .expect("default layout never fills");
    (out, snaps, history)
}

pub fn check_invariants(
    inst: &Instance,
    out: &ReplayOutcome,
    snaps: &[Snapshot],
    history: &[(usize, WaitlistOp, usize)],
    case: usize,
) {
    let s = inst.scenario();
    let executed = &out.realized.decisions;
    for (t, snap) in snaps.iter().enumerate() {
        // Conservation: a bus is either on a spot or out on a block.
        for i in 0..s.buses.len() {
            let out_on_block = executed.blocks_of(i).any(|j| s.blocks[j].covers(t));
            assert_eq!(
                snap.location[i].is_none(),
                out_on_block,
                "case {case} slot {t} bus {i}"
            );
        }
        // Mutual exclusion: occupancy and location are inverse maps.
        for (p, occ) in snap.occupancy.iter().enumerate() {
            if let Some(b) = occ {
                assert_eq!(snap.location[*b], Some(p), "case {case} slot {t}");
            }
        }
        for (i, loc) in snap.location.iter().enumerate() {
            if let Some(p) = loc {
                assert_eq!(snap.occupancy[*p], Some(i), "case {case} slot {t}");
            }
        }
        for &w in &snap.waitlist {
            let p = snap.location[w].expect("waitlisted buses are present");
            assert!(
                !snap.charger_spot[p],
                "case {case} slot {t}: waitlisted bus on a charger"
            );
        }
    }
    // FIFO: every promotion takes the earliest remaining join.
    let mut queue = VecDeque::new();
    for &(slot, op, bus) in history {
        match op {
            WaitlistOp::Join => queue.push_back(bus),
            WaitlistOp::Leave => queue.retain(|&b| b != bus),
            WaitlistOp::Promote => {
                assert_eq!(queue.pop_front(), Some(bus), "case {case} slot {slot}")
            }
        }
    }
}

pub fn charge_starts(out: &ReplayOutcome, bus: &str) -> Vec<usize> {
    out.events
        .iter()
        .filter(|e| e.bus == bus && e.kind == EventKind::ChargeStart)
        .map(|e| e.slot)
        .collect()
}
