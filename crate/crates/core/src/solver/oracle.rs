//! Exhaustive enumeration for tiny instances, used as a test oracle.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::model::{runs, Certificate, Decisions, Plan};

use super::validate::EPS;
use super::{simulate_plan, validate_plan, Instance};

pub const ORACLE_MAX_BUSES: usize = 2;
pub const ORACLE_MAX_BLOCKS: usize = 4;
pub const ORACLE_MAX_SLOTS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("oracle domain is <= {ORACLE_MAX_BUSES} buses, <= {ORACLE_MAX_BLOCKS} blocks, <= {ORACLE_MAX_SLOTS} slots; got {buses}, {blocks}, {slots}")]
    OutOfDomain {
        buses: usize,
        blocks: usize,
        slots: usize,
    },
    #[error("no assignment and charging combination validates")]
    Infeasible,
}

struct BusMasks {
    charging: u32,
    occupancy: u32,
}

fn per_bus_schedules(inst: &Instance, bus: usize, blocks: &[usize]) -> Vec<BusMasks> {
    let s = inst.scenario();
    let n = s.grid.slot_count;
    let setup = s.constraints.setup_slots;
    let b = &s.buses[bus];
    let mut in_block = 0u32;
    let mut block_setup = 0u32;
    let mut dep = vec![0.0; n];
    for &j in blocks {
        let blk = &s.blocks[j];
        let e = inst.energy(bus, j).unwrap_or(0.0) / blk.len_slots() as f64;
        for t in blk.start_slot..blk.end_slot {
            in_block |= 1 << t;
            dep[t] += e;
        }
        for t in blk.start_slot.saturating_sub(setup)..blk.start_slot {
            block_setup |= 1 << t;
        }
    }
    let peak: u32 = (0..n)
        .filter(|&t| s.constraints.in_peak(t))
        .map(|t| 1 << t)
        .sum();
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask & (in_block | block_setup) != 0 {
            continue;
        }
        if mask != 0 && s.chargers.is_empty() {
            continue;
        }
        if s.constraints.max_concurrent_sessions_peak == 0 && mask & peak != 0 {
            continue;
        }
        let bits: Vec<bool> = (0..n).map(|t| mask >> t & 1 == 1).collect();
        let mut occupancy = mask;
        let mut ok = true;
        for (c, _) in runs(&bits) {
            for t in c.saturating_sub(setup)..c {
                if in_block >> t & 1 == 1 || bits[t] {
                    ok = false;
                }
                occupancy |= 1 << t;
            }
        }
        if !ok {
            continue;
        }
        let mut soc = b.soc_initial;
        for t in 0..n {
            if bits[t] {
                soc = inst.charge_step(bus, soc);
            }
            soc -= dep[t];
            if soc < b.soc_min - EPS || soc > b.soc_max + EPS {
                ok = false;
                break;
            }
        }
        if ok && soc >= b.soc_final_target - EPS {
            out.push(BusMasks {
                charging: mask,
                occupancy,
            });
        }
    }
    out
}

/// The optimum by enumeration of every assignment map and every per-slot
/// charging bitmap, filtered by [`validate_plan`].
///
/// Ties go to the lexicographically smallest decision vector: block
/// assignments in block order (unserved before bus 0 before bus 1), then
/// charging bits bus by bus, slot by slot.
pub fn brute_force_oracle(inst: &Instance) -> Result<Plan, OracleError> {
    let s = inst.scenario();
    let (nb, nj, n) = (s.buses.len(), s.blocks.len(), s.grid.slot_count);
    if nb > ORACLE_MAX_BUSES || nj > ORACLE_MAX_BLOCKS || n > ORACLE_MAX_SLOTS {
        return Err(OracleError::OutOfDomain {
            buses: nb,
            blocks: nj,
            slots: n,
        });
    }
    let setup = s.constraints.setup_slots;

    let mut maps: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..nj {
        maps = maps
            .into_iter()
            .flat_map(|m| {
                (0..=nb).map(move |v| {
                    let mut m = m.clone();
                    m.push(v);
                    m
                })
            })
            .collect();
    }
    let miles = |m: &[usize]| -> f64 {
        (0..nj)
            .filter(|&j| m[j] > 0)
            .map(|j| s.blocks[j].distance)
            .sum()
    };
    maps.sort_by(|a, b| miles(b).total_cmp(&miles(a)).then_with(|| a.cmp(b)));

    let mut cache: HashMap<(usize, Vec<usize>), Vec<BusMasks>> = HashMap::new();
    let peak: u32 = (0..n)
        .filter(|&t| s.constraints.in_peak(t))
        .map(|t| 1 << t)
        .sum();
    for m in &maps {
        let assignments: BTreeSet<(usize, usize)> = (0..nj)
            .filter(|&j| m[j] > 0)
            .map(|j| (m[j] - 1, j))
            .collect();
        let blocks_of: Vec<Vec<usize>> = (0..nb)
            .map(|i| (0..nj).filter(|&j| m[j] == i + 1).collect())
            .collect();
        let consistent = blocks_of.iter().enumerate().all(|(i, list)| {
            list.iter().all(|&j| inst.compatible(i, j))
                && list.iter().enumerate().all(|(x, &a)| {
                    list[x + 1..].iter().all(|&b| {
                        let (ba, bb) = (&s.blocks[a], &s.blocks[b]);
                        ba.end_slot + setup <= bb.start_slot || bb.end_slot + setup <= ba.start_slot
                    })
                })
        });
        if !consistent {
            continue;
        }
        let probe = Decisions {
            assignments: assignments.clone(),
            charging: vec![vec![false; n]; nb],
        };
        if super::validate::coverage_deficit(inst, &probe) > 0 {
            continue;
        }
        for (i, list) in blocks_of.iter().enumerate() {
            cache
                .entry((i, list.clone()))
                .or_insert_with(|| per_bus_schedules(inst, i, list));
        }
        let lists: Vec<&Vec<BusMasks>> = blocks_of
            .iter()
            .enumerate()
            .map(|(i, list)| &cache[&(i, list.clone())])
            .collect();
        let to_decisions = |masks: &[u32]| Decisions {
            assignments: assignments.clone(),
            charging: masks
                .iter()
                .map(|&mk| (0..n).map(|t| mk >> t & 1 == 1).collect())
                .collect(),
        };
        let accept = |masks: &[u32]| -> Option<Plan> {
            let mut plan = simulate_plan(inst, &to_decisions(masks), 1.0);
            plan.certificate = Certificate::ProvenOptimal;
            validate_plan(inst, &plan).is_empty().then_some(plan)
        };
        let found = match nb {
            0 => accept(&[]),
            1 => lists[0].iter().find_map(|a| accept(&[a.charging])),
            _ => {
                let single_charger = s.chargers.len() < 2;
                let single_peak = s.constraints.max_concurrent_sessions_peak < 2;
                lists[0].iter().find_map(|a| {
                    lists[1].iter().find_map(|b| {
                        if single_charger && a.occupancy & b.occupancy != 0 {
                            return None;
                        }
                        if single_peak && a.charging & b.charging & peak != 0 {
                            return None;
                        }
                        accept(&[a.charging, b.charging])
                    })
                })
            }
        };
        if let Some(plan) = found {
            return Ok(plan);
        }
    }
    Err(OracleError::Infeasible)
}
