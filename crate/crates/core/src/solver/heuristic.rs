//! Greedy insertion by descending distance, then local search.

use std::collections::BTreeSet;

use crate::model::{Decisions, Plan};

use super::charging::{bus_relaxation, greedy, Frame};
use super::validate::coverage_deficit;
use super::{Instance, SolveError};

/// Upper bound on charging completions tried by one local search.
const EVALUATION_LIMIT: usize = 20_000;

struct Local<'a> {
    inst: &'a Instance,
    frame: &'a Frame,
    coverage: bool,
    fixed: &'a BTreeSet<(usize, usize)>,
    free: Vec<usize>,
    evaluations: usize,
}

type Score = (usize, i64);

impl Local<'_> {
    fn score(&self, a: &BTreeSet<(usize, usize)>) -> Score {
        let d = Decisions {
            assignments: a.clone(),
            charging: Vec::new(),
        };
        let deficit = if self.coverage {
            coverage_deficit(self.inst, &d)
        } else {
            0
        };
        // Miles at micro-mile resolution keep the order total and exact.
        let miles = (d.served_miles(self.inst.scenario()) * 1e6).round() as i64;
        (deficit, -miles)
    }

    fn fits(&self, a: &BTreeSet<(usize, usize)>, bus: usize, block: usize) -> bool {
        let s = self.inst.scenario();
        let setup = s.constraints.setup_slots;
        let b = &s.blocks[block];
        self.inst.compatible(bus, block)
            && a.iter().filter(|p| p.0 == bus).all(|&(_, j)| {
                let o = &s.blocks[j];
                o.end_slot + setup <= b.start_slot || b.end_slot + setup <= o.start_slot
            })
    }

    fn feasible(
        &mut self,
        a: &BTreeSet<(usize, usize)>,
        touched: &[usize],
    ) -> Option<Vec<Vec<bool>>> {
        for &i in touched {
            let mine: Vec<usize> = a.iter().filter(|p| p.0 == i).map(|p| p.1).collect();
            if !bus_relaxation(self.inst, self.frame, i, &mine) {
                return None;
            }
        }
        self.evaluations += 1;
        greedy(self.inst, self.frame, a)
    }

    fn try_insert(&mut self, a: &mut BTreeSet<(usize, usize)>, block: usize) -> bool {
        for &i in self.inst.bus_order() {
            if self.fits(a, i, block) {
                a.insert((i, block));
                if self.feasible(a, &[i]).is_some() {
                    return true;
                }
                a.remove(&(i, block));
            }
        }
        false
    }

    fn unserved(&self, a: &BTreeSet<(usize, usize)>) -> Vec<usize> {
        self.free
            .iter()
            .copied()
            .filter(|&j| !a.iter().any(|p| p.1 == j))
            .collect()
    }

    fn served(&self, a: &BTreeSet<(usize, usize)>) -> Vec<(usize, usize)> {
        a.iter()
            .copied()
            .filter(|p| !self.fixed.contains(p))
            .collect()
    }

    /// One improving move, applied in place.
    fn improve(&mut self, a: &mut BTreeSet<(usize, usize)>) -> bool {
        let current = self.score(a);
        let unserved = self.unserved(a);

        for &u in &unserved {
            let mut b = a.clone();
            if self.try_insert(&mut b, u) && self.score(&b) < current {
                *a = b;
                return true;
            }
        }

        let served = self.served(a);
        // Replace a served block by a longer or coverage-helping one.
        for &(i, j) in &served {
            for &u in &unserved {
                let mut b = a.clone();
                b.remove(&(i, j));
                let before = self.score(&b);
                if !self.fits(&b, i, u) {
                    continue;
                }
                b.insert((i, u));
                if self.score(&b) < current
                    && self.score(&b) < before
                    && self.feasible(&b, &[i]).is_some()
                {
                    *a = b;
                    return true;
                }
            }
        }

        // Relocate or swap, then insert into the space freed.
        let buses: Vec<usize> = self.inst.bus_order().to_vec();
        for &(i, j) in &served {
            for &i2 in &buses {
                if i2 == i {
                    continue;
                }
                let mut b = a.clone();
                b.remove(&(i, j));
                if !self.fits(&b, i2, j) {
                    continue;
                }
                b.insert((i2, j));
                if self.feasible(&b, &[i2]).is_none() {
                    continue;
                }
                for &u in &unserved {
                    let mut c = b.clone();
                    if self.try_insert(&mut c, u) && self.score(&c) < current {
                        *a = c;
                        return true;
                    }
                }
            }
        }
        if self.evaluations > EVALUATION_LIMIT / 2 {
            return false;
        }
        for (x, &(i, j)) in served.iter().enumerate() {
            for &(i2, j2) in &served[x + 1..] {
                if i2 == i {
                    continue;
                }
                let mut b = a.clone();
                b.remove(&(i, j));
                b.remove(&(i2, j2));
                if !self.fits(&b, i2, j) || !self.fits(&b, i, j2) {
                    continue;
                }
                b.insert((i2, j));
                b.insert((i, j2));
                if self.feasible(&b, &[i, i2]).is_none() {
                    continue;
                }
                for &u in &unserved {
                    let mut c = b.clone();
                    if self.try_insert(&mut c, u) && self.score(&c) < current {
                        *a = c;
                        return true;
                    }
                }
            }
        }
        false
    }
}

pub(crate) fn heuristic_from(
    inst: &Instance,
    frame: &Frame,
    coverage: bool,
    fixed: &BTreeSet<(usize, usize)>,
) -> Option<Decisions> {
    let s = inst.scenario();
    let mut free: Vec<usize> = (0..s.blocks.len())
        .filter(|&j| s.blocks[j].start_slot >= frame.t0)
        .collect();
    free.sort_by(|&a, &b| {
        s.blocks[b]
            .distance
            .total_cmp(&s.blocks[a].distance)
            .then_with(|| s.blocks[a].id.cmp(&s.blocks[b].id))
    });
    let mut ls = Local {
        inst,
        frame,
        coverage,
        fixed,
        free: free.clone(),
        evaluations: 0,
    };
    greedy(inst, frame, fixed)?;
    let mut a = fixed.clone();
    for &j in &free {
        ls.try_insert(&mut a, j);
    }
    while ls.evaluations < EVALUATION_LIMIT && ls.improve(&mut a) {}
    if coverage && ls.score(&a).0 > 0 {
        return None;
    }
    let charging = greedy(inst, frame, &a)?;
    Some(Decisions {
        assignments: a,
        charging,
    })
}

/// Greedy insertion then local search; always validates when it succeeds.
pub fn solve_heuristic(inst: &Instance) -> Result<Plan, SolveError> {
    let frame = Frame::initial(inst);
    let d =
        heuristic_from(inst, &frame, true, &BTreeSet::new()).ok_or(SolveError::HeuristicFailed)?;
    Ok(frame.plan(inst, d))
}

#[cfg(test)]
mod tests {
    use super::super::testkit::*;
    use super::super::validate_plan;
    use super::*;

    #[test]
    fn serves_everything_when_possible() {
        let mut s = scenario(24, 2, 2);
        s.blocks = vec![
            block("a", 1, 4, 10.0, 0.2),
            block("b", 2, 6, 12.0, 0.2),
            block("c", 8, 12, 9.0, 0.2),
        ];
        let inst = instance(&s);
        let p = solve_heuristic(&inst).unwrap();
        assert_eq!(p.objective_miles, s.total_distance());
        assert!(validate_plan(&inst, &p).is_empty());
    }

    #[test]
    fn empty_block_list() {
        let inst = instance(&scenario(8, 2, 1));
        let p = solve_heuristic(&inst).unwrap();
        assert_eq!(p.objective_miles, 0.0);
        assert!(p.decisions.assignments.is_empty());
    }

    #[test]
    fn local_search_meets_coverage() {
        // Greedy by distance puts the long block first; only the short one covers slot 9.
        let mut s = scenario(24, 1, 1);
        s.blocks = vec![
            block("long", 6, 12, 30.0, 0.2),
            block("short", 8, 11, 5.0, 0.2),
        ];
        s.constraints.min_buses_in_service = vec![(10, 1)];
        s.blocks[0].end_slot = 10;
        let inst = instance(&s);
        let p = solve_heuristic(&inst).unwrap();
        assert_eq!(p.served_blocks(), vec![1]);
    }
}
