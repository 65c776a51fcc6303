//! Depth-first branch and bound over block-to-bus assignments.

use std::collections::BTreeSet;
use std::time::Instant;

use crate::model::{Certificate, Decisions, Plan};

use super::charging::{bus_relaxation, schedule, Exact, Frame};
use super::heuristic::heuristic_from;
use super::validate::{coverage_deficit, simulate_trace, validate_with, Rules, Violation, EPS};
use super::{Budget, Instance, SolveError};

/// Node budget of the exhaustive charging search at one leaf.
const LEAF_BUDGET: u64 = 200_000;

struct Abort;

struct Search<'a> {
    inst: &'a Instance,
    frame: &'a Frame,
    coverage: bool,
    free: Vec<usize>,
    /// Distance of assignable free blocks from position `k` on.
    rest: Vec<f64>,
    /// `(slot, count, free blocks from position k on covering slot)`.
    cover: Vec<(usize, usize, Vec<usize>)>,
    covered: Vec<usize>,
    assign: BTreeSet<(usize, usize)>,
    bus_blocks: Vec<Vec<usize>>,
    last_end: Vec<Option<usize>>,
    served: f64,
    best: Option<(f64, Decisions)>,
    open_bound: f64,
    nodes: u64,
    budget: Budget,
    started: Instant,
}

impl Search<'_> {
    fn out_of_budget(&self) -> bool {
        if self.budget.nodes.is_some_and(|n| self.nodes >= n) {
            return true;
        }
        match self.budget.time {
            Some(d) => self.started.elapsed() >= d,
            _ => false,
        }
    }

    fn improves(&self, value: f64) -> bool {
        self.best.as_ref().is_none_or(|(b, _)| value > b + EPS)
    }

    fn coverage_possible(&self, k: usize) -> bool {
        !self.coverage
            || self
                .cover
                .iter()
                .zip(&self.covered)
                .all(|((_, count, from), &have)| have + from[k] >= *count)
    }

    /// Buses interchangeable with an earlier bus in id order.
    fn symmetric_to_earlier(&self, pos: usize) -> bool {
        let order = self.inst.bus_order();
        let s = self.inst.scenario();
        let i = order[pos];
        if !self.bus_blocks[i].is_empty() {
            return false;
        }
        order[..pos].iter().any(|&h| {
            let (a, b) = (&s.buses[h], &s.buses[i]);
            self.bus_blocks[h].is_empty()
                && a.bus_type == b.bus_type
                && a.soc_min == b.soc_min
                && a.soc_max == b.soc_max
                && a.soc_final_target == b.soc_final_target
                && self.frame.start[h] == self.frame.start[i]
                && self.frame.prefix[h][..self.frame.t0] == self.frame.prefix[i][..self.frame.t0]
        })
    }

    fn leaf(&mut self) {
        if !self.improves(self.served) {
            return;
        }
        match schedule(
            self.inst,
            self.frame,
            &self.assign,
            LEAF_BUDGET,
            self.budget.time.map(|d| self.started + d),
        ) {
            Exact::Found(charging) => {
                let d = Decisions {
                    assignments: self.assign.clone(),
                    charging,
                };
                self.best = Some((self.served, d));
            }
            Exact::Exhausted => self.open_bound = self.open_bound.max(self.served),
            Exact::Infeasible => {}
        }
    }

    fn dfs(&mut self, k: usize) -> Result<(), Abort> {
        self.nodes += 1;
        if self.out_of_budget() {
            self.open_bound = self.open_bound.max(self.served + self.rest[k]);
            return Err(Abort);
        }
        if !self.improves(self.served + self.rest[k]) || !self.coverage_possible(k) {
            return Ok(());
        }
        if k == self.free.len() {
            self.leaf();
            return Ok(());
        }
        let j = self.free[k];
        let s = self.inst.scenario();
        let b = &s.blocks[j];
        let setup = s.constraints.setup_slots;
        let n_buses = self.inst.bus_count();
        for pos in 0..n_buses {
            let i = self.inst.bus_order()[pos];
            if !self.inst.compatible(i, j)
                || self.last_end[i].is_some_and(|e| e + setup > b.start_slot)
                || self.symmetric_to_earlier(pos)
            {
                continue;
            }
            self.bus_blocks[i].push(j);
            if !bus_relaxation(self.inst, self.frame, i, &self.bus_blocks[i]) {
                self.bus_blocks[i].pop();
                continue;
            }
            let prev_end = self.last_end[i].replace(b.end_slot);
            self.assign.insert((i, j));
            self.served += b.distance;
            for (r, (slot, _, _)) in self.cover.iter().enumerate() {
                if b.covers(*slot) {
                    self.covered[r] += 1;
                }
            }
            let res = self.dfs(k + 1);
            for (r, (slot, _, _)) in self.cover.iter().enumerate() {
                if b.covers(*slot) {
                    self.covered[r] -= 1;
                }
            }
            self.served -= b.distance;
            self.assign.remove(&(i, j));
            self.last_end[i] = prev_end;
            self.bus_blocks[i].pop();
            if res.is_err() {
                // Remaining siblings are bounded by the skip branch.
                self.open_bound = self.open_bound.max(self.served + self.rest[k]);
                return res;
            }
        }
        self.dfs(k + 1)
    }
}

/// Outcome of a search: the best decisions and their certificate.
pub(crate) fn search(
    inst: &Instance,
    frame: &Frame,
    coverage: bool,
    fixed: &BTreeSet<(usize, usize)>,
    warm: Option<Decisions>,
    budget: Budget,
) -> Result<(Decisions, Certificate), SolveError> {
    let s = inst.scenario();
    let t0 = frame.t0;
    let mut free: Vec<usize> = (0..s.blocks.len())
        .filter(|&j| s.blocks[j].start_slot >= t0)
        .collect();
    free.sort_by_key(|&j| (s.blocks[j].start_slot, s.blocks[j].id.clone()));
    let mut rest = vec![0.0; free.len() + 1];
    for k in (0..free.len()).rev() {
        let j = free[k];
        let assignable = (0..s.buses.len()).any(|i| inst.compatible(i, j));
        rest[k] = rest[k + 1]
            + if assignable {
                s.blocks[j].distance
            } else {
                0.0
            };
    }
    let cover: Vec<(usize, usize, Vec<usize>)> = s
        .constraints
        .min_buses_in_service
        .iter()
        .filter(|&&(slot, _)| slot >= t0)
        .map(|&(slot, count)| {
            let mut from = vec![0; free.len() + 1];
            for k in (0..free.len()).rev() {
                from[k] = from[k + 1] + usize::from(s.blocks[free[k]].covers(slot));
            }
            (slot, count, from)
        })
        .collect();
    let mut bus_blocks = vec![Vec::new(); s.buses.len()];
    let mut last_end: Vec<Option<usize>> = vec![None; s.buses.len()];
    let mut covered = vec![0; cover.len()];
    let mut served = 0.0;
    for &(i, j) in fixed {
        bus_blocks[i].push(j);
        let e = s.blocks[j].end_slot;
        last_end[i] = Some(last_end[i].map_or(e, |x: usize| x.max(e)));
        served += s.blocks[j].distance;
        for (r, (slot, _, _)) in cover.iter().enumerate() {
            if s.blocks[j].covers(*slot) {
                covered[r] += 1;
            }
        }
    }
    let best = warm.map(|d| (d.served_miles(s), d));
    let mut st = Search {
        inst,
        frame,
        coverage,
        free,
        rest,
        cover,
        covered,
        assign: fixed.clone(),
        bus_blocks,
        last_end,
        served,
        best,
        open_bound: f64::NEG_INFINITY,
        nodes: 0,
        budget,
        started: Instant::now(),
    };
    let aborted = st.dfs(0).is_err();
    match st.best {
        Some((value, d)) => {
            let cert = if st.open_bound > value + EPS {
                Certificate::BestFound {
                    bound: st.open_bound,
                }
            } else {
                Certificate::ProvenOptimal
            };
            Ok((d, cert))
        }
        None if aborted || st.open_bound > f64::NEG_INFINITY => {
            Err(SolveError::Indeterminate { nodes: st.nodes })
        }
        None => Err(SolveError::Infeasible),
    }
}

/// Maximises served miles. The result always validates.
///
/// Blocks are branched in (start, id) order, each to every compatible bus
/// in id order and finally left unserved; a subtree is cut when its served
/// miles plus all remaining assignable miles cannot beat the incumbent.
pub fn solve_exact(inst: &Instance, budget: Budget) -> Result<Plan, SolveError> {
    let frame = Frame::initial(inst);
    let fixed = BTreeSet::new();
    let warm = heuristic_from(inst, &frame, true, &fixed);
    let (d, cert) = search(inst, &frame, true, &fixed, warm, budget)?;
    let mut plan = frame.plan(inst, d);
    plan.certificate = cert;
    Ok(plan)
}

/// A rule relaxed to keep serving after the frozen prefix made the full
/// rule set unattainable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relaxation {
    ServiceCoverage,
    FinalTarget,
    SocBounds,
}

#[derive(Debug, Clone)]
pub struct ReplanOutcome {
    /// Boundaries before `t0` hold the prediction, not the realised SOC.
    pub plan: Plan,
    pub relaxed: Vec<Relaxation>,
    /// Strict-rule violations from `t0` on; empty unless `relaxed` is not.
    pub violations: Vec<Violation>,
}

/// Re-solves slots `t0..` from live SOC. Blocks starting before `t0` keep
/// their prior bus, charging before `t0` is frozen. The prior decisions are
/// kept on ties, so a prior optimum is a fixed point.
pub fn replan(
    inst: &Instance,
    prior: &Decisions,
    t0: usize,
    live_soc: &[f64],
    budget: Budget,
) -> Result<ReplanOutcome, SolveError> {
    let s = inst.scenario();
    let n = s.grid.slot_count;
    let t0 = t0.min(n);
    let fixed: BTreeSet<(usize, usize)> = prior
        .assignments
        .iter()
        .copied()
        .filter(|&(_, j)| s.blocks[j].start_slot < t0)
        .collect();
    let mut prefix = prior.charging.clone();
    prefix.resize(s.buses.len(), vec![false; n]);
    let base = Frame {
        t0,
        start: live_soc.to_vec(),
        prefix,
        rules: Rules::without_coverage(),
    };

    let forced = {
        let d = Decisions {
            assignments: fixed.clone(),
            charging: base
                .prefix
                .iter()
                .map(|row| (0..n).map(|t| t < t0 && row[t]).collect())
                .collect(),
        };
        simulate_trace(inst, &d, 1.0, (t0 > 0).then_some((t0, live_soc)))
    };
    let levels: [(bool, bool, bool); 4] = [
        (true, true, false),
        (false, true, false),
        (false, false, false),
        (false, false, true),
    ];
    let mut last_err = SolveError::Infeasible;
    for (level, &(coverage, final_target, loosen)) in levels.iter().enumerate() {
        let mut frame = base.clone();
        frame.rules.final_target = final_target;
        if loosen {
            frame.rules.floor = Some(
                (0..s.buses.len())
                    .map(|i| {
                        let lowest = forced[i][t0..]
                            .iter()
                            .copied()
                            .fold(f64::INFINITY, f64::min);
                        s.buses[i].soc_min.min(lowest)
                    })
                    .collect(),
            );
            frame.rules.ceiling = Some(
                (0..s.buses.len())
                    .map(|i| s.buses[i].soc_max.max(live_soc[i]))
                    .collect(),
            );
        }
        let covered = |d: &Decisions| !coverage || deficit_from(inst, d, t0) == 0;
        let prior_ok = {
            let mut d = prior.clone();
            d.charging = frame.prefix.clone();
            (frame.accepts(inst, &d) && covered(&d)).then_some(d)
        };
        let heuristic = heuristic_from(inst, &frame, coverage, &fixed).filter(|d| covered(d));
        let warm = match (prior_ok, heuristic) {
            (Some(p), Some(h)) if h.served_miles(s) > p.served_miles(s) + EPS => Some(h),
            (Some(p), _) => Some(p),
            (None, h) => h,
        };
        match search(inst, &frame, coverage, &fixed, warm, budget) {
            Ok((d, cert)) => {
                let mut plan = frame.plan(inst, d);
                plan.certificate = cert;
                let violations = validate_with(inst, &plan, t0, &Rules::strict());
                let relaxed = [
                    (level >= 1, Relaxation::ServiceCoverage),
                    (level >= 2, Relaxation::FinalTarget),
                    (level >= 3, Relaxation::SocBounds),
                ]
                .into_iter()
                .filter_map(|(on, r)| on.then_some(r))
                .collect();
                return Ok(ReplanOutcome {
                    plan,
                    relaxed,
                    violations,
                });
            }
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

fn deficit_from(inst: &Instance, d: &Decisions, t0: usize) -> usize {
    if t0 == 0 {
        return coverage_deficit(inst, d);
    }
    let s = inst.scenario();
    s.constraints
        .min_buses_in_service
        .iter()
        .filter(|&&(slot, _)| slot >= t0)
        .map(|&(slot, count)| {
            let serving = (0..s.buses.len())
                .filter(|&i| d.blocks_of(i).any(|j| s.blocks[j].covers(slot)))
                .count();
            count.saturating_sub(serving)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::super::testkit::*;
    use super::super::validate_plan;
    use super::*;

    #[test]
    fn overlapping_blocks_take_the_longer() {
        let mut s = scenario(16, 1, 1);
        s.blocks = vec![
            block("short", 2, 6, 10.0, 0.1),
            block("long", 3, 7, 20.0, 0.1),
        ];
        let inst = instance(&s);
        let p = solve_exact(&inst, Budget::default()).unwrap();
        assert_eq!(p.objective_miles, 20.0);
        assert_eq!(p.certificate, Certificate::ProvenOptimal);
    }

    #[test]
    fn no_charger_serves_one_of_two() {
        // 0.85 - 0.60 = 0.25 < 0.35
        let mut s = scenario(16, 1, 0);
        s.constraints.max_concurrent_sessions_peak = 0;
        s.buses[0].soc_final_target = 0.4;
        s.blocks = vec![block("a", 1, 4, 10.0, 0.30), block("b", 8, 11, 10.0, 0.30)];
        let inst = instance(&s);
        let p = solve_exact(&inst, Budget::default()).unwrap();
        assert_eq!(p.decisions.assignments.len(), 1);
        assert!(validate_plan(&inst, &p).is_empty());
    }

    #[test]
    fn a_charger_between_blocks_serves_both() {
        let mut s = scenario(24, 1, 1);
        s.buses[0].soc_final_target = 0.4;
        s.blocks = vec![block("a", 1, 4, 10.0, 0.30), block("b", 14, 17, 10.0, 0.30)];
        let inst = instance(&s);
        let p = solve_exact(&inst, Budget::default()).unwrap();
        assert_eq!(p.objective_miles, 20.0);
        assert!(validate_plan(&inst, &p).is_empty());
    }

    #[test]
    fn unmeetable_coverage_is_infeasible() {
        let mut s = scenario(8, 1, 1);
        s.blocks = vec![block("a", 1, 4, 10.0, 0.1)];
        s.blocks[0].required_profile = ["60ft".to_string()].into();
        s.constraints.min_buses_in_service = vec![(2, 1)];
        let inst = instance(&s);
        assert_eq!(
            solve_exact(&inst, Budget::default()),
            Err(SolveError::Infeasible)
        );
    }

    #[test]
    fn node_budget_yields_bound_or_indeterminate() {
        let mut s = scenario(24, 2, 1);
        s.blocks = (0..6)
            .map(|k| block(&format!("k{k}"), 1 + 3 * k, 3 + 3 * k, 10.0 + k as f64, 0.1))
            .collect();
        let inst = instance(&s);
        let full = solve_exact(&inst, Budget::default()).unwrap();
        let r = search(
            &inst,
            &Frame::initial(&inst),
            true,
            &BTreeSet::new(),
            None,
            Budget::nodes(3),
        );
        match r {
            Ok((_, Certificate::BestFound { bound })) => assert!(bound >= full.objective_miles),
            Err(SolveError::Indeterminate { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn replan_fixed_point_and_degenerate_prefix() {
        let mut s = scenario(24, 2, 1);
        s.blocks = vec![
            block("a", 2, 6, 12.0, 0.3),
            block("b", 4, 9, 15.0, 0.35),
            block("c", 12, 16, 11.0, 0.3),
            block("d", 14, 20, 18.0, 0.3),
        ];
        let inst = instance(&s);
        let p = solve_exact(&inst, Budget::default()).unwrap();
        let at0 = replan(
            &inst,
            &Decisions::for_scenario(&s),
            0,
            &[0.85, 0.85],
            Budget::default(),
        )
        .unwrap();
        assert_eq!(at0.plan.decisions, p.decisions);
        for t0 in [3, 10, 13] {
            let live: Vec<f64> = p.soc_trace.iter().map(|tr| tr[t0]).collect();
            let r = replan(&inst, &p.decisions, t0, &live, Budget::default()).unwrap();
            assert_eq!(r.plan.decisions, p.decisions, "t0 = {t0}");
            assert!(r.relaxed.is_empty() && r.violations.is_empty());
        }
    }

    #[test]
    fn low_live_soc_drops_or_recharges() {
        let mut s = scenario(24, 1, 1);
        s.blocks = vec![block("a", 2, 5, 12.0, 0.2), block("b", 10, 14, 20.0, 0.45)];
        let inst = instance(&s);
        let p = solve_exact(&inst, Budget::default()).unwrap();
        assert_eq!(p.objective_miles, 32.0);
        let t0 = 6;
        let live = vec![p.soc_trace[0][t0] - 0.10];
        let r = replan(&inst, &p.decisions, t0, &live, Budget::default()).unwrap();
        assert!(r.violations.is_empty() && r.relaxed.is_empty());
        let mut realised = r.plan.clone();
        realised.soc_trace = simulate_trace(&inst, &r.plan.decisions, 1.0, Some((t0, &live)));
        assert!(validate_with(&inst, &realised, t0, &Rules::strict()).is_empty());
    }

    #[test]
    fn damage_control_relaxes_instead_of_failing() {
        let mut s = scenario(12, 1, 1);
        s.blocks = vec![block("a", 2, 10, 30.0, 0.45)];
        s.buses[0].soc_final_target = 0.8;
        s.buses[0].soc_initial = 0.85;
        let inst = instance(&s);
        let p = solve_exact(&inst, Budget::default());
        assert!(p.is_err() || p.as_ref().unwrap().decisions.assignments.is_empty());
        let prior = Decisions {
            assignments: [(0, 0)].into(),
            charging: vec![vec![false; 12]],
        };
        let r = replan(&inst, &prior, 4, &[0.30], Budget::default()).unwrap();
        assert!(!r.relaxed.is_empty());
        assert!(!r.violations.is_empty());
        assert!(r.plan.decisions.assignments.contains(&(0, 0)));
    }
}
