//! Day replay through the depot with consumption different from prediction.

use crate::depot::{DepotError, DepotEvent, DepotLayout, DepotState};
use crate::model::{Certificate, Decisions, Plan};
use crate::solver::{depletion, replan, validate_plan, Budget, Instance, Relaxation, Violation};

#[derive(Debug, Clone, Copy)]
pub struct ReplayConfig {
    /// Actual block consumption over predicted.
    pub error_factor: f64,
    /// Re-solve when the depot raises a replan trigger.
    pub replan: bool,
    pub budget: Budget,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            error_factor: 1.0,
            replan: false,
            budget: Budget::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    /// Executed assignments and realized charging, with the realized trace.
    pub realized: Plan,
    /// The plan in force at the end of the day.
    pub final_plan: Plan,
    pub events: Vec<DepotEvent>,
    pub triggers: usize,
    pub replans: usize,
    pub relaxed: Vec<Relaxation>,
    /// Constraint breaks of the realized day.
    pub violations: Vec<Violation>,
}

impl ReplayOutcome {
    pub fn realized_miles(&self) -> f64 {
        self.realized.objective_miles
    }
}

/// Replays `plan` slot by slot. Each slot: pull-out checks (and a replan at
/// that slot if enabled and triggered), depot events, realized charging, then
/// the SOC update with block demand scaled by the error factor. Charging that
/// would pass `soc_max` stops at `soc_max`.
///
/// `observe` sees the depot after each slot's events.
pub fn replay_with(
    inst: &Instance,
    plan: &Plan,
    layout: &DepotLayout,
    cfg: &ReplayConfig,
    mut observe: impl FnMut(usize, &DepotState),
) -> Result<ReplayOutcome, DepotError> {
    let s = inst.scenario();
    let n = s.grid.slot_count;
    let nb = s.buses.len();
    let mut current = plan.clone();
    let mut depot = DepotState::new(layout.clone(), s)?;
    let mut soc: Vec<f64> = s.buses.iter().map(|b| b.soc_initial).collect();
    let mut trace: Vec<Vec<f64>> = soc.iter().map(|&x| vec![x]).collect();
    let mut charged = vec![vec![false; n]; nb];
    let (mut triggers, mut replans) = (0, 0);
    let mut relaxed = Vec::new();

    depot.open(&current.decisions, s)?;
    for t in 0..n {
        if t > 0 {
            let mut fired = false;
            for i in 0..nb {
                fired |= depot.check_pullout_feasibility(inst, &current, i, t, soc[i]);
            }
            if fired {
                triggers += 1;
            }
            if fired && cfg.replan {
                let mut prior = current.decisions.clone();
                for i in 0..nb {
                    prior.charging[i][..t].copy_from_slice(&charged[i][..t]);
                }
                if let Ok(out) = replan(inst, &prior, t, &soc, cfg.budget) {
                    current = out.plan;
                    replans += 1;
                    for r in out.relaxed {
                        if !relaxed.contains(&r) {
                            relaxed.push(r);
                        }
                    }
                    depot.plan_changed();
                }
            }
            depot.step(t, &current.decisions, s)?;
        }
        observe(t, &depot);
        let flags = depot.realize(t, &current.decisions);
        let dep = depletion(inst, &current.decisions);
        for i in 0..nb {
            let mut x = soc[i];
            if flags[i] {
                charged[i][t] = true;
                x = inst.charge_step(i, x);
                let cap = s.buses[i].soc_max;
                if x > cap + 1e-9 {
                    x = cap;
                }
            }
            x -= cfg.error_factor * dep[i][t];
            soc[i] = x;
            trace[i].push(x);
        }
    }
    depot.finish(n);

    let decisions = Decisions {
        assignments: current.decisions.assignments.clone(),
        charging: charged,
    };
    let realized = Plan {
        objective_miles: decisions.served_miles(s),
        decisions,
        soc_trace: trace,
        certificate: Certificate::Heuristic,
    };
    let violations = validate_plan(inst, &realized);
    Ok(ReplayOutcome {
        realized,
        final_plan: current,
        events: depot.events().to_vec(),
        triggers,
        replans,
        relaxed,
        violations,
    })
}

pub fn replay(
    inst: &Instance,
    plan: &Plan,
    layout: &DepotLayout,
    cfg: &ReplayConfig,
) -> Result<ReplayOutcome, DepotError> {
    replay_with(inst, plan, layout, cfg, |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::testkit::{block, instance, scenario};
    use crate::solver::{solve_exact, Budget};

    fn setup() -> (Instance, Plan, DepotLayout) {
        let mut s = scenario(24, 2, 1);
        s.blocks = vec![
            block("a", 2, 6, 10.0, 0.3),
            block("b", 8, 12, 12.0, 0.3),
            block("c", 14, 18, 9.0, 0.3),
        ];
        let inst = instance(&s);
        let plan = solve_exact(&inst, Budget::default()).unwrap();
        let layout = DepotLayout::default_for(&s);
        (inst, plan, layout)
    }

    #[test]
    fn unit_factor_reproduces_the_plan() {
        let (inst, plan, layout) = setup();
        let out = replay(&inst, &plan, &layout, &ReplayConfig::default()).unwrap();
        assert_eq!(out.realized.soc_trace, plan.soc_trace);
        assert_eq!(out.realized.decisions, plan.decisions);
        assert!(out.violations.is_empty());
        assert_eq!(out.triggers, 0);
    }

    #[test]
    fn half_consumption_adds_slack() {
        let (inst, plan, layout) = setup();
        let cfg = ReplayConfig {
            error_factor: 0.5,
            ..Default::default()
        };
        let out = replay(&inst, &plan, &layout, &cfg).unwrap();
        assert!(out.violations.is_empty());
        for (real, planned) in out.realized.soc_trace.iter().zip(&plan.soc_trace) {
            let lo = |tr: &[f64]| tr.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(lo(real) >= lo(planned));
        }
    }
}
