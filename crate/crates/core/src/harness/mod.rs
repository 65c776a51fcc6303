//! The pieces behind the command line: file formats, replay, comparison and
//! reporting.

mod gantt;
mod io;
mod replay;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::depot::{DepotError, DepotLayout};
use crate::model::{Defect, Plan};
use crate::solver::{
    solve_exact, solve_heuristic, Budget, BuildError, Instance, Relaxation, SolveError,
};

pub use gantt::gantt_svg;
pub use io::{
    charger_of_sessions, charger_utilization, peak_concurrent, plan_csv, read_plan_csv,
    soc_trace_csv, time_label, LoadedScenario,
};
pub use replay::{replay, replay_with, ReplayConfig, ReplayOutcome};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{} scenario defect(s)", .0.len())]
    Defects(Vec<Defect>),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Depot(#[from] DepotError),
}

impl From<BuildError> for HarnessError {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::Defects(d) => HarnessError::Defects(d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Exact,
    Heuristic,
}

pub fn solve(inst: &Instance, mode: SolveMode, budget: Budget) -> Result<Plan, SolveError> {
    match mode {
        SolveMode::Exact => solve_exact(inst, budget),
        SolveMode::Heuristic => solve_heuristic(inst),
    }
}

/// Headline numbers of one run, all recomputable from the exported CSVs.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub objective_miles: f64,
    pub served_miles_per_bus: BTreeMap<String, f64>,
    pub charger_slot_utilization: f64,
    pub peak_concurrent_sessions: usize,
    pub violation_count: usize,
    pub violations: Vec<String>,
    pub replan_count: usize,
    pub certificate: String,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn new(
        inst: &Instance,
        plan: &Plan,
        violations: &[crate::solver::Violation],
        replans: usize,
        wall: Duration,
    ) -> Self {
        let s = inst.scenario();
        let served_miles_per_bus = s
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| {
                (
                    b.id.clone(),
                    plan.decisions
                        .blocks_of(i)
                        .map(|j| s.blocks[j].distance)
                        .fold(0.0, |a, b| a + b),
                )
            })
            .collect();
        Self {
            objective_miles: plan.objective_miles,
            served_miles_per_bus,
            charger_slot_utilization: charger_utilization(s, &plan.decisions),
            peak_concurrent_sessions: peak_concurrent(&plan.decisions, s.grid.slot_count),
            violation_count: violations.len(),
            violations: violations.iter().map(|v| v.to_string()).collect(),
            replan_count: replans,
            certificate: plan.certificate.to_string(),
            wall_time_s: wall.as_secs_f64(),
        }
    }
}

/// A replayed day: the realized plan's numbers plus what the depot did.
#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    #[serde(flatten)]
    pub run: RunReport,
    pub error_factor: f64,
    pub replan_enabled: bool,
    pub planned_miles: f64,
    pub trigger_count: usize,
    /// Rules a replan had to drop.
    pub relaxed: Vec<&'static str>,
    /// Violations remain, a rule was relaxed, or planned miles went unserved.
    pub degraded: bool,
}

impl SimulateReport {
    pub fn new(
        inst: &Instance,
        planned: &Plan,
        out: &ReplayOutcome,
        cfg: &ReplayConfig,
        wall: Duration,
    ) -> Self {
        let degraded = !out.violations.is_empty()
            || !out.relaxed.is_empty()
            || out.realized_miles() < planned.objective_miles - 1e-9;
        Self {
            run: RunReport::new(inst, &out.realized, &out.violations, out.replans, wall),
            error_factor: cfg.error_factor,
            replan_enabled: cfg.replan,
            planned_miles: planned.objective_miles,
            trigger_count: out.triggers,
            relaxed: out
                .relaxed
                .iter()
                .map(|r| match r {
                    Relaxation::ServiceCoverage => "service-coverage",
                    Relaxation::FinalTarget => "final-target",
                    Relaxation::SocBounds => "soc-bounds",
                })
                .collect(),
            degraded,
        }
    }
}

/// Plans made with true and with pessimistic (`plan_factor`-scaled)
/// energy, both replayed against true consumption.
#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub plan_factor: f64,
    pub planned_miles_true: f64,
    pub planned_miles_scaled: f64,
    pub realized_miles_true: f64,
    pub realized_miles_scaled: f64,
    /// `realized_miles_scaled / realized_miles_true`; 1 when both are 0.
    pub utilization_ratio: f64,
    pub certificate_true: String,
    pub certificate_scaled: String,
    pub violations_true: usize,
    pub violations_scaled: usize,
}

pub fn compare(
    inst: &Instance,
    layout: &DepotLayout,
    plan_factor: f64,
    mode: SolveMode,
    budget: Budget,
) -> Result<CompareReport, HarnessError> {
    let truth = solve(inst, mode, budget)?;
    let scaled = solve(&inst.with_energy_scale(plan_factor), mode, budget)?;
    let cfg = ReplayConfig::default();
    let a = replay(inst, &truth, layout, &cfg)?;
    let b = replay(inst, &scaled, layout, &cfg)?;
    let ratio = if a.realized_miles() > 0.0 {
        b.realized_miles() / a.realized_miles()
    } else {
        1.0
    };
    Ok(CompareReport {
        plan_factor,
        planned_miles_true: truth.objective_miles,
        planned_miles_scaled: scaled.objective_miles,
        realized_miles_true: a.realized_miles(),
        realized_miles_scaled: b.realized_miles(),
        utilization_ratio: ratio,
        certificate_true: truth.certificate.to_string(),
        certificate_scaled: scaled.certificate.to_string(),
        violations_true: a.violations.len(),
        violations_scaled: b.violations.len(),
    })
}
