//! Block assignment and depot charging schedule for one service day.
//!
//! Decisions are the binary pairs `(bus, block)` and per-slot charging
//! indicators. Charging physics is never linearised: every candidate is
//! checked by forward simulation at slot-start SOC, so the search is a
//! combinatorial one over binaries with an exact simulator in the loop.

mod charging;
mod heuristic;
mod oracle;
mod search;
mod validate;

use std::collections::BTreeMap;
use std::time::Duration;

use thiserror::Error;

use crate::model::{Defect, Scenario};
use crate::twin::{block_energy, ChargingCurve, EnergyError, TwinLibrary};

pub use charging::complete_charging;
pub use heuristic::solve_heuristic;
pub use oracle::{
    brute_force_oracle, OracleError, ORACLE_MAX_BLOCKS, ORACLE_MAX_BUSES, ORACLE_MAX_SLOTS,
};
pub use search::{replan, solve_exact, Relaxation, ReplanOutcome};
pub use validate::{depletion, simulate_plan, validate_plan, Violation, ViolationKind};

/// SOC grid spacing of [`Instance::charge_step_table`].
pub const STEP_TABLE_SPACING: f64 = 0.05;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("scenario has {} defect(s)", .0.len())]
    Defects(Vec<Defect>),
}

/// A (bus type, block) pair the instance will never assign.
#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    pub bus_type: String,
    pub block: String,
    pub reason: String,
}

/// Immutable solver input: the scenario plus everything derived from the
/// twins.
#[derive(Debug, Clone)]
pub struct Instance {
    scenario: Scenario,
    bus_type: Vec<usize>,
    /// `energy[type][block]`, SOC fraction; `None` when the pair is excluded.
    energy: Vec<Vec<Option<f64>>>,
    curves: Vec<ChargingCurve>,
    bus_order: Vec<usize>,
    exclusions: Vec<Exclusion>,
}

/// Builds the energy and charging tables.
///
/// Chargers are fungible capacity: every session is simulated on the
/// weakest charger's power limit.
pub fn build_instance(s: &Scenario, twins: &TwinLibrary) -> Result<Instance, BuildError> {
    let mut defects = crate::model::validate_scenario(s);
    defects.extend(twins.check_references(s));
    if !defects.is_empty() {
        return Err(BuildError::Defects(defects));
    }
    let charger_power = s
        .chargers
        .iter()
        .map(|c| c.max_power)
        .fold(f64::INFINITY, f64::min);
    let mut energy = Vec::with_capacity(s.bus_types.len());
    let mut curves = Vec::with_capacity(s.bus_types.len());
    let mut exclusions = Vec::new();
    for t in &s.bus_types {
        let twin = twins.twin_for(t).expect("references checked");
        let mut row = Vec::with_capacity(s.blocks.len());
        for b in &s.blocks {
            if !s.profile_compatible(t, b) {
                row.push(None);
                continue;
            }
            match block_energy(twin, b, t, &twins.profiles) {
                Ok(e) => row.push(Some(e)),
                Err(err) => {
                    let reason = match &err {
                        EnergyError::InfeasibleForType { .. } => "infeasible-for-type".to_string(),
                        other => other.to_string(),
                    };
                    exclusions.push(Exclusion {
                        bus_type: t.id.clone(),
                        block: b.id.clone(),
                        reason,
                    });
                    row.push(None);
                }
            }
        }
        energy.push(row);
        curves.push(if charger_power.is_finite() {
            twin.charging_curve.clipped(charger_power)
        } else {
            twin.charging_curve.clone()
        });
    }
    Ok(Instance::assemble(s.clone(), energy, curves, exclusions))
}

impl Instance {
    fn assemble(
        scenario: Scenario,
        energy: Vec<Vec<Option<f64>>>,
        curves: Vec<ChargingCurve>,
        exclusions: Vec<Exclusion>,
    ) -> Self {
        let bus_type = (0..scenario.buses.len())
            .map(|i| {
                scenario
                    .bus_type_index(&scenario.buses[i].bus_type)
                    .expect("validated scenario")
            })
            .collect();
        let mut bus_order: Vec<usize> = (0..scenario.buses.len()).collect();
        bus_order.sort_by(|&a, &b| scenario.buses[a].id.cmp(&scenario.buses[b].id));
        Self {
            scenario,
            bus_type,
            energy,
            curves,
            bus_order,
            exclusions,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn exclusions(&self) -> &[Exclusion] {
        &self.exclusions
    }

    pub fn slot_count(&self) -> usize {
        self.scenario.grid.slot_count
    }

    pub fn bus_count(&self) -> usize {
        self.scenario.buses.len()
    }

    /// Buses in id order, the tie-breaking order of every search.
    pub(crate) fn bus_order(&self) -> &[usize] {
        &self.bus_order
    }

    pub fn bus_type_of(&self, bus: usize) -> usize {
        self.bus_type[bus]
    }

    /// SOC fraction block `j` consumes on bus `i`, or `None` when excluded.
    pub fn energy(&self, bus: usize, block: usize) -> Option<f64> {
        self.energy[self.bus_type[bus]][block]
    }

    pub fn compatible(&self, bus: usize, block: usize) -> bool {
        self.energy(bus, block).is_some()
    }

    /// The energy table keyed by (bus type id, block id).
    pub fn energy_table(&self) -> BTreeMap<(String, String), f64> {
        let mut out = BTreeMap::new();
        for (ti, row) in self.energy.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                if let Some(e) = e {
                    out.insert(
                        (
                            self.scenario.bus_types[ti].id.clone(),
                            self.scenario.blocks[j].id.clone(),
                        ),
                        *e,
                    );
                }
            }
        }
        out
    }

    /// Charging curve actually delivered to buses of type `t`.
    pub fn charging_curve(&self, bus_type: usize) -> &ChargingCurve {
        &self.curves[bus_type]
    }

    pub fn capacity(&self, bus: usize) -> f64 {
        self.scenario.bus_types[self.bus_type[bus]].battery_capacity
    }

    /// SOC after one charging slot starting at `soc`.
    pub fn charge_step(&self, bus: usize, soc: f64) -> f64 {
        let minutes = self.scenario.grid.slot_minutes as f64;
        self.curves[self.bus_type[bus]].charge_added(self.capacity(bus), soc, minutes)
    }

    /// `(soc, gain)` for one slot on a charger, at [`STEP_TABLE_SPACING`]
    /// intervals. Informational; the simulator evaluates the curve exactly.
    pub fn charge_step_table(&self, bus_type: usize) -> Vec<(f64, f64)> {
        let cap = self.scenario.bus_types[bus_type].battery_capacity;
        let minutes = self.scenario.grid.slot_minutes as f64;
        let n = (1.0 / STEP_TABLE_SPACING).round() as usize;
        (0..=n)
            .map(|k| {
                let soc = k as f64 * STEP_TABLE_SPACING;
                (
                    soc,
                    self.curves[bus_type].charge_added(cap, soc, minutes) - soc,
                )
            })
            .collect()
    }

    /// The same instance with every block demand multiplied by `factor`.
    pub fn with_energy_scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for row in &mut out.energy {
            for e in row.iter_mut().flatten() {
                *e *= factor;
            }
        }
        out
    }
}

/// Search limits. Node budgets are deterministic; time budgets are not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub nodes: Option<u64>,
    pub time: Option<Duration>,
}

impl Budget {
    pub fn nodes(n: u64) -> Self {
        Self {
            nodes: Some(n),
            time: None,
        }
    }

    pub fn time(d: Duration) -> Self {
        Self {
            nodes: None,
            time: Some(d),
        }
    }

    pub fn unlimited() -> Self {
        Self {
            nodes: None,
            time: None,
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Self::nodes(2_000_000)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no plan satisfies the constraints")]
    Infeasible,
    #[error("budget exhausted after {nodes} nodes without a feasible plan")]
    Indeterminate { nodes: u64 },
    #[error("no feasible plan found by the heuristic")]
    HeuristicFailed,
}
