//! Per-bus-type predictive model: trip energy from a longitudinal force
//! model and time-to-charge from an SOC-dependent charging curve.

mod charging;
mod fit;
mod profile;
mod road_load;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Block, BusType, Defect, RouteDescriptor, Scenario};

pub use charging::ChargingCurve;
pub use fit::{fit_road_load, lumped_parameters, RoadLoadFit, PARAMETER_NAMES};
pub use profile::{TripProfile, TripSample};
pub use road_load::{
    battery_power, cornering_force, relative_air_speed, road_load_force, split_brake_force,
    traction_power, trip_energy, BrakeAllocation, MotorEfficiencyMap, VehicleParams,
    STANDARD_GRAVITY,
};

#[derive(Debug, Error)]
pub enum TwinError {
    #[error("trip profile has no samples")]
    EmptyProfile,
    #[error("invalid trip profile: {0}")]
    InvalidProfile(String),
    #[error("invalid charging curve: {0}")]
    InvalidCurve(String),
    #[error("invalid efficiency map: {0}")]
    InvalidMap(String),
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
    #[error("target soc {to} is below starting soc {from}")]
    Discharging { from: f64, to: f64 },
    #[error("target soc {0} exceeds full charge")]
    BeyondFull(f64),
    #[error("regressors are rank deficient along: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

/// The predictive model attached to a bus type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitalTwin {
    pub vehicle_params: VehicleParams,
    pub efficiency_map: MotorEfficiencyMap,
    pub brake_allocation: BrakeAllocation,
    pub charging_curve: ChargingCurve,
}

impl DigitalTwin {
    pub fn validate(&self) -> Result<(), TwinError> {
        self.vehicle_params.validate()?;
        self.efficiency_map.validate()?;
        self.charging_curve.validate()?;
        if !(self.brake_allocation.regen_min_speed >= 0.0
            && self.brake_allocation.max_regen_force >= 0.0)
        {
            return Err(TwinError::InvalidParams(
                "brake allocation limits must be >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn trip_energy(&self, profile: &TripProfile) -> Result<f64, TwinError> {
        trip_energy(
            &self.vehicle_params,
            &self.efficiency_map,
            &self.brake_allocation,
            &self.charging_curve,
            profile,
        )
    }

    pub fn from_json_str(text: &str) -> Result<Self, TwinError> {
        let twin: Self =
            serde_json::from_str(text).map_err(|e| TwinError::InvalidParams(e.to_string()))?;
        twin.validate()?;
        Ok(twin)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, TwinError> {
        let text = std::fs::read_to_string(path).map_err(|e| TwinError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json_str(&text)
    }
}

/// Why a block has no usable demand for a bus type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("block {block} needs {kwh:.1} kWh but type {bus_type} holds {capacity:.1} kWh")]
    InfeasibleForType {
        block: String,
        bus_type: String,
        kwh: f64,
        capacity: f64,
    },
    #[error("block {block} has no energy source for type {bus_type}")]
    Unresolved { block: String, bus_type: String },
    #[error("trip profile of block {block} is invalid: {reason}")]
    Profile { block: String, reason: String },
}

/// Twins and trip profiles referenced by a scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TwinLibrary {
    pub twins: BTreeMap<String, DigitalTwin>,
    pub profiles: BTreeMap<String, TripProfile>,
}

impl TwinLibrary {
    pub fn twin_for(&self, bus_type: &BusType) -> Option<&DigitalTwin> {
        self.twins.get(&bus_type.twin_id)
    }

    pub fn check_references(&self, s: &Scenario) -> Vec<Defect> {
        let mut out = Vec::new();
        for t in &s.bus_types {
            if !self.twins.contains_key(&t.twin_id) {
                out.push(Defect::new(
                    format!("bus_type/{}", t.id),
                    format!("twin `{}` does not resolve", t.twin_id),
                ));
            }
        }
        for b in &s.blocks {
            if let RouteDescriptor::Profile(p) = &b.route {
                if !self.profiles.contains_key(p) {
                    out.push(Defect::new(
                        format!("block/{}", b.id),
                        format!("trip profile `{p}` does not resolve"),
                    ));
                }
            }
        }
        out
    }
}

/// SOC fraction a block consumes on a bus type.
pub fn block_energy(
    twin: &DigitalTwin,
    block: &Block,
    bus_type: &BusType,
    profiles: &BTreeMap<String, TripProfile>,
) -> Result<f64, EnergyError> {
    let kwh = match &block.route {
        RouteDescriptor::Energy(per_type) => {
            *per_type
                .get(&bus_type.id)
                .ok_or_else(|| EnergyError::Unresolved {
                    block: block.id.clone(),
                    bus_type: bus_type.id.clone(),
                })?
        }
        RouteDescriptor::Profile(pid) => {
            let profile = profiles.get(pid).ok_or_else(|| EnergyError::Unresolved {
                block: block.id.clone(),
                bus_type: bus_type.id.clone(),
            })?;
            twin.trip_energy(profile)
                .map_err(|e| EnergyError::Profile {
                    block: block.id.clone(),
                    reason: e.to_string(),
                })?
        }
    };
    if kwh > bus_type.battery_capacity {
        return Err(EnergyError::InfeasibleForType {
            block: block.id.clone(),
            bus_type: bus_type.id.clone(),
            kwh,
            capacity: bus_type.battery_capacity,
        });
    }
    Ok(kwh / bus_type.battery_capacity)
}

#[cfg(test)]
pub(crate) fn test_twin(max_power: f64) -> DigitalTwin {
    DigitalTwin {
        vehicle_params: VehicleParams {
            mass_total: 15000.0,
            mass_effective: 15600.0,
            aero_coeff: 3.0,
            rolling_coeff: 0.008,
            cornering_stiffness: 2.0e5,
            config_id: "std".into(),
            aux_power: 5.0,
            gravity: 9.81,
        },
        efficiency_map: MotorEfficiencyMap::uniform(0.9),
        brake_allocation: BrakeAllocation {
            regen_min_speed: 3.0,
            max_regen_force: 20000.0,
        },
        charging_curve: ChargingCurve::flat(max_power),
    }
}
