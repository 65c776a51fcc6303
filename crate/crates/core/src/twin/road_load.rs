//! Longitudinal traction model: road-load force at the wheel, its split
//! between motor and friction brakes, and electrical traction power.

use serde::{Deserialize, Serialize};

use super::profile::{TripProfile, TripSample};
use super::{ChargingCurve, TwinError};

pub const STANDARD_GRAVITY: f64 = 9.80665;

fn default_gravity() -> f64 {
    STANDARD_GRAVITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Vehicle plus occupants, kg.
    pub mass_total: f64,
    /// `mass_total` plus the equivalent mass of rotating parts, kg.
    pub mass_effective: f64,
    /// Aerodynamic coefficient for configuration `config_id`, kg/m.
    pub aero_coeff: f64,
    pub rolling_coeff: f64,
    /// Wheel cornering stiffness, N/rad.
    pub cornering_stiffness: f64,
    pub config_id: String,
    /// Constant auxiliary draw, kW.
    pub aux_power: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), TwinError> {
        let positive = [
            self.mass_total,
            self.mass_effective,
            self.aero_coeff,
            self.rolling_coeff,
            self.cornering_stiffness,
            self.gravity,
        ];
        if !positive.iter().all(|&x| x > 0.0) || !(self.aux_power >= 0.0) {
            return Err(TwinError::InvalidParams(
                "physical parameters must be positive".into(),
            ));
        }
        if self.mass_effective < self.mass_total {
            return Err(TwinError::InvalidParams(
                "mass_effective must be >= mass_total".into(),
            ));
        }
        Ok(())
    }

    /// Rolling coefficient at a road position, speed and tyre pressure.
    /// Collapsed to the calibrated constant while the wheels turn; a
    /// standing vehicle has no rolling loss.
    pub fn rolling_at(&self, _path_position: f64, speed: f64, _tire_pressure: f64) -> f64 {
        if speed > 0.0 {
            self.rolling_coeff
        } else {
            0.0
        }
    }
}

/// Bilinear efficiency lookup over `|force|` and `|speed|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorEfficiencyMap {
    pub force_axis: Vec<f64>,
    pub speed_axis: Vec<f64>,
    /// `efficiency[force_index][speed_index]`.
    pub efficiency: Vec<Vec<f64>>,
    pub floor: f64,
}

impl MotorEfficiencyMap {
    pub fn uniform(eta: f64) -> Self {
        Self {
            force_axis: vec![0.0, 1.0],
            speed_axis: vec![0.0, 1.0],
            efficiency: vec![vec![eta, eta], vec![eta, eta]],
            floor: eta.min(0.05),
        }
    }

    pub fn validate(&self) -> Result<(), TwinError> {
        let increasing = |v: &[f64]| !v.is_empty() && v.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&self.force_axis) || !increasing(&self.speed_axis) {
            return Err(TwinError::InvalidMap(
                "axes must be non-empty and strictly increasing".into(),
            ));
        }
        if self.efficiency.len() != self.force_axis.len()
            || self
                .efficiency
                .iter()
                .any(|r| r.len() != self.speed_axis.len())
        {
            return Err(TwinError::InvalidMap(
                "matrix shape does not match axes".into(),
            ));
        }
        let frac = |x: f64| x > 0.0 && x <= 1.0;
        if !self.efficiency.iter().flatten().all(|&e| frac(e)) || !frac(self.floor) {
            return Err(TwinError::InvalidMap(
                "efficiencies must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Efficiency at `(force, speed)`. Motor temperature is accepted for
    /// interface completeness; the map is two-dimensional.
    pub fn efficiency_at(&self, force: f64, speed: f64, _motor_temp: Option<f64>) -> f64 {
        let (i0, i1, fx) = bracket(&self.force_axis, force.abs());
        let (j0, j1, fy) = bracket(&self.speed_axis, speed.abs());
        let e = &self.efficiency;
        let low = e[i0][j0] * (1.0 - fy) + e[i0][j1] * fy;
        let high = e[i1][j0] * (1.0 - fy) + e[i1][j1] * fy;
        (low * (1.0 - fx) + high * fx).max(self.floor)
    }
}

/// Bracketing indices and interpolation weight, clamped to the axis ends.
fn bracket(axis: &[f64], x: f64) -> (usize, usize, f64) {
    let n = axis.len();
    if n == 1 || x <= axis[0] {
        return (0, 0, 0.0);
    }
    if x >= axis[n - 1] {
        return (n - 1, n - 1, 0.0);
    }
    let hi = axis.partition_point(|&a| a <= x);
    let lo = hi - 1;
    (lo, hi, (x - axis[lo]) / (axis[hi] - axis[lo]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrakeAllocation {
    /// Below this speed all braking goes to the friction brakes, m/s.
    pub regen_min_speed: f64,
    /// Largest braking force the motor can absorb, N.
    pub max_regen_force: f64,
}

/// Signed air speed along the heading: vehicle speed plus the head-wind
/// component.
pub fn relative_air_speed(sample: &TripSample) -> f64 {
    sample.speed + sample.wind_speed * (sample.wind_bearing - sample.bearing).cos()
}

/// Total force demand at the wheel, N.
pub fn road_load_force(params: &VehicleParams, sample: &TripSample) -> f64 {
    let m = params.mass_total;
    let alpha = sample.grade;
    let cr = params.rolling_at(sample.path_position, sample.speed, sample.tire_pressure);
    let grade_and_rolling = m * params.gravity * (alpha.sin() + cr * alpha.cos());
    let v_rel = relative_air_speed(sample);
    let aero = params.aero_coeff * v_rel * v_rel.abs();
    let inertia = params.mass_effective * sample.accel;
    grade_and_rolling + aero + inertia + cornering_force(params, sample)
}

/// `M^2 / (4 C_s rho^2) v^3`; vanishes on straight road.
pub fn cornering_force(params: &VehicleParams, sample: &TripSample) -> f64 {
    let rho = sample.curvature_radius;
    if rho.is_infinite() {
        return 0.0;
    }
    let m = params.mass_total;
    m * m / (4.0 * params.cornering_stiffness * rho * rho) * sample.speed.powi(3)
}

/// `(motor_force, friction_brake_force)`, summing to `force`.
pub fn split_brake_force(
    alloc: &BrakeAllocation,
    force: f64,
    speed: f64,
    _accel: f64,
) -> (f64, f64) {
    if force >= 0.0 {
        return (force, 0.0);
    }
    if speed < alloc.regen_min_speed {
        return (0.0, force);
    }
    let motor = force.max(-alloc.max_regen_force);
    (motor, force - motor)
}

/// Electrical traction power, kW. Positive when driving, negative when
/// regenerating.
pub fn traction_power(map: &MotorEfficiencyMap, motor_force: f64, speed: f64) -> f64 {
    let mech = motor_force * speed;
    let eta = map.efficiency_at(motor_force, speed, None);
    if mech >= 0.0 {
        mech / eta / 1000.0
    } else {
        mech * eta / 1000.0
    }
}

/// Battery-side power at one sample, kW: traction plus auxiliaries, with
/// net regeneration scaled by the charge efficiency.
pub fn battery_power(
    params: &VehicleParams,
    map: &MotorEfficiencyMap,
    alloc: &BrakeAllocation,
    curve: &ChargingCurve,
    sample: &TripSample,
) -> f64 {
    let force = road_load_force(params, sample);
    let (motor, _) = split_brake_force(alloc, force, sample.speed, sample.accel);
    let p = traction_power(map, motor, sample.speed) + params.aux_power;
    if p >= 0.0 {
        p
    } else {
        p * curve.charge_efficiency
    }
}

/// Trip energy drawn from the battery, kWh, by trapezoidal integration over
/// the profile. Never negative.
pub fn trip_energy(
    params: &VehicleParams,
    map: &MotorEfficiencyMap,
    alloc: &BrakeAllocation,
    curve: &ChargingCurve,
    profile: &TripProfile,
) -> Result<f64, TwinError> {
    profile.validate()?;
    let power: Vec<f64> = profile
        .samples
        .iter()
        .map(|s| battery_power(params, map, alloc, curve, s))
        .collect();
    let kws: f64 = profile
        .samples
        .windows(2)
        .zip(power.windows(2))
        .map(|(s, p)| 0.5 * (p[0] + p[1]) * (s[1].time - s[0].time))
        .sum();
    Ok((kws / 3600.0).max(0.0))
}
