//! Least-squares identification of the road-load coefficients from logged
//! wheel force.
//!
//! With the vehicle mass known (weighbridge), the force model is linear in
//! four lumped parameters:
//!
//! ```text
//! F - M g sin(alpha) = M~ * a + (M g C_r) * cos(alpha)
//!                    + C_a * v_rel |v_rel| + (M^2 / 4 C_s) * v^3 / rho^2
//! ```

use nalgebra::{DMatrix, DVector};

use super::profile::{TripProfile, TripSample};
use super::road_load::{relative_air_speed, VehicleParams};
use super::TwinError;

pub const PARAMETER_NAMES: [&str; 4] = [
    "mass_effective",
    "rolling_force",
    "aero_coeff",
    "cornering_coeff",
];

/// Fitted lumped coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadLoadFit {
    /// `M~`, kg.
    pub mass_effective: f64,
    /// `M g C_r`, N.
    pub rolling_force: f64,
    /// `C_a`, kg/m.
    pub aero_coeff: f64,
    /// `M^2 / (4 C_s)`.
    pub cornering_coeff: f64,
    pub residual_rms: f64,
    pub samples: usize,
}

impl RoadLoadFit {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.mass_effective,
            self.rolling_force,
            self.aero_coeff,
            self.cornering_coeff,
        ]
    }

    /// Writes the fitted coefficients back into physical parameters.
    pub fn apply_to(&self, base: &VehicleParams) -> VehicleParams {
        let m = base.mass_total;
        VehicleParams {
            mass_effective: self.mass_effective,
            rolling_coeff: self.rolling_force / (m * base.gravity),
            aero_coeff: self.aero_coeff,
            cornering_stiffness: m * m / (4.0 * self.cornering_coeff),
            ..base.clone()
        }
    }
}

/// The lumped parameters of `params`, in [`PARAMETER_NAMES`] order.
pub fn lumped_parameters(params: &VehicleParams) -> [f64; 4] {
    let m = params.mass_total;
    [
        params.mass_effective,
        m * params.gravity * params.rolling_coeff,
        params.aero_coeff,
        m * m / (4.0 * params.cornering_stiffness),
    ]
}

fn regressors(s: &TripSample) -> [f64; 4] {
    let v_rel = relative_air_speed(s);
    let moving = if s.speed > 0.0 { 1.0 } else { 0.0 };
    let curvature = if s.curvature_radius.is_infinite() {
        0.0
    } else {
        s.speed.powi(3) / (s.curvature_radius * s.curvature_radius)
    };
    [
        s.accel,
        moving * s.grade.cos(),
        v_rel * v_rel.abs(),
        curvature,
    ]
}

/// Ordinary least squares over all samples of all logs. `mass_total` and
/// `gravity` are taken as known.
pub fn fit_road_load(
    logs: &[(TripProfile, Vec<f64>)],
    mass_total: f64,
    gravity: f64,
) -> Result<RoadLoadFit, TwinError> {
    let mut rows: Vec<[f64; 4]> = Vec::new();
    let mut target = Vec::new();
    for (profile, forces) in logs {
        if forces.len() != profile.samples.len() {
            return Err(TwinError::Fit(format!(
                "{} force values for {} samples",
                forces.len(),
                profile.samples.len()
            )));
        }
        for (s, &f) in profile.samples.iter().zip(forces) {
            rows.push(regressors(s));
            target.push(f - mass_total * gravity * s.grade.sin());
        }
    }
    let n = rows.len();
    if n < 4 {
        return Err(TwinError::Fit(format!("need at least 4 samples, got {n}")));
    }

    let x = DMatrix::from_fn(n, 4, |i, j| rows[i][j]);
    let y = DVector::from_vec(target);

    // Column equilibration keeps the rank test meaningful across units.
    let scale: Vec<f64> = (0..4).map(|j| x.column(j).norm()).collect();
    let zero_cols: Vec<&str> = (0..4)
        .filter(|&j| scale[j] == 0.0)
        .map(|j| PARAMETER_NAMES[j])
        .collect();
    if !zero_cols.is_empty() {
        return Err(TwinError::RankDeficient(
            zero_cols.iter().map(|s| s.to_string()).collect(),
        ));
    }
    let xs = DMatrix::from_fn(n, 4, |i, j| x[(i, j)] / scale[j]);
    let svd = xs.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut deficient = Vec::new();
    for (k, &sv) in svd.singular_values.iter().enumerate() {
        if sv <= 1e-9 * smax {
            for j in 0..4 {
                if v_t[(k, j)].abs() > 0.1 && !deficient.contains(&PARAMETER_NAMES[j].to_string()) {
                    deficient.push(PARAMETER_NAMES[j].to_string());
                }
            }
        }
    }
    if !deficient.is_empty() {
        return Err(TwinError::RankDeficient(deficient));
    }
    let theta_s = svd
        .solve(&y, 0.0)
        .map_err(|e| TwinError::Fit(e.to_string()))?;
    let theta: Vec<f64> = (0..4).map(|j| theta_s[j] / scale[j]).collect();
    let residual = &y - &x * DVector::from_column_slice(&theta);
    let residual_rms = (residual.norm_squared() / n as f64).sqrt();

    Ok(RoadLoadFit {
        mass_effective: theta[0],
        rolling_force: theta[1],
        aero_coeff: theta[2],
        cornering_coeff: theta[3],
        residual_rms,
        samples: n,
    })
}
