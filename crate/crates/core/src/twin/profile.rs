use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::TwinError;

/// One telemetry row of a trip, sampled at time index `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripSample {
    #[serde(rename = "t_s")]
    pub time: f64,
    #[serde(rename = "v_mps")]
    pub speed: f64,
    #[serde(rename = "a_mps2")]
    pub accel: f64,
    #[serde(rename = "bearing_rad")]
    pub bearing: f64,
    #[serde(rename = "s_m")]
    pub path_position: f64,
    #[serde(rename = "grade_rad")]
    pub grade: f64,
    /// `f64::INFINITY` on straight road.
    #[serde(rename = "curve_radius_m")]
    pub curvature_radius: f64,
    #[serde(rename = "wind_mps")]
    pub wind_speed: f64,
    #[serde(rename = "wind_bearing_rad")]
    pub wind_bearing: f64,
    #[serde(rename = "tire_kpa")]
    pub tire_pressure: f64,
}

impl TripSample {
    /// Flat, straight, windless road at the given kinematics.
    pub fn level(time: f64, speed: f64, accel: f64) -> Self {
        Self {
            time,
            speed,
            accel,
            bearing: 0.0,
            path_position: 0.0,
            grade: 0.0,
            curvature_radius: f64::INFINITY,
            wind_speed: 0.0,
            wind_bearing: 0.0,
            tire_pressure: 800.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TripProfile {
    pub samples: Vec<TripSample>,
}

impl TripProfile {
    pub fn new(samples: Vec<TripSample>) -> Self {
        Self { samples }
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.time - a.time,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), TwinError> {
        if self.samples.is_empty() {
            return Err(TwinError::EmptyProfile);
        }
        for (k, w) in self.samples.windows(2).enumerate() {
            if !(w[1].time > w[0].time) {
                return Err(TwinError::InvalidProfile(format!(
                    "time not strictly increasing at row {}",
                    k + 1
                )));
            }
        }
        for (k, s) in self.samples.iter().enumerate() {
            if !(s.speed >= 0.0) {
                return Err(TwinError::InvalidProfile(format!(
                    "negative speed at row {k}"
                )));
            }
            if !(s.curvature_radius > 0.0) {
                return Err(TwinError::InvalidProfile(format!(
                    "curvature radius must be positive or inf at row {k}"
                )));
            }
        }
        Ok(())
    }

    /// Reads the ten-column CSV format (`curve_radius_m` may be `inf`).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, TwinError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let samples = rdr
            .deserialize()
            .collect::<Result<Vec<TripSample>, _>>()
            .map_err(|e| TwinError::InvalidProfile(e.to_string()))?;
        let p = Self { samples };
        p.validate()?;
        Ok(p)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<(), TwinError> {
        let mut w = csv::Writer::from_writer(writer);
        for s in &self.samples {
            w.serialize(s)
                .map_err(|e| TwinError::InvalidProfile(e.to_string()))?;
        }
        w.flush()
            .map_err(|e| TwinError::InvalidProfile(e.to_string()))?;
        Ok(())
    }
}
