//! Piecewise-linear charging power as a function of SOC, integrated in
//! closed form.
//!
//! On a segment where `P(soc) = p0 + m (soc - s0)` the SOC obeys
//! `d soc / dt = k P(soc)` with `k = efficiency / capacity`. For `m = 0`
//! the solution is linear in time; otherwise `P(t) = P(0) exp(m k t)` and
//! `soc = s + (P(t) - P(0)) / m`. Crossing a breakpoint restarts the
//! recursion on the next segment, so integration over any number of pieces
//! is exact up to floating point.

use serde::{Deserialize, Serialize};

use super::TwinError;

const SLOPE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingCurve {
    /// `(soc, kW)` pairs, strictly increasing in SOC, spanning `[0, 1]`.
    pub breakpoints: Vec<(f64, f64)>,
    pub charge_efficiency: f64,
}

impl ChargingCurve {
    /// Ramp to full power by 20 %, flat to 80 %, taper to 10 % at full.
    pub fn default_for(max_power: f64) -> Self {
        Self {
            breakpoints: vec![
                (0.0, 0.5 * max_power),
                (0.2, max_power),
                (0.8, max_power),
                (1.0, 0.1 * max_power),
            ],
            charge_efficiency: 1.0,
        }
    }

    pub fn flat(power: f64) -> Self {
        Self {
            breakpoints: vec![(0.0, power), (1.0, power)],
            charge_efficiency: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), TwinError> {
        let bad = |why: &str| Err(TwinError::InvalidCurve(why.to_string()));
        let bp = &self.breakpoints;
        if bp.len() < 2 {
            return bad("need at least two breakpoints");
        }
        if bp[0].0 != 0.0 || bp[bp.len() - 1].0 != 1.0 {
            return bad("breakpoints must span soc 0 to 1");
        }
        if bp.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return bad("soc breakpoints must be strictly increasing");
        }
        for &(soc, p) in bp {
            if !(p >= 0.0) || (p == 0.0 && soc != 1.0) {
                return bad("power must be positive below soc 1");
            }
        }
        let mut descending = false;
        for w in bp.windows(2) {
            if w[1].1 < w[0].1 {
                descending = true;
            } else if descending && w[1].1 > w[0].1 {
                return bad("curve must be single-peaked");
            }
        }
        if !(self.charge_efficiency > 0.0 && self.charge_efficiency <= 1.0) {
            return bad("charge_efficiency must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn peak_power(&self) -> f64 {
        self.breakpoints.iter().map(|b| b.1).fold(0.0, f64::max)
    }

    pub fn power_at(&self, soc: f64) -> f64 {
        let soc = soc.clamp(0.0, 1.0);
        let i = self.segment_forward(soc);
        let (s0, p0) = self.breakpoints[i];
        p0 + self.slope(i) * (soc - s0)
    }

    /// Same curve with power limited to `max_power`, crossing points inserted
    /// so the result stays piecewise linear.
    pub fn clipped(&self, max_power: f64) -> Self {
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(self.breakpoints.len() + 2);
        let mut push = |pt: (f64, f64)| {
            if pts.last().is_none_or(|l: &(f64, f64)| pt.0 > l.0) {
                pts.push(pt);
            }
        };
        for w in self.breakpoints.windows(2) {
            let (s0, p0) = w[0];
            let (s1, p1) = w[1];
            push((s0, p0.min(max_power)));
            if (p0 - max_power) * (p1 - max_power) < 0.0 {
                let s = s0 + (max_power - p0) * (s1 - s0) / (p1 - p0);
                push((s, max_power));
            }
        }
        let last = *self.breakpoints.last().expect("validated curve");
        push((last.0, last.1.min(max_power)));
        Self {
            breakpoints: pts,
            charge_efficiency: self.charge_efficiency,
        }
    }

    fn slope(&self, i: usize) -> f64 {
        let (s0, p0) = self.breakpoints[i];
        let (s1, p1) = self.breakpoints[i + 1];
        (p1 - p0) / (s1 - s0)
    }

    /// Segment index containing `soc`, choosing the right-hand piece at a
    /// breakpoint.
    fn segment_forward(&self, soc: f64) -> usize {
        let n = self.breakpoints.len() - 1;
        (0..n)
            .find(|&i| soc < self.breakpoints[i + 1].0)
            .unwrap_or(n - 1)
    }

    /// Segment index containing `soc`, choosing the left-hand piece at a
    /// breakpoint.
    fn segment_backward(&self, soc: f64) -> usize {
        let n = self.breakpoints.len() - 1;
        (0..n)
            .find(|&i| soc <= self.breakpoints[i + 1].0)
            .unwrap_or(n - 1)
    }

    fn rate(&self, capacity: f64) -> f64 {
        self.charge_efficiency / capacity
    }

    /// SOC after charging for `minutes` from `soc_from`, capped at 1.
    pub fn charge_added(&self, capacity: f64, soc_from: f64, minutes: f64) -> f64 {
        let k = self.rate(capacity);
        let mut soc = soc_from.clamp(0.0, 1.0);
        let mut hours = minutes.max(0.0) / 60.0;
        while hours > 0.0 && soc < 1.0 {
            let i = self.segment_forward(soc);
            let (s0, p0) = self.breakpoints[i];
            let s1 = self.breakpoints[i + 1].0;
            let m = self.slope(i);
            let p = p0 + m * (soc - s0);
            if p <= 0.0 {
                break;
            }
            let to_end = if m.abs() < SLOPE_EPS {
                (s1 - soc) / (k * p)
            } else {
                let p_end = p0 + m * (s1 - s0);
                if p_end <= 0.0 {
                    f64::INFINITY
                } else {
                    (p_end / p).ln() / (m * k)
                }
            };
            if hours < to_end {
                soc = if m.abs() < SLOPE_EPS {
                    soc + k * p * hours
                } else {
                    soc + p * ((m * k * hours).exp() - 1.0) / m
                };
                soc = soc.min(s1);
                break;
            }
            hours -= to_end;
            soc = s1;
        }
        soc.min(1.0)
    }

    /// Minutes needed to go from `soc_from` to `soc_to`; infinite when the
    /// target is only approached asymptotically.
    pub fn time_to_charge(
        &self,
        capacity: f64,
        soc_from: f64,
        soc_to: f64,
    ) -> Result<f64, TwinError> {
        if soc_to < soc_from {
            return Err(TwinError::Discharging {
                from: soc_from,
                to: soc_to,
            });
        }
        if soc_to > 1.0 {
            return Err(TwinError::BeyondFull(soc_to));
        }
        let k = self.rate(capacity);
        let mut soc = soc_from.max(0.0);
        let mut hours = 0.0;
        while soc < soc_to {
            let i = self.segment_forward(soc);
            let (s0, p0) = self.breakpoints[i];
            let s1 = self.breakpoints[i + 1].0;
            let m = self.slope(i);
            let p = p0 + m * (soc - s0);
            let target = soc_to.min(s1);
            let p_target = p0 + m * (target - s0);
            if p <= 0.0 || p_target <= 0.0 {
                return Ok(f64::INFINITY);
            }
            hours += if m.abs() < SLOPE_EPS {
                (target - soc) / (k * p)
            } else {
                (p_target / p).ln() / (m * k)
            };
            soc = target;
        }
        Ok(hours * 60.0)
    }

    /// The SOC from which charging for `minutes` ends exactly at `soc_to`,
    /// or 0 if even an empty battery cannot get there in time.
    pub fn soc_before(&self, capacity: f64, soc_to: f64, minutes: f64) -> f64 {
        let k = self.rate(capacity);
        let mut soc = soc_to.clamp(0.0, 1.0);
        let mut hours = minutes.max(0.0) / 60.0;
        while hours > 0.0 && soc > 0.0 {
            let i = self.segment_backward(soc);
            let (s0, p0) = self.breakpoints[i];
            let m = self.slope(i);
            let p = p0 + m * (soc - s0);
            if p <= 0.0 {
                // Full-charge equilibrium: nothing below reaches it.
                return soc;
            }
            let to_start = if m.abs() < SLOPE_EPS {
                (soc - s0) / (k * p)
            } else {
                (p / p0).ln() / (m * k)
            };
            if hours < to_start {
                soc = if m.abs() < SLOPE_EPS {
                    soc - k * p * hours
                } else {
                    soc + p * ((-m * k * hours).exp() - 1.0) / m
                };
                return soc.max(s0);
            }
            hours -= to_start;
            soc = s0;
        }
        soc.max(0.0)
    }
}
