//! Constant-curvature path pieces and their time parameterisation.

use serde::{Deserialize, Serialize};

use super::{wrap_angle, PlannerConfig, Pose, TrajState};

/// A constant-steer piece driven in one direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// `1` forward, `-1` reverse.
    pub direction: i8,
    pub steer: f64,
    /// Arc length, non-negative.
    pub length: f64,
}

impl Segment {
    pub fn curvature(&self, wheelbase: f64) -> f64 {
        self.steer.tan() / wheelbase
    }
}

/// Exact pose after driving signed arc `ds` at curvature `kappa`.
pub fn advance(p: Pose, kappa: f64, ds: f64) -> Pose {
    let (s0, c0) = p.heading.sin_cos();
    let dth = kappa * ds;
    if dth.abs() < 1e-9 {
        // Second-order expansion keeps the small-angle case smooth.
        let (x, y) = (ds * (c0 - 0.5 * dth * s0), ds * (s0 + 0.5 * dth * c0));
        return Pose::new(p.x + x, p.y + y, wrap_angle(p.heading + dth));
    }
    let h1 = p.heading + dth;
    let (s1, c1) = h1.sin_cos();
    Pose::new(
        p.x + (s1 - s0) / kappa,
        p.y - (c1 - c0) / kappa,
        wrap_angle(h1),
    )
}

pub fn end_pose(start: Pose, segs: &[Segment], wheelbase: f64) -> Pose {
    segs.iter().fold(start, |p, s| {
        advance(p, s.curvature(wheelbase), s.direction as f64 * s.length)
    })
}

/// Path cost: length, a penalty per reversal and per unit of steer change
/// between consecutive pieces.
pub fn path_cost(segs: &[Segment], cfg: &PlannerConfig) -> f64 {
    let len: f64 = segs.iter().map(|s| s.length).sum();
    let turns: f64 = segs
        .windows(2)
        .map(|w| {
            let rev = if w[0].direction != w[1].direction {
                cfg.reversal_penalty
            } else {
                0.0
            };
            rev + cfg.steer_change_penalty * (w[0].steer - w[1].steer).abs()
        })
        .sum();
    len + turns
}

/// Merges adjacent pieces with equal direction and steer, dropping empty ones.
pub fn simplify(segs: &[Segment]) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    for s in segs.iter().filter(|s| s.length > 1e-12) {
        match out.last_mut() {
            Some(l) if l.direction == s.direction && l.steer == s.steer => l.length += s.length,
            _ => out.push(*s),
        }
    }
    out
}

/// Trapezoidal speed profile over one run of arc length `len`: rest to rest,
/// peak `min(v_max, sqrt(a len))`.
struct Profile {
    a: f64,
    v_peak: f64,
    s_acc: f64,
    len: f64,
}

impl Profile {
    fn new(len: f64, v_max: f64, a: f64) -> Self {
        let v_peak = v_max.min((a * len).sqrt());
        Self {
            a,
            v_peak,
            s_acc: v_peak * v_peak / (2.0 * a),
            len,
        }
    }

    fn t_acc(&self) -> f64 {
        self.v_peak / self.a
    }

    fn duration(&self) -> f64 {
        2.0 * self.t_acc() + (self.len - 2.0 * self.s_acc) / self.v_peak
    }

    /// Time and speed at arc position `s`.
    fn at(&self, s: f64) -> (f64, f64) {
        if s <= self.s_acc {
            let v = (2.0 * self.a * s).sqrt();
            (v / self.a, v)
        } else if s < self.len - self.s_acc {
            (self.t_acc() + (s - self.s_acc) / self.v_peak, self.v_peak)
        } else {
            let rest = (self.len - s).max(0.0);
            let v = (2.0 * self.a * rest).sqrt();
            (self.duration() - v / self.a, v)
        }
    }

    /// Acceleration magnitude (signed by phase) on `[s0, s1]`.
    fn accel(&self, s0: f64, s1: f64) -> f64 {
        let mid = 0.5 * (s0 + s1);
        if mid < self.s_acc {
            self.a
        } else if mid > self.len - self.s_acc {
            -self.a
        } else {
            0.0
        }
    }
}

/// Samples a piecewise path into states no more than `sample_spacing` apart,
/// with a state at every piece and profile-phase boundary so that steer and
/// acceleration are constant between consecutive states. Every direction
/// run starts and ends at rest.
pub fn timed_states(
    start: Pose,
    segs: &[Segment],
    wheelbase: f64,
    cfg: &PlannerConfig,
) -> Vec<TrajState> {
    let mut states = vec![TrajState {
        t: 0.0,
        x: start.x,
        y: start.y,
        heading: start.heading,
        speed: 0.0,
        accel: 0.0,
        steer: segs.first().map_or(0.0, |s| s.steer),
    }];
    let mut pose = start;
    let mut t0 = 0.0;
    let mut i = 0;
    while i < segs.len() {
        let dir = segs[i].direction;
        let mut j = i;
        while j < segs.len() && segs[j].direction == dir {
            j += 1;
        }
        let run = &segs[i..j];
        let len: f64 = run.iter().map(|s| s.length).sum();
        let prof = Profile::new(len, cfg.v_max, cfg.a_max);
        let mut breaks = vec![prof.s_acc, len - prof.s_acc];
        let mut acc = 0.0;
        for s in run {
            acc += s.length;
            breaks.push(acc);
        }

        let mut base = 0.0;
        for seg in run {
            let kappa = seg.curvature(wheelbase);
            let lo = base;
            let hi = base + seg.length;
            let mut marks: Vec<f64> = breaks
                .iter()
                .copied()
                .filter(|&b| b > lo + 1e-12 && b < hi - 1e-12)
                .collect();
            marks.push(hi);
            let mut prev = lo;
            for &m in &marks {
                let pieces = (((m - prev) / cfg.sample_spacing).ceil() as usize).max(1);
                for k in 1..=pieces {
                    let s_here = if k == pieces {
                        m
                    } else {
                        prev + (m - prev) * k as f64 / pieces as f64
                    };
                    let s_prev = prev + (m - prev) * (k - 1) as f64 / pieces as f64;
                    let last = states.last_mut().expect("seeded with the start state");
                    last.accel = dir as f64 * prof.accel(s_prev, s_here);
                    last.steer = seg.steer;
                    pose = advance(pose, kappa, dir as f64 * (s_here - s_prev));
                    let (t, v) = prof.at(s_here);
                    states.push(TrajState {
                        t: t0 + t,
                        x: pose.x,
                        y: pose.y,
                        heading: pose.heading,
                        speed: dir as f64 * v,
                        accel: 0.0,
                        steer: seg.steer,
                    });
                }
                prev = m;
            }
            base = hi;
        }
        let end = states.last_mut().expect("non-empty");
        end.speed = 0.0;
        t0 += prof.duration();
        end.t = t0;
        i = j;
    }
    states
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_circle_returns_home() {
        let r = 5.0;
        let seg = Segment {
            direction: 1,
            steer: (6.0f64 / r).atan(),
            length: std::f64::consts::TAU * r,
        };
        let p = end_pose(Pose::new(1.0, 2.0, 0.3), &[seg], 6.0);
        assert!((p.x - 1.0).abs() < 1e-9 && (p.y - 2.0).abs() < 1e-9);
        assert!((wrap_angle(p.heading - 0.3)).abs() < 1e-9);
    }

    #[test]
    fn reverse_undoes_forward() {
        let f = Segment {
            direction: 1,
            steer: 0.4,
            length: 3.0,
        };
        let b = Segment { direction: -1, ..f };
        let p = end_pose(Pose::new(0.0, 0.0, 1.0), &[f, b], 6.0);
        assert!(p.x.abs() < 1e-12 && p.y.abs() < 1e-12 && (p.heading - 1.0).abs() < 1e-12);
    }

    #[test]
    fn short_run_is_triangular() {
        let cfg = PlannerConfig::default();
        let seg = Segment {
            direction: 1,
            steer: 0.0,
            length: 2.0,
        };
        let st = timed_states(Pose::default(), &[seg], 6.0, &cfg);
        let peak = st.iter().map(|s| s.speed).fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-12);
        assert!((st.last().unwrap().t - 4.0).abs() < 1e-12);
        assert!(st
            .windows(2)
            .all(|w| (w[1].x - w[0].x) <= cfg.sample_spacing + 1e-12));
    }

    #[test]
    fn reversal_stops_the_bus() {
        let cfg = PlannerConfig::default();
        let segs = [
            Segment {
                direction: 1,
                steer: 0.0,
                length: 10.0,
            },
            Segment {
                direction: -1,
                steer: 0.2,
                length: 5.0,
            },
        ];
        let st = timed_states(Pose::default(), &segs, 6.0, &cfg);
        let turn = st.iter().position(|s| (s.x - 10.0).abs() < 1e-12).unwrap();
        assert_eq!(st[turn].speed, 0.0);
        assert!(st[turn].accel < 0.0 && st[turn].steer == 0.2);
        assert!(st[turn + 1].speed < 0.0);
    }
}
