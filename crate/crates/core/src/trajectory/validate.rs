//! Trajectory checks that share no code with the planner: own integrator,
//! own body corners, own polygon distance.

use std::fmt;

use serde::Serialize;

use super::{DepotMap, PlannerConfig, Point, TrajState, Trajectory, VehicleGeometry};

const DYNAMICS_TOL: f64 = 1e-6;
const LIMIT_TOL: f64 = 1e-9;
const SUBSTEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Empty,
    Time,
    Limits,
    Endpoint,
    Dynamics,
    Clearance,
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryViolation {
    pub kind: ViolationKind,
    /// State index where the check failed (the interval start for
    /// interval checks).
    pub index: usize,
    pub detail: String,
}

impl fmt::Display for TrajectoryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} at state {}: {}",
            self.kind, self.index, self.detail
        )
    }
}

fn fail(kind: ViolationKind, index: usize, detail: String) -> Result<(), TrajectoryViolation> {
    Err(TrajectoryViolation {
        kind,
        index,
        detail,
    })
}

/// `[x, y, heading, speed]` rate under the kinematic bicycle.
fn rate(z: [f64; 4], accel: f64, steer: f64, wheelbase: f64) -> [f64; 4] {
    [
        z[3] * z[2].cos(),
        z[3] * z[2].sin(),
        z[3] * steer.tan() / wheelbase,
        accel,
    ]
}

fn rk4(z: [f64; 4], accel: f64, steer: f64, wheelbase: f64, h: f64) -> [f64; 4] {
    let add = |a: [f64; 4], b: [f64; 4], s: f64| {
        [
            a[0] + s * b[0],
            a[1] + s * b[1],
            a[2] + s * b[2],
            a[3] + s * b[3],
        ]
    };
    let k1 = rate(z, accel, steer, wheelbase);
    let k2 = rate(add(z, k1, h / 2.0), accel, steer, wheelbase);
    let k3 = rate(add(z, k2, h / 2.0), accel, steer, wheelbase);
    let k4 = rate(add(z, k3, h), accel, steer, wheelbase);
    let mut out = z;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b) % std::f64::consts::TAU;
    d.abs().min(std::f64::consts::TAU - d.abs())
}

fn corners(g: &VehicleGeometry, x: f64, y: f64, heading: f64) -> [Point; 4] {
    let (u, v) = (heading.cos(), heading.sin());
    let f = g.length - g.rear_overhang;
    let h = g.width / 2.0;
    let at = |a: f64, b: f64| [x + a * u - b * v, y + a * v + b * u];
    [
        at(-g.rear_overhang, -h),
        at(f, -h),
        at(f, h),
        at(-g.rear_overhang, h),
    ]
}

/// Crossing-number point-in-polygon test.
fn inside(poly: &[Point], p: Point) -> bool {
    let mut odd = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + n - 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                odd = !odd;
            }
        }
    }
    odd
}

fn seg_point(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let l2 = dx * dx + dy * dy;
    let t = if l2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / l2).clamp(0.0, 1.0)
    };
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn seg_seg(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (o1, o2, o3, o4) = (
        orient(a, b, c),
        orient(a, b, d),
        orient(c, d, a),
        orient(c, d, b),
    );
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return 0.0;
    }
    seg_point(a, c, d)
        .min(seg_point(b, c, d))
        .min(seg_point(c, a, b))
        .min(seg_point(d, a, b))
}

/// Distance between two polygon regions: 0 if either contains a vertex of
/// the other or their edges cross, else the closest edge pair.
fn region_distance(p: &[Point], q: &[Point]) -> f64 {
    if p.iter().any(|&v| inside(q, v)) || q.iter().any(|&v| inside(p, v)) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for i in 0..p.len() {
        for j in 0..q.len() {
            let d = seg_seg(p[i], p[(i + 1) % p.len()], q[j], q[(j + 1) % q.len()]);
            best = best.min(d);
        }
    }
    best
}

/// Signed distance from `p` to the line through `a, b`, positive on the
/// left.
fn line_side(p: Point, a: Point, b: Point) -> f64 {
    orient(a, b, p) / (b[0] - a[0]).hypot(b[1] - a[1])
}

struct Scene<'a> {
    map: &'a DepotMap,
    geom: &'a VehicleGeometry,
    d_min: f64,
}

impl Scene<'_> {
    fn body_ok(
        &self,
        x: f64,
        y: f64,
        heading: f64,
        index: usize,
    ) -> Result<(), TrajectoryViolation> {
        let body = corners(self.geom, x, y, heading);
        for (k, obs) in self.map.obstacles.iter().enumerate() {
            let d = region_distance(&body, obs.vertices());
            if d < self.d_min - LIMIT_TOL {
                return fail(
                    ViolationKind::Clearance,
                    index,
                    format!("{d:.6} m from obstacle {k} at ({x:.3}, {y:.3})"),
                );
            }
        }
        // Inside a convex region, distance to its outside is the smallest
        // distance to an edge line, and over a convex body it is smallest at
        // a corner.
        for (k, poly) in self.map.boundary.iter().enumerate() {
            let v = poly.vertices();
            for c in body {
                let margin = (0..v.len())
                    .map(|i| line_side(c, v[i], v[(i + 1) % v.len()]))
                    .fold(f64::INFINITY, f64::min);
                if margin < self.d_min - LIMIT_TOL {
                    return fail(
                        ViolationKind::Boundary,
                        index,
                        format!("corner {margin:.6} m inside boundary {k} at ({x:.3}, {y:.3})"),
                    );
                }
            }
        }
        Ok(())
    }
}

/// Checks time order, actuator and speed limits, endpoints (rest at both,
/// start exact, goal within tolerance), the kinematics between consecutive
/// states, and clearance at every state and at ten integrated points
/// between each pair. Returns the first failure.
pub fn validate_trajectory(
    map: &DepotMap,
    geom: &VehicleGeometry,
    traj: &Trajectory,
    cfg: &PlannerConfig,
) -> Result<(), TrajectoryViolation> {
    let st: &[TrajState] = &traj.states;
    let Some(first) = st.first() else {
        return fail(ViolationKind::Empty, 0, "no states".into());
    };
    let last = st[st.len() - 1];
    if first.t != 0.0 {
        return fail(ViolationKind::Time, 0, format!("starts at t = {}", first.t));
    }
    for (k, w) in st.windows(2).enumerate() {
        if w[1].t <= w[0].t {
            return fail(
                ViolationKind::Time,
                k + 1,
                format!("t = {} after {}", w[1].t, w[0].t),
            );
        }
    }
    for (k, s) in st.iter().enumerate() {
        if s.steer.abs() > cfg.steer_max + LIMIT_TOL
            || s.speed.abs() > cfg.v_max + LIMIT_TOL
            || s.accel.abs() > cfg.a_max + LIMIT_TOL
        {
            return fail(
                ViolationKind::Limits,
                k,
                format!(
                    "steer {:.4}, speed {:.4}, accel {:.4}",
                    s.steer, s.speed, s.accel
                ),
            );
        }
    }
    let s0 = traj.start;
    if (first.x - s0.x).hypot(first.y - s0.y) > LIMIT_TOL
        || angle_diff(first.heading, s0.heading) > LIMIT_TOL
    {
        return fail(
            ViolationKind::Endpoint,
            0,
            "first state is not the start pose".into(),
        );
    }
    let g = traj.goal;
    if (last.x - g.x).hypot(last.y - g.y) > cfg.goal_position_tol
        || angle_diff(last.heading, g.heading) > cfg.goal_heading_tol
    {
        return fail(
            ViolationKind::Endpoint,
            st.len() - 1,
            "last state misses the goal".into(),
        );
    }
    if first.speed.abs() > LIMIT_TOL || last.speed.abs() > LIMIT_TOL {
        return fail(
            ViolationKind::Endpoint,
            0,
            "not at rest at both ends".into(),
        );
    }

    let scene = Scene {
        map,
        geom,
        d_min: cfg.d_min,
    };
    scene.body_ok(first.x, first.y, first.heading, 0)?;
    for (k, w) in st.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let h = (b.t - a.t) / SUBSTEPS as f64;
        let mut z = [a.x, a.y, a.heading, a.speed];
        for j in 1..=SUBSTEPS {
            z = rk4(z, a.accel, a.steer, geom.wheelbase, h);
            if j < SUBSTEPS {
                scene.body_ok(z[0], z[1], z[2], k)?;
            }
        }
        let res = (z[0] - b.x)
            .abs()
            .max((z[1] - b.y).abs())
            .max(angle_diff(z[2], b.heading))
            .max((z[3] - b.speed).abs());
        if res > DYNAMICS_TOL {
            return fail(ViolationKind::Dynamics, k, format!("residual {res:.3e}"));
        }
        scene.body_ok(b.x, b.y, b.heading, k + 1)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{plan, Polygon, Pose};

    fn setup() -> (DepotMap, VehicleGeometry, PlannerConfig, Trajectory) {
        let map = DepotMap {
            boundary: vec![Polygon::rect(-10.0, -15.0, 50.0, 15.0).unwrap()],
            ..Default::default()
        };
        let (g, cfg) = (VehicleGeometry::default(), PlannerConfig::default());
        let t = plan(
            &map,
            &g,
            Pose::new(0.0, 0.0, 0.0),
            Pose::new(25.0, 5.0, 0.0),
            &cfg,
        )
        .unwrap();
        (map, g, cfg, t)
    }

    #[test]
    fn planned_path_validates() {
        let (map, g, cfg, t) = setup();
        assert_eq!(validate_trajectory(&map, &g, &t, &cfg), Ok(()));
    }

    #[test]
    fn nudged_state_breaks_dynamics() {
        let (map, g, cfg, mut t) = setup();
        let k = t.states.len() / 2;
        t.states[k].y += 1e-4;
        let v = validate_trajectory(&map, &g, &t, &cfg).unwrap_err();
        assert_eq!(v.kind, ViolationKind::Dynamics);
        assert_eq!(v.index, k - 1);
    }

    #[test]
    fn new_obstacle_breaks_clearance() {
        let (mut map, g, cfg, t) = setup();
        let mid = t.states[t.states.len() / 2];
        map.obstacles
            .push(Polygon::rect(mid.x - 0.5, mid.y - 0.5, mid.x + 0.5, mid.y + 0.5).unwrap());
        let v = validate_trajectory(&map, &g, &t, &cfg).unwrap_err();
        assert_eq!(v.kind, ViolationKind::Clearance);
    }

    #[test]
    fn speeding_is_caught() {
        let (map, g, mut cfg, t) = setup();
        cfg.v_max = 1.0;
        assert_eq!(
            validate_trajectory(&map, &g, &t, &cfg).unwrap_err().kind,
            ViolationKind::Limits
        );
    }

    #[test]
    fn crossing_number_agrees_on_a_square() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(inside(&sq, [0.5, 0.5]));
        assert!(!inside(&sq, [1.5, 0.5]));
        assert_eq!(
            region_distance(&sq, &[[3.0, 0.0], [4.0, 0.0], [4.0, 1.0]]),
            2.0
        );
    }
}
