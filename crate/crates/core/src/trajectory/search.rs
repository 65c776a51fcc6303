//! Lattice search over (x, y, heading) cells with arc primitives in both
//! directions and analytic shots to the exact goal.
//!
//! Every arc is certified collision-free by Lipschitz marching: body
//! clearance changes by at most `1 + |kappa| reach` per metre of rear-axle
//! arc, so a pose with clearance `c` certifies the next `(c - d_min) / L`
//! metres without sampling them.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use super::dubins::shots;
use super::path::{advance, path_cost, simplify, timed_states, Segment};
use super::{
    polygon_distance, wrap_angle, DepotMap, PlannerConfig, Polygon, Pose, Trajectory,
    TrajectoryError, VehicleGeometry,
};

/// Marching steps shorter than this count as contact.
const MIN_STEP: f64 = 1e-4;
/// Clearance beyond this is not resolved exactly.
const CLEARANCE_CAP: f64 = 3.0;
/// Margin on `d_min` absorbing integration differences against the validator.
const SAFETY: f64 = 1e-6;

type Aabb = [f64; 4];

fn aabb(p: &Polygon) -> Aabb {
    p.vertices().iter().fold(
        [
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        ],
        |b, v| {
            [
                b[0].min(v[0]),
                b[1].min(v[1]),
                b[2].max(v[0]),
                b[3].max(v[1]),
            ]
        },
    )
}

/// Obstacles and walls with their boxes, for capped clearance queries.
pub(super) struct World {
    geom: VehicleGeometry,
    obstacles: Vec<(Polygon, Aabb)>,
}

impl World {
    pub(super) fn new(map: &DepotMap, geom: VehicleGeometry) -> Self {
        let obstacles = map.collision_set().into_iter().map(|p| {
            let b = aabb(&p);
            (p, b)
        });
        Self {
            geom,
            obstacles: obstacles.collect(),
        }
    }

    /// `min(cap, clearance)` of the body at `pose`.
    pub(super) fn clearance(&self, pose: Pose, cap: f64) -> f64 {
        let body = self.geom.body(pose);
        let b = aabb(&body);
        let mut best = cap;
        for (poly, o) in &self.obstacles {
            let gap_x = (o[0] - b[2]).max(b[0] - o[2]);
            let gap_y = (o[1] - b[3]).max(b[1] - o[3]);
            if gap_x.max(gap_y) >= best {
                continue;
            }
            best = best.min(polygon_distance(&body, poly));
            if best == 0.0 {
                break;
            }
        }
        best
    }

    /// Smallest distance from a point to any obstacle or wall.
    fn point_clearance(&self, p: [f64; 2]) -> f64 {
        self.obstacles
            .iter()
            .map(|(poly, _)| poly.point_distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Certifies the path from `start`; returns the end pose.
    pub(super) fn check(&self, start: Pose, segs: &[Segment], d_min: f64) -> Option<Pose> {
        let thr = d_min + SAFETY;
        let mut pose = start;
        for seg in segs {
            let kappa = seg.curvature(self.geom.wheelbase);
            let lip = 1.0 + kappa.abs() * self.geom.reach();
            let dir = seg.direction as f64;
            let mut s = 0.0;
            let mut here = pose;
            loop {
                let c = self.clearance(here, CLEARANCE_CAP);
                if c < thr {
                    return None;
                }
                let step = (c - thr) / lip;
                if s + step >= seg.length {
                    break;
                }
                if step < MIN_STEP {
                    return None;
                }
                s += step;
                here = advance(pose, kappa, dir * s);
            }
            pose = advance(pose, kappa, dir * seg.length);
        }
        (self.clearance(pose, CLEARANCE_CAP) >= thr).then_some(pose)
    }
}

/// Coarse free-space grid for the rear axle. A cell is blocked when no
/// rear-axle position inside it can keep the body `d_min` clear.
struct Grid {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    free: Vec<bool>,
}

impl Grid {
    fn new(world: &World, bbox: Aabb, cfg: &PlannerConfig) -> Self {
        let cell = cfg.cell;
        let nx = (((bbox[2] - bbox[0]) / cell).ceil() as usize).max(1);
        let ny = (((bbox[3] - bbox[1]) / cell).ceil() as usize).max(1);
        let half_diag = cell * std::f64::consts::FRAC_1_SQRT_2;
        let need = world.geom.inner_radius() + cfg.d_min - half_diag;
        let mut free = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let c = [
                    bbox[0] + (i as f64 + 0.5) * cell,
                    bbox[1] + (j as f64 + 0.5) * cell,
                ];
                free.push(world.point_clearance(c) >= need);
            }
        }
        Self {
            x0: bbox[0],
            y0: bbox[1],
            cell,
            nx,
            ny,
            free,
        }
    }

    fn index(&self, x: f64, y: f64) -> Option<usize> {
        let i = ((x - self.x0) / self.cell).floor();
        let j = ((y - self.y0) / self.cell).floor();
        (i >= 0.0 && j >= 0.0 && (i as usize) < self.nx && (j as usize) < self.ny)
            .then(|| j as usize * self.nx + i as usize)
    }

    /// 8-connected distances from `from` through free cells, in metres.
    fn distances(&self, from: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.free.len()];
        if !self.free[from] {
            return dist;
        }
        dist[from] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Open {
            f: 0.0,
            seq: from,
            node: from,
        });
        while let Some(Open { f, node, .. }) = heap.pop() {
            if f > dist[node] {
                continue;
            }
            let (i, j) = ((node % self.nx) as i64, (node / self.nx) as i64);
            for (di, dj) in [
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ] {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= self.nx as i64 || b >= self.ny as i64 {
                    continue;
                }
                let k = b as usize * self.nx + a as usize;
                if !self.free[k] {
                    continue;
                }
                let w = if di != 0 && dj != 0 {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                } * self.cell;
                if f + w < dist[k] {
                    dist[k] = f + w;
                    heap.push(Open {
                        f: f + w,
                        seq: k,
                        node: k,
                    });
                }
            }
        }
        dist
    }

    fn connected(&self, a: usize, b: usize) -> bool {
        let mut seen = vec![false; self.free.len()];
        let mut queue = VecDeque::from([a]);
        seen[a] = true;
        while let Some(n) = queue.pop_front() {
            if n == b {
                return true;
            }
            let (i, j) = ((n % self.nx) as i64, (n / self.nx) as i64);
            for di in -1..=1 {
                for dj in -1..=1 {
                    let (x, y) = (i + di, j + dj);
                    if x < 0 || y < 0 || x >= self.nx as i64 || y >= self.ny as i64 {
                        continue;
                    }
                    let k = y as usize * self.nx + x as usize;
                    if self.free[k] && !seen[k] {
                        seen[k] = true;
                        queue.push_back(k);
                    }
                }
            }
        }
        false
    }
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    seq: usize,
    node: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Node {
    pose: Pose,
    g: f64,
    parent: Option<usize>,
    seg: Option<Segment>,
}

fn search_box(map: &DepotMap, start: Pose, goal: Pose, geom: &VehicleGeometry) -> (Aabb, bool) {
    if !map.boundary.is_empty() {
        let b = map.boundary.iter().map(aabb).fold(
            [
                f64::NEG_INFINITY,
                f64::NEG_INFINITY,
                f64::INFINITY,
                f64::INFINITY,
            ],
            |a, b| {
                [
                    a[0].max(b[0]),
                    a[1].max(b[1]),
                    a[2].min(b[2]),
                    a[3].min(b[3]),
                ]
            },
        );
        return (b, true);
    }
    let pad = 2.0 * geom.reach() + 5.0;
    let mut b = [
        start.x.min(goal.x),
        start.y.min(goal.y),
        start.x.max(goal.x),
        start.y.max(goal.y),
    ];
    for o in &map.obstacles {
        let a = aabb(o);
        b = [
            b[0].min(a[0]),
            b[1].min(a[1]),
            b[2].max(a[2]),
            b[3].max(a[3]),
        ];
    }
    ([b[0] - pad, b[1] - pad, b[2] + pad, b[3] + pad], false)
}

fn at_goal(p: Pose, goal: Pose, cfg: &PlannerConfig) -> bool {
    (p.x - goal.x).hypot(p.y - goal.y) <= cfg.goal_position_tol
        && wrap_angle(p.heading - goal.heading).abs() <= cfg.goal_heading_tol
}

/// Shots tried per expansion, cheapest first.
const SHOTS_PER_EXPANSION: usize = 4;
/// Beyond this range from the goal, shots are tried on every tenth expansion.
const SHOT_RANGE: f64 = 40.0;

/// Plans a maneuver from rest at `start` to rest at `goal`.
///
/// Fails with [`TrajectoryError::ProvenBlocked`] when the coarse free-space
/// grid separates the two poses inside a bounded map, and with
/// [`TrajectoryError::Exhausted`] when the node budget runs out first.
pub fn plan(
    map: &DepotMap,
    geom: &VehicleGeometry,
    start: Pose,
    goal: Pose,
    cfg: &PlannerConfig,
) -> Result<Trajectory, TrajectoryError> {
    geom.validate()?;
    let world = World::new(map, *geom);
    let c0 = world.clearance(start, CLEARANCE_CAP);
    if c0 < cfg.d_min {
        return Err(TrajectoryError::StartInCollision(c0));
    }
    let c1 = world.clearance(goal, CLEARANCE_CAP);
    if c1 < cfg.d_min {
        return Err(TrajectoryError::GoalInCollision(c1));
    }
    if at_goal(start, goal, cfg) {
        return Ok(finish(&world, start, goal, Vec::new(), cfg));
    }

    let (bbox, bounded) = search_box(map, start, goal, geom);
    let grid = Grid::new(&world, bbox, cfg);
    let (gs, gg) = (grid.index(start.x, start.y), grid.index(goal.x, goal.y));
    if bounded {
        match (gs, gg) {
            (Some(a), Some(b)) if grid.connected(a, b) => {}
            _ => return Err(TrajectoryError::ProvenBlocked),
        }
    }
    let to_goal = gg.map(|g| grid.distances(g));
    let heuristic = |p: Pose| {
        let e = (p.x - goal.x).hypot(p.y - goal.y);
        let coarse = match (&to_goal, grid.index(p.x, p.y)) {
            (Some(d), Some(k)) if d[k].is_finite() => d[k] - 2.0 * grid.cell,
            _ => 0.0,
        };
        e.max(coarse)
    };

    let n = cfg.steer_samples.max(1);
    let steers: Vec<f64> = (0..n)
        .map(|k| {
            if n == 1 {
                0.0
            } else {
                -cfg.steer_max + 2.0 * cfg.steer_max * k as f64 / (n - 1) as f64
            }
        })
        .collect();
    let bins = cfg.heading_bins.max(1) as f64;
    let key = |p: Pose| {
        (
            (p.x / cfg.cell).floor() as i64,
            (p.y / cfg.cell).floor() as i64,
            ((wrap_angle(p.heading) + std::f64::consts::PI) / std::f64::consts::TAU * bins).floor()
                as i64
                % bins as i64,
        )
    };

    let mut nodes = vec![Node {
        pose: start,
        g: 0.0,
        parent: None,
        seg: None,
    }];
    let mut best_g: HashMap<(i64, i64, i64), f64> = HashMap::from([(key(start), 0.0)]);
    let mut closed = std::collections::HashSet::new();
    let mut open = BinaryHeap::from([Open {
        f: heuristic(start),
        seq: 0,
        node: 0,
    }]);
    let mut expanded = 0;

    while let Some(Open { node, .. }) = open.pop() {
        let k = key(nodes[node].pose);
        if !closed.insert(k) {
            continue;
        }
        expanded += 1;
        if expanded > cfg.node_budget {
            break;
        }
        let pose = nodes[node].pose;
        let prev = nodes[node].seg;
        let chain = || {
            let mut segs = Vec::new();
            let mut at = Some(node);
            while let Some(i) = at {
                segs.extend(nodes[i].seg);
                at = nodes[i].parent;
            }
            segs.reverse();
            segs
        };
        if at_goal(pose, goal, cfg) {
            return Ok(finish(&world, start, goal, chain(), cfg));
        }

        let dist = (pose.x - goal.x).hypot(pose.y - goal.y);
        if dist <= SHOT_RANGE || expanded % 10 == 1 {
            let mut cands = shots(pose, goal, cfg.steer_max, geom.wheelbase);
            let lead: Vec<Segment> = prev.into_iter().collect();
            let cost = |c: &Vec<Segment>| path_cost(&[lead.as_slice(), c].concat(), cfg);
            cands.sort_by(|a, b| cost(a).total_cmp(&cost(b)));
            for c in cands.into_iter().take(SHOTS_PER_EXPANSION) {
                if world.check(pose, &c, cfg.d_min).is_some() {
                    let mut segs = chain();
                    segs.extend(c);
                    return Ok(finish(&world, start, goal, segs, cfg));
                }
            }
        }

        for dir in [1i8, -1] {
            for &steer in &steers {
                let seg = Segment {
                    direction: dir,
                    steer,
                    length: cfg.arc_length,
                };
                let Some(end) = world.check(pose, &[seg], cfg.d_min) else {
                    continue;
                };
                let k = key(end);
                if closed.contains(&k) {
                    continue;
                }
                let step = match prev {
                    Some(p) => path_cost(&[p, seg], cfg) - p.length,
                    None => seg.length,
                };
                let g = nodes[node].g + step;
                if best_g.get(&k).is_some_and(|&b| b <= g) {
                    continue;
                }
                best_g.insert(k, g);
                let id = nodes.len();
                nodes.push(Node {
                    pose: end,
                    g,
                    parent: Some(node),
                    seg: Some(seg),
                });
                open.push(Open {
                    f: g + heuristic(end),
                    seq: id,
                    node: id,
                });
            }
        }
    }
    let grid_says = match (gs, gg) {
        (Some(a), Some(b)) => grid.connected(a, b),
        _ => true,
    };
    if bounded && !grid_says {
        return Err(TrajectoryError::ProvenBlocked);
    }
    Err(TrajectoryError::Exhausted {
        expanded: expanded.min(cfg.node_budget),
    })
}

/// Times the path and measures its clearance certificate.
fn finish(
    world: &World,
    start: Pose,
    goal: Pose,
    segs: Vec<Segment>,
    cfg: &PlannerConfig,
) -> Trajectory {
    let segments = simplify(&segs);
    let states = timed_states(start, &segments, world.geom.wheelbase, cfg);
    let mut cert = states
        .iter()
        .map(|s| world.clearance(s.pose(), f64::INFINITY))
        .fold(f64::INFINITY, f64::min);
    for w in states.windows(2) {
        let (a, b) = (w[0], w[1]);
        let ds = 0.5 * (a.speed + b.speed) * (b.t - a.t);
        let kappa = a.steer.tan() / world.geom.wheelbase;
        for j in 1..10 {
            let p = advance(a.pose(), kappa, ds * j as f64 / 10.0);
            cert = cert.min(world.clearance(p, f64::INFINITY));
        }
    }
    Trajectory {
        start,
        goal,
        total_time: states.last().map_or(0.0, |s| s.t),
        total_cost: path_cost(&segments, cfg),
        clearance_certificate: cert,
        states,
        segments,
    }
}
