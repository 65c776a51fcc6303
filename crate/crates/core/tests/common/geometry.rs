//! Brute-force geometry oracles.

use bebfleet::trajectory::{Point, Polygon};
use rand::Rng;

/// Convex hull (monotone chain), counter-clockwise.
pub fn hull(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let cross = |o: Point, a: Point, b: Point| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 1e-9 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 1e-9 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

pub fn random_convex(r: &mut impl Rng) -> Polygon {
    loop {
        let (cx, cy) = (r.random_range(-6.0..6.0), r.random_range(-6.0..6.0));
        let scale = r.random_range(0.3..3.0);
        let pts = (0..r.random_range(3..9))
            .map(|_| {
                [
                    cx + scale * r.random_range(-1.0..1.0),
                    cy + scale * r.random_range(-1.0..1.0),
                ]
            })
            .collect();
        if let Ok(p) = Polygon::new(hull(pts)) {
            return p;
        }
    }
}

pub fn oracle_contains(poly: &[Point], p: Point) -> bool {
    let mut odd = false;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        if (a[1] > p[1]) != (b[1] > p[1])
            && p[0] < a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0])
        {
            odd = !odd;
        }
    }
    odd
}

/// Separation as the smallest edge-pair distance, each pair minimised by a
/// 64-point scan over one edge and nested ternary search over both.
pub fn oracle_distance(a: &Polygon, b: &Polygon) -> f64 {
    let (va, vb) = (a.vertices(), b.vertices());
    if va.iter().any(|&v| oracle_contains(vb, v)) || vb.iter().any(|&v| oracle_contains(va, v)) {
        return 0.0;
    }
    let lerp = |p: Point, q: Point, t: f64| [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
    let dist = |p: Point, q: Point| (p[0] - q[0]).hypot(p[1] - q[1]);
    let ternary = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64| {
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..60 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if f(m1) < f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        f(0.5 * (lo + hi))
    };
    let mut best = f64::INFINITY;
    for i in 0..va.len() {
        let (p, q) = (va[i], va[(i + 1) % va.len()]);
        for j in 0..vb.len() {
            let (c, d) = (vb[j], vb[(j + 1) % vb.len()]);
            let inner = |s: f64| {
                let x = lerp(p, q, s);
                ternary(&|t| dist(x, lerp(c, d, t)), 0.0, 1.0)
            };
            // Distance between two segments is convex in (s, t), so a coarse
            // scan brackets the minimum.
            let n = 64;
            let scan: Vec<f64> = (0..=n).map(|u| inner(u as f64 / n as f64)).collect();
            let k = (0..=n)
                .min_by(|&u, &v| scan[u].total_cmp(&scan[v]))
                .unwrap();
            let lo = (k.max(1) - 1) as f64 / n as f64;
            let hi = ((k + 1).min(n)) as f64 / n as f64;
            best = best.min(ternary(&inner, lo, hi));
            if best == 0.0 {
                return 0.0;
            }
        }
    }
    // Crossing edges with no contained vertex come out numerically zero.
    if best < 1e-9 {
        0.0
    } else {
        best
    }
}
