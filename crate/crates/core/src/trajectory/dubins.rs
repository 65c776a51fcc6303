//! Shortest bounded-curvature paths between poses (forward-only words), and
//! their reverse-driven mirror. Each candidate is checked by integrating it;
//! words whose endpoint misses the goal are discarded.

use std::f64::consts::{PI, TAU};

use super::path::{end_pose, Segment};
use super::{wrap_angle, Pose};

const END_EPS: f64 = 1e-6;

fn m2p(a: f64) -> f64 {
    a.rem_euclid(TAU)
}

#[derive(Clone, Copy)]
enum Turn {
    L,
    S,
    R,
}

/// Normalised `(t, p, q)` for each word, in units of the turning radius.
fn words(alpha: f64, beta: f64, d: f64) -> Vec<([Turn; 3], [f64; 3])> {
    use Turn::*;
    let (sa, ca, sb, cb) = (alpha.sin(), alpha.cos(), beta.sin(), beta.cos());
    let cab = (alpha - beta).cos();
    let mut out = Vec::new();

    let p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sa - sb);
    if p2 >= 0.0 {
        let tmp = (cb - ca).atan2(d + sa - sb);
        out.push(([L, S, L], [m2p(tmp - alpha), p2.sqrt(), m2p(beta - tmp)]));
    }
    let p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sb - sa);
    if p2 >= 0.0 {
        let tmp = (ca - cb).atan2(d - sa + sb);
        out.push(([R, S, R], [m2p(alpha - tmp), p2.sqrt(), m2p(tmp - beta)]));
    }
    let p2 = -2.0 + d * d + 2.0 * cab + 2.0 * d * (sa + sb);
    if p2 >= 0.0 {
        let p = p2.sqrt();
        let tmp = (-ca - cb).atan2(d + sa + sb) - (-2.0f64).atan2(p);
        out.push(([L, S, R], [m2p(tmp - alpha), p, m2p(tmp - beta)]));
    }
    let p2 = d * d - 2.0 + 2.0 * cab - 2.0 * d * (sa + sb);
    if p2 >= 0.0 {
        let p = p2.sqrt();
        let tmp = (ca + cb).atan2(d - sa - sb) - 2.0f64.atan2(p);
        out.push(([R, S, L], [m2p(alpha - tmp), p, m2p(beta - tmp)]));
    }
    let c = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0;
    if c.abs() <= 1.0 {
        // Both middle-arc branches; the endpoint check keeps the valid ones.
        for p in [m2p(TAU - c.acos()), c.acos()] {
            let t = m2p(alpha - (ca - cb).atan2(d - sa + sb) + p / 2.0);
            out.push(([R, L, R], [t, p, m2p(alpha - beta - t + p)]));
        }
    }
    let c = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0;
    if c.abs() <= 1.0 {
        for p in [m2p(TAU - c.acos()), c.acos()] {
            let t = m2p(-alpha - (ca - cb).atan2(d + sa - sb) + p / 2.0);
            out.push(([L, R, L], [t, p, m2p(beta - alpha - t + p)]));
        }
    }
    out
}

fn close(a: Pose, b: Pose) -> bool {
    (a.x - b.x).hypot(a.y - b.y) < END_EPS && wrap_angle(a.heading - b.heading).abs() < END_EPS
}

/// Forward-only candidates from `a` to `b`, shortest first.
fn forward(a: Pose, b: Pose, steer_max: f64, wheelbase: f64) -> Vec<Vec<Segment>> {
    let r = wheelbase / steer_max.tan();
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let d = dx.hypot(dy) / r;
    let phi = if d > 0.0 { dy.atan2(dx) } else { 0.0 };
    let (alpha, beta) = (m2p(a.heading - phi), m2p(b.heading - phi));
    let mut cands: Vec<(f64, Vec<Segment>)> = words(alpha, beta, d)
        .into_iter()
        .filter_map(|(turns, lens)| {
            let segs: Vec<Segment> = turns
                .iter()
                .zip(lens)
                .map(|(t, l)| Segment {
                    direction: 1,
                    steer: match t {
                        Turn::L => steer_max,
                        Turn::S => 0.0,
                        Turn::R => -steer_max,
                    },
                    length: l * r,
                })
                .filter(|s| s.length > 1e-12)
                .collect();
            let total: f64 = segs.iter().map(|s| s.length).sum();
            close(end_pose(a, &segs, wheelbase), b).then_some((total, segs))
        })
        .collect();
    cands.sort_by(|x, y| x.0.total_cmp(&y.0));
    cands.into_iter().map(|c| c.1).collect()
}

/// Forward candidates and reverse-driven candidates from `a` to `b`.
///
/// A reverse drive with steer `-s` traces the same curve as a forward drive
/// with steer `s` on poses whose headings are flipped.
pub fn shots(a: Pose, b: Pose, steer_max: f64, wheelbase: f64) -> Vec<Vec<Segment>> {
    let mut out = forward(a, b, steer_max, wheelbase);
    let flip = |p: Pose| Pose::new(p.x, p.y, wrap_angle(p.heading + PI));
    for segs in forward(flip(a), flip(b), steer_max, wheelbase) {
        let rev: Vec<Segment> = segs
            .iter()
            .map(|s| Segment {
                direction: -1,
                steer: -s.steer,
                length: s.length,
            })
            .collect();
        if close(end_pose(a, &rev, wheelbase), b) {
            out.push(rev);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_ahead_is_one_segment() {
        let s = shots(
            Pose::new(0.0, 0.0, 0.0),
            Pose::new(10.0, 0.0, 0.0),
            0.6,
            6.0,
        );
        let best = &s[0];
        assert_eq!(best.len(), 1);
        assert!((best[0].length - 10.0).abs() < 1e-9);
    }

    #[test]
    fn all_words_reach_random_goals() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = Pose::new(
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
                rng.random_range(-PI..PI),
            );
            let b = Pose::new(
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
                rng.random_range(-PI..PI),
            );
            let f = forward(a, b, 0.6, 6.0);
            // Some forward word always exists between any two poses.
            assert!(!f.is_empty());
            assert!(shots(a, b, 0.6, 6.0).len() > f.len());
        }
    }

    #[test]
    fn straight_back_is_reverse() {
        let s = shots(
            Pose::new(10.0, 0.0, 0.0),
            Pose::new(0.0, 0.0, 0.0),
            0.6,
            6.0,
        );
        let best = s.iter().min_by(|x, y| {
            let l = |v: &Vec<Segment>| v.iter().map(|s| s.length).sum::<f64>();
            l(x).total_cmp(&l(y))
        });
        let best = best.unwrap();
        assert_eq!(best.len(), 1);
        assert_eq!(best[0].direction, -1);
    }
}
