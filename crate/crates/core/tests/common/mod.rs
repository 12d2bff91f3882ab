//! Shared oracles for the integration tests.

use std::f64::consts::{PI, TAU};

use formation_gatekeeper::dubins::{DubinsFamily, Pose2, SegmentKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn m2pi(a: f64) -> f64 {
    a.rem_euclid(TAU)
}

fn sign(k: SegmentKind) -> f64 {
    match k {
        SegmentKind::Left => 1.0,
        SegmentKind::Right => -1.0,
        SegmentKind::Straight => 0.0,
    }
}

/// Pose after turning through `angle` with turn sign `s` on radius `r`.
fn turn(p: (f64, f64, f64), s: f64, angle: f64, r: f64) -> (f64, f64, f64) {
    let (x, y, h) = p;
    let (cx, cy) = (x - s * r * h.sin(), y + s * r * h.cos());
    let h2 = h + s * angle;
    (cx + s * r * h2.sin(), cy - s * r * h2.cos(), h2)
}

fn center(p: (f64, f64, f64), s: f64, r: f64) -> (f64, f64) {
    (p.0 - s * r * p.2.sin(), p.1 + s * r * p.2.cos())
}

/// Roots of `f` on [0, 2pi) by a uniform scan plus bisection.
fn roots(f: impl Fn(f64) -> f64, step: f64) -> Vec<f64> {
    let n = (TAU / step).ceil() as usize;
    let mut out = Vec::new();
    let mut prev = f(0.0);
    if prev.abs() < 1e-12 {
        out.push(0.0);
    }
    for i in 1..=n {
        let b = (i as f64 * step).min(TAU);
        let fb = f(b);
        if fb.abs() < 1e-12 {
            out.push(b);
        } else if prev * fb < 0.0 && prev.abs() > 1e-12 {
            let (mut lo, mut hi, mut flo) = (b - step, b, prev);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        prev = fb;
    }
    out
}

/// Shortest curvature-bounded path found by scanning the first turn angle of
/// every three-segment word.
pub fn brute_force(q0: Pose2, q1: Pose2, r: f64) -> f64 {
    let p0 = (q0.x, q0.y, q0.heading);
    let g = (q1.x, q1.y, q1.heading);
    let mut best = f64::INFINITY;
    for family in DubinsFamily::ALL {
        let [k1, k2, k3] = family.segments();
        let (s1, s3) = (sign(k1), sign(k3));
        if k2 == SegmentKind::Straight {
            // Third arc fixed by the heading; straight by projection.
            let split = |a: f64| {
                let p1 = turn(p0, s1, a, r);
                let c = m2pi(s3 * (g.2 - p1.2));
                let q = turn(g, s3, -c, r);
                let (dx, dy) = (q.0 - p1.0, q.1 - p1.1);
                let (hs, hc) = p1.2.sin_cos();
                (dx * hc + dy * hs, dy * hc - dx * hs, c)
            };
            for a in roots(|a| split(a).1, 1e-3) {
                let (b, _, c) = split(a);
                if b >= -1e-9 {
                    best = best.min(r * (a + c) + b.max(0.0));
                }
            }
        } else {
            let s2 = sign(k2);
            let cg = center(g, s3, r);
            let gap = |a: f64| {
                let p1 = turn(p0, s1, a, r);
                let c2 = center(p1, s2, r);
                (c2.0 - cg.0).hypot(c2.1 - cg.1) - 2.0 * r
            };
            for a in roots(gap, 1e-3) {
                let p1 = turn(p0, s1, a, r);
                let c2 = center(p1, s2, r);
                let (ux, uy) = ((cg.0 - c2.0) / (2.0 * r), (cg.1 - c2.1) / (2.0 * r));
                // Heading at the tangent point of the middle circle.
                let ht = (s2 * ux).atan2(-s2 * uy);
                let m = m2pi(s2 * (ht - p1.2));
                let c = m2pi(s3 * (g.2 - ht));
                best = best.min(r * (a + m + c));
            }
        }
    }
    best
}

pub fn random_pose(rng: &mut ChaCha8Rng) -> Pose2 {
    Pose2::new(
        rng.gen_range(-50.0..50.0),
        rng.gen_range(-50.0..50.0),
        rng.gen_range(-PI..PI),
    )
}
