//! Curvature margin of a sampled leader path.
//!
//! At constant speed two agents on the path keep their arc separation, so
//! the margin only depends on which arc separations can still bring two path
//! points closer than `delta`.

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::Vec3;
use crate::trajectory::PiecewiseTrajectory;

/// Arc separations up to `delta + EPSILON_WINDOW` are checked at full
/// resolution. Farther pairs go through a coarse filter first.
pub const EPSILON_WINDOW: f64 = 10.0;

/// Arc spacing of the coarse far-pair filter.
const COARSE_SPACING: f64 = 0.5;

/// Distances this close below `delta` count as equal to it.
const ROUNDOFF: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum EpsilonError {
    #[error("sample spacing {spacing} exceeds delta/4 = {}", delta / 4.0)]
    SpacingTooCoarse { spacing: f64, delta: f64 },
    #[error("lookahead {lookahead} s shorter than the path duration {duration} s")]
    LookaheadTooShort { lookahead: f64, duration: f64 },
    #[error("path comes within delta of itself at arc parameters {t1} and {t2}; no finite margin")]
    NoFiniteEpsilon { t1: f64, t2: f64 },
    #[error("path has fewer than two samples")]
    Empty,
}

/// Smallest margin on the sample grid such that any two points of the path
/// at arc separation `delta + epsilon` or more are at least `delta` apart,
/// plus `2 * spacing` of sampling slack.
///
/// `spacing` is rounded to a whole number of trajectory steps. A path that
/// comes back within `delta` of itself beyond the full-resolution window has
/// no usable margin and is rejected.
pub fn estimate_epsilon(
    leader: &PiecewiseTrajectory,
    delta: f64,
    lookahead: f64,
    spacing: f64,
) -> Result<f64, EpsilonError> {
    if leader.len() < 2 {
        return Err(EpsilonError::Empty);
    }
    if spacing > delta / 4.0 {
        return Err(EpsilonError::SpacingTooCoarse { spacing, delta });
    }
    let duration = leader.t_end() - leader.t_start;
    if lookahead < duration - 1e-9 {
        return Err(EpsilonError::LookaheadTooShort {
            lookahead,
            duration,
        });
    }
    let base = leader.speed * leader.dt;
    let stride = ((spacing / base).round() as usize).max(1);
    let ds = stride as f64 * base;
    let idx: Vec<usize> = (0..leader.len()).step_by(stride).collect();
    let pts: Vec<Vec3> = idx
        .iter()
        .map(|&i| leader.samples[i].state.position())
        .collect();
    let n = pts.len();
    let window = ((delta + EPSILON_WINDOW) / ds).ceil() as usize;
    let near_lags = window.min(n - 1);

    let worst_bad_lag = (1..=near_lags)
        .into_par_iter()
        .filter(|&k| (0..n - k).any(|i| pts[i].distance(pts[i + k]) < delta - ROUNDOFF))
        .max();

    if let Some((a, b)) = far_violation(&pts, delta, ds, window) {
        return Err(EpsilonError::NoFiniteEpsilon {
            t1: leader.time_of(idx[a]),
            t2: leader.time_of(idx[b]),
        });
    }

    let grid = match worst_bad_lag {
        Some(k) => (k + 1) as f64 * ds - delta,
        None => 0.0,
    };
    let grid = if grid < 1e-12 { 0.0 } else { grid };
    Ok(grid + 2.0 * ds)
}

/// Finds a pair more than `window` samples apart that is closer than
/// `delta`. Coarse pairs are filtered with a threshold widened by the
/// distance a fine sample can be from its coarse representative, and only
/// flagged neighborhoods are searched at full resolution.
fn far_violation(pts: &[Vec3], delta: f64, ds: f64, window: usize) -> Option<(usize, usize)> {
    let n = pts.len();
    if n <= window + 1 {
        return None;
    }
    let c = ((COARSE_SPACING / ds).round() as usize).max(1);
    let mut coarse: Vec<usize> = (0..n).step_by(c).collect();
    if *coarse.last().unwrap() != n - 1 {
        coarse.push(n - 1);
    }
    let widened = delta + c as f64 * ds;
    let half = c.div_ceil(2);
    let flagged: Vec<(usize, usize)> = coarse
        .par_iter()
        .enumerate()
        .flat_map_iter(|(ia, &a)| {
            coarse[ia + 1..]
                .iter()
                .filter(move |&&b| b - a + c > window && pts[a].distance(pts[b]) < widened)
                .map(move |&b| (a, b))
        })
        .collect();
    for (a, b) in flagged {
        for i in a.saturating_sub(half)..=(a + half).min(n - 1) {
            for j in b.saturating_sub(half)..=(b + half).min(n - 1) {
                if j > i + window && pts[i].distance(pts[j]) < delta {
                    return Some((i, j));
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{Sample, SegmentTag};
    use crate::vehicle::{AirplaneState, ControlInput};

    fn from_points(points: impl Iterator<Item = (Vec3, f64)>, dt: f64) -> PiecewiseTrajectory {
        let samples = points
            .map(|(p, psi)| Sample {
                state: AirplaneState::from_position(p, psi),
                control: ControlInput::default(),
                tag: SegmentTag::LeaderPath,
            })
            .collect();
        PiecewiseTrajectory::new(0.0, dt, 1.0, samples)
    }

    fn arc(radius: f64, angle: f64) -> PiecewiseTrajectory {
        let n = (radius * angle / 0.01).round() as usize;
        from_points(
            (0..=n).map(|i| {
                let th = i as f64 * 0.01 / radius;
                (
                    Vec3::new(radius * th.sin(), radius * (1.0 - th.cos()), 0.0),
                    th,
                )
            }),
            0.01,
        )
    }

    #[test]
    fn straight_line_gets_only_slack() {
        let line = from_points(
            (0..=3000).map(|i| (Vec3::new(i as f64 * 0.01, 0.0, 0.0), 0.0)),
            0.01,
        );
        let eps = estimate_epsilon(&line, 1.0, 30.0, 0.01).unwrap();
        assert!((eps - 0.02).abs() < 1e-9, "{eps}");
    }

    #[test]
    fn three_quarter_circle_matches_chord_inversion() {
        let path = arc(10.0, 1.5 * std::f64::consts::PI);
        let eps = estimate_epsilon(&path, 1.0, 100.0, 0.01).unwrap();
        // smallest A with 20 sin(A / 20) >= 1
        let a = 20.0 * (0.05f64).asin();
        assert!(eps >= a - 1.0);
        assert!(eps <= a - 1.0 + 0.03 + 1e-9, "{eps}");
    }

    #[test]
    fn closed_loop_has_no_margin() {
        let path = arc(10.0, 2.0 * std::f64::consts::PI + 0.3);
        assert!(matches!(
            estimate_epsilon(&path, 1.0, 100.0, 0.01),
            Err(EpsilonError::NoFiniteEpsilon { .. })
        ));
    }

    #[test]
    fn preconditions() {
        let line = from_points(
            (0..=100).map(|i| (Vec3::new(i as f64 * 0.01, 0.0, 0.0), 0.0)),
            0.01,
        );
        assert!(matches!(
            estimate_epsilon(&line, 1.0, 5.0, 0.3),
            Err(EpsilonError::SpacingTooCoarse { .. })
        ));
        assert!(matches!(
            estimate_epsilon(&line, 1.0, 0.5, 0.01),
            Err(EpsilonError::LookaheadTooShort { .. })
        ));
    }

    #[test]
    fn coarser_spacing_still_bounds_margin() {
        let path = arc(10.0, 1.5 * std::f64::consts::PI);
        let eps = estimate_epsilon(&path, 1.0, 100.0, 0.05).unwrap();
        assert!(eps >= 20.0 * (0.05f64).asin() - 1.0);
    }
}
