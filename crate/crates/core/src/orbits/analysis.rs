use serde::{Deserialize, Serialize};

use super::{OrbitClass, OrbitError, Trajectory};
use crate::lattice::{LatticeBasis, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionStrip {
    pub eta: Vec3,
    /// Twice the largest distance from the line through the first point along `eta`.
    pub strip_width: f64,
}

fn width(points: &[Vec3], b: &Vec3, eta: &Vec3) -> f64 {
    let n = b.cross(eta);
    let o = points[0];
    2.0 * points.iter().map(|p| (p - o).dot(&n).abs()).fold(0.0, f64::max)
}

/// Arc-weighted principal direction of the in-plane chain, signed by the net displacement.
fn principal_direction(traj: &Trajectory) -> Option<Vec3> {
    let s = &traj.slice;
    let o = traj.start();
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for w in traj.points.windows(2) {
        let len = (w[1] - w[0]).norm();
        let m = s.coords(&((w[0] + w[1]) * 0.5), &o);
        sw += len;
        sx += len * m[0];
        sy += len * m[1];
        sxx += len * m[0] * m[0];
        sxy += len * m[0] * m[1];
        syy += len * m[1] * m[1];
    }
    if sw <= 0.0 {
        return None;
    }
    let (mx, my) = (sx / sw, sy / sw);
    let th = 0.5 * (2.0 * (sxy / sw - mx * my)).atan2(sxx / sw - mx * mx - (syy / sw - my * my));
    let mut e = s.u * th.cos() + s.v * th.sin();
    if e.dot(&(traj.end() - o)) < 0.0 {
        e = -e;
    }
    Some(e)
}

/// Direction to the chain point that best approximates a lattice translate of the start.
///
/// A near return `p - p0 = g + d` with `g` in the lattice pins the direction
/// to within `|d| / |p - p0|`, much tighter than the strip-width bound.
fn closest_return(traj: &Trajectory, basis: &LatticeBasis) -> Option<(Vec3, f64)> {
    let o = traj.start();
    let b = traj.slice.b;
    let far = traj.points.iter().map(|p| (p - o).norm()).fold(0.0, f64::max);
    let mut best: Option<(f64, Vec3, f64)> = None;
    for p in &traj.points {
        let d = p - o;
        let len = d.norm();
        if len < 0.5 * far || len == 0.0 {
            continue;
        }
        let n = basis.to_fractional(&d).map(f64::round);
        let r = (d - basis.to_cartesian(&n)).norm();
        let score = r / len;
        if best.is_none_or(|(s, _, _)| score < s) {
            best = Some((score, d, r));
        }
    }
    let (score, d, _) = best?;
    let inplane = d - b * b.dot(&d);
    Some((inplane.normalize(), score))
}

/// Mean direction and strip width of a directed trajectory.
pub fn mean_direction_and_strip(traj: &Trajectory, basis: &LatticeBasis) -> Result<DirectionStrip, OrbitError> {
    if !traj.class.is_directed() || traj.points.len() < 2 {
        return Err(OrbitError::NotDirected);
    }
    let b = traj.slice.b;
    let eta = if let (OrbitClass::OpenPeriodic, Some(n)) = (traj.class, traj.period_vector) {
        basis.lattice_vector(n).normalize()
    } else {
        let rough = principal_direction(traj).ok_or(OrbitError::NotDirected)?;
        let disp = (traj.end() - traj.start()).norm().max(1e-300);
        // the chain can only pin the direction to about width / displacement
        let bound = width(&traj.points, &b, &rough) / disp;
        match closest_return(traj, basis) {
            Some((e, score)) if score < bound && e.dot(&rough).clamp(-1.0, 1.0).acos() < 2.0 * bound + 1e-3 => e,
            _ => rough,
        }
    };
    Ok(DirectionStrip {
        eta,
        strip_width: width(&traj.points, &b, &eta),
    })
}

/// In-plane chain of the real-space orbit: the momentum chain turned by a
/// quarter turn about `B`, in the `(u, v)` frame of the slice.
pub fn real_space_projection(traj: &Trajectory) -> Vec<[f64; 2]> {
    let o = traj.start();
    traj.points
        .iter()
        .map(|p| quarter_turn(traj.slice.coords(p, &o)))
        .collect()
}

fn quarter_turn(q: [f64; 2]) -> [f64; 2] {
    [-q[1], q[0]]
}

/// Log-log slope of the in-plane displacement against arc length over
/// geometric windows starting at `min_arc`.
pub fn growth_exponent(traj: &Trajectory, min_arc: f64) -> Option<f64> {
    let o = traj.start();
    let mut arc = 0.0;
    let mut next = min_arc;
    let mut samples = Vec::new();
    for w in traj.points.windows(2) {
        arc += (w[1] - w[0]).norm();
        if arc >= next {
            let d = traj.slice.coords(&w[1], &o);
            let r = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if r > 0.0 {
                samples.push((arc.ln(), r.ln()));
            }
            next *= 2.0;
        }
    }
    if samples.len() < 3 {
        return None;
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx) * (s.0 - mx)).sum();
    Some(sxy / sxx)
}
