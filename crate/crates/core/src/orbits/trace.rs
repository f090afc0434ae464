use nalgebra::Matrix3;

use super::analysis::mean_direction_and_strip;
use super::classify::ChainClassifier;
use super::{OrbitClass, OrbitError, PlaneSlice, TraceOptions, Trajectory};
use crate::dispersion::DispersionModel;
use crate::lattice::Vec3;
use crate::surface::critical::refine_height_critical;

/// Corrector result: point, gradient there, worst constraint residual.
type Corrected = (Vec3, Vec3, f64);

/// Min-norm Newton onto `{e = level} & {b . p = h}`.
fn correct(
    model: &DispersionModel,
    level: f64,
    slice: &PlaneSlice,
    q: &Vec3,
    tol: f64,
    max_iter: usize,
) -> Option<Corrected> {
    let b = &slice.b;
    let mut p = *q;
    let accept = tol * 20.0;
    for it in 0..=max_iter {
        let (e, g) = model.value_grad(&p);
        let f0 = e - level;
        let f1 = b.dot(&p) - slice.h;
        let r = f0.abs().max(f1.abs());
        if r <= tol || (it == max_iter && r <= accept) {
            return Some((p, g, r));
        }
        if it == max_iter {
            break;
        }
        let gg = g.norm_squared();
        let gb = g.dot(b);
        let det = gg - gb * gb;
        if det <= 1e-24 * gg.max(1e-300) {
            return None;
        }
        let l1 = (f0 - gb * f1) / det;
        let l2 = (gg * f1 - gb * f0) / det;
        let dp = g * l1 + b * l2;
        let n = dp.norm();
        p -= if n > 0.1 { dp * (0.1 / n) } else { dp };
    }
    None
}

/// Projects `p` onto the orbit curve of `slice` at energy `level`.
pub fn project_to_curve(model: &DispersionModel, level: f64, slice: &PlaneSlice, p: &Vec3) -> Option<Vec3> {
    correct(model, level, slice, p, 1e-12 * model.amplitude_scale().max(1.0), 40).map(|c| c.0)
}

fn tangent(g: &Vec3, b: &Vec3, sigma: f64) -> Vec3 {
    g.cross(b).normalize() * sigma
}

/// Rough distance to a height-critical point, when one may be close.
fn critical_distance_estimate(model: &DispersionModel, slice: &PlaneSlice, p: &Vec3, g: &Vec3) -> Option<f64> {
    let perp = g.cross(&slice.b).norm();
    if perp > 0.3 * g.norm() {
        return None;
    }
    let hess = model.jet(p).hess;
    Some(perp / hess.norm().max(1e-300))
}

fn near_critical(
    model: &DispersionModel,
    level: f64,
    slice: &PlaneSlice,
    p: &Vec3,
    d_est: Option<f64>,
    radius: f64,
) -> bool {
    match d_est {
        Some(d) if d <= 30.0 * radius => match refine_height_critical(model, level, &slice.b, p) {
            Some(c) => (c - p).norm() < radius,
            None => false,
        },
        _ => false,
    }
}

/// Point on the curve with `t0 . x = c`, starting from `x0`.
fn refine_on_section(
    model: &DispersionModel,
    level: f64,
    slice: &PlaneSlice,
    t0: &Vec3,
    c: f64,
    x0: &Vec3,
) -> Option<Vec3> {
    let mut x = *x0;
    for _ in 0..30 {
        let (e, g) = model.value_grad(&x);
        let f = Vec3::new(e - level, slice.b.dot(&x) - slice.h, t0.dot(&x) - c);
        if f.amax() < 1e-13 * model.amplitude_scale().max(1.0) {
            return Some(x);
        }
        let jac = Matrix3::from_rows(&[g.transpose(), slice.b.transpose(), t0.transpose()]);
        let dx = jac.lu().solve(&f)?;
        x -= dx;
        if dx.norm() < 1e-15 {
            return Some(x);
        }
    }
    let (e, _) = model.value_grad(&x);
    ((e - level).abs() < 1e-10).then_some(x)
}

/// Traces the orbit through `seed` (Cartesian) on the universal cover.
///
/// The flow runs along `grad e x B` (reversed with `opts.reverse`). The
/// trace stops on closure in R^3 or modulo a lattice vector in the plane, on
/// approaching a critical point of the height, once the chain classifier
/// is conclusive, or when `opts.max_arc` is used up.
pub fn trace(
    model: &DispersionModel,
    level: f64,
    slice: &PlaneSlice,
    seed: &Vec3,
    opts: &TraceOptions,
) -> Result<Trajectory, OrbitError> {
    let basis = &model.basis;
    let b = slice.b;
    let sigma = if opts.reverse { -1.0 } else { 1.0 };
    let tight = (opts.trace_tol * 0.02).max(1e-14);
    let (p0, g0, r0) = correct(model, level, slice, seed, tight, 40).ok_or(OrbitError::SeedOffSurface)?;
    if r0 > opts.trace_tol {
        return Err(OrbitError::SeedOffSurface);
    }
    let mut traj = Trajectory {
        slice: slice.clone(),
        points: vec![p0],
        arc_length: 0.0,
        class: OrbitClass::Undecided,
        eta: None,
        strip_width: None,
        period_vector: None,
        low_accuracy: false,
        max_drift: r0,
        steps: 0,
    };
    let mut d_est = critical_distance_estimate(model, slice, &p0, &g0);
    if g0.cross(&b).norm() < 1e-12 * g0.norm() || near_critical(model, level, slice, &p0, d_est, opts.crit_radius) {
        traj.class = OrbitClass::Singular;
        return Ok(traj);
    }
    let t0 = tangent(&g0, &b, sigma);
    let mut classifier = ChainClassifier::new(opts);
    let mut p = p0;
    let mut t = t0;
    let mut s = opts.max_step.min(0.01);
    let mut arc = 0.0;
    let mut verdict: Option<OrbitClass> = None;

    while verdict.is_none() {
        if arc >= opts.max_arc {
            let (class, low) = classifier.finish();
            verdict = Some(class);
            traj.low_accuracy = low;
            break;
        }
        if s < opts.min_step {
            return Err(OrbitError::StepCollapse {
                arc,
                min_step: opts.min_step,
            });
        }
        // approach critical points gradually so the ball around them is not skipped
        let s_eff = match d_est {
            Some(d) => s.min((0.5 * d).max(0.25 * opts.crit_radius)),
            None => s,
        };
        let q = p + t * s_eff;
        let Some((pn, gn, res)) = correct(model, level, slice, &q, tight, 8) else {
            s = s_eff * 0.5;
            continue;
        };
        let chord = (pn - p).norm();
        if (pn - q).norm() > 0.5 * s_eff || chord < 0.25 * s_eff {
            s = s_eff * 0.5;
            continue;
        }
        let tn = tangent(&gn, &b, sigma);
        let theta = t.dot(&tn).clamp(-1.0, 1.0).acos();
        if theta > 2.0 * opts.target_angle {
            s = s_eff * 0.5;
            continue;
        }
        let factor = if theta > 0.0 {
            (opts.target_angle / theta).clamp(0.5, 2.0)
        } else {
            2.0
        };
        traj.max_drift = traj.max_drift.max(res);
        traj.steps += 1;

        // closure on the universal cover or modulo a lattice translation in the plane
        let n = basis.to_fractional(&(pn - p0)).map(f64::round);
        let shift = basis.to_cartesian(&n);
        let target = p0 + shift;
        if b.dot(&shift).abs() < opts.closure_tol && traj.steps >= 8 {
            let before = t0.dot(&(p - target));
            let after = t0.dot(&(pn - target));
            if before < 0.0 && after >= 0.0 && (pn - target).norm() < 2.0 * chord + opts.closure_tol {
                let w = -before / (after - before);
                let x0 = p + (pn - p) * w;
                if let Some(x) = refine_on_section(model, level, slice, &t0, t0.dot(&target), &x0) {
                    if (x - target).norm() < opts.closure_tol {
                        arc += (x - p).norm();
                        traj.points.push(x);
                        if n.iter().all(|&c| c == 0.0) {
                            verdict = Some(OrbitClass::Closed);
                        } else {
                            traj.period_vector = Some([n[0] as i64, n[1] as i64, n[2] as i64]);
                            verdict = Some(OrbitClass::OpenPeriodic);
                        }
                        break;
                    }
                }
            }
        }

        arc += chord;
        traj.points.push(pn);
        p = pn;
        t = tn;
        s = (s_eff * factor).min(opts.max_step);
        d_est = critical_distance_estimate(model, slice, &p, &gn);

        if near_critical(model, level, slice, &p, d_est, opts.crit_radius) {
            verdict = Some(OrbitClass::Singular);
            break;
        }
        if let Some(c) = classifier.push(slice.coords(&p, &p0), arc) {
            verdict = Some(c);
        }
    }

    traj.arc_length = arc;
    traj.class = verdict.unwrap_or(OrbitClass::Undecided);
    if traj.class.is_directed() {
        let ds = mean_direction_and_strip(&traj, basis)?;
        traj.eta = Some(ds.eta);
        if traj.class.is_open() {
            traj.strip_width = Some(ds.strip_width);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{fixtures, make_anferms};

    #[test]
    fn sphere_section_is_closed_and_oriented() {
        let f = fixtures::sphere();
        let b = Vec3::new(0.3, -0.2, 0.9).normalize();
        let slice = PlaneSlice::new(&b, 0.02);
        let seed = Vec3::new(0.1, 0.0, 0.0);
        let tr = trace(&f.model, 2.5, &slice, &seed, &TraceOptions::default()).unwrap();
        assert_eq!(tr.class, OrbitClass::Closed);
        assert!((tr.start() - tr.end()).norm() < 1e-6);
        assert!(tr.max_drift < 1e-9);
        // positive signed area in the (u, v) frame for the default flow
        let o = tr.start();
        let area: f64 = tr
            .points
            .windows(2)
            .map(|w| {
                let a = slice.coords(&w[0], &o);
                let c = slice.coords(&w[1], &o);
                a[0] * c[1] - a[1] * c[0]
            })
            .sum();
        let rev = trace(
            &f.model,
            2.5,
            &slice,
            &seed,
            &TraceOptions {
                reverse: true,
                ..Default::default()
            },
        )
        .unwrap();
        let o = rev.start();
        let area_rev: f64 = rev
            .points
            .windows(2)
            .map(|w| {
                let a = slice.coords(&w[0], &o);
                let c = slice.coords(&w[1], &o);
                a[0] * c[1] - a[1] * c[0]
            })
            .sum();
        assert!(area.abs() > 1e-3);
        assert!((area + area_rev).abs() < 1e-3 * area.abs());
        // grad points inward around a maximum, so grad x B runs counterclockwise about B
        assert!(area > 0.0);
    }

    #[test]
    fn cylinder_section_is_periodic() {
        let f = fixtures::cylinder();
        let b = Vec3::new(1.0, 0.0, 0.0);
        let slice = PlaneSlice::new(&b, 0.15);
        let seed = Vec3::new(0.15, 0.1, 0.3);
        let tr = trace(&f.model, 0.5, &slice, &seed, &TraceOptions::default()).unwrap();
        assert_eq!(tr.class, OrbitClass::OpenPeriodic);
        let n = tr.period_vector.unwrap();
        assert_eq!(n[0], 0);
        assert_eq!(n[1], 0);
        assert_eq!(n[2].abs(), 1);
        assert!((tr.eta.unwrap().cross(&Vec3::z())).norm() < 1e-12);
    }

    #[test]
    fn tilted_cylinder_section_is_closed() {
        let f = fixtures::cylinder();
        let b = Vec3::new(1.0, 0.0, 0.4).normalize();
        let slice = PlaneSlice::new(&b, 0.05);
        let seed = Vec3::new(0.15, 0.1, 0.0);
        let tr = trace(&f.model, 0.5, &slice, &seed, &TraceOptions::default()).unwrap();
        assert_eq!(tr.class, OrbitClass::Closed);
    }

    #[test]
    fn seed_at_height_critical_point_is_singular() {
        let m = make_anferms(1.0, 0.0, 0.0).unwrap();
        let b = Vec3::z();
        // grad e is parallel to z at (1/2, 0, 1/4) on the level-0 surface
        let level = 0.0;
        let p = refine_height_critical(&m, level, &b, &Vec3::new(0.5, 0.01, 0.24)).unwrap();
        let slice = PlaneSlice::new(&b, p.z);
        let tr = trace(&m, level, &slice, &p, &TraceOptions::default()).unwrap();
        assert_eq!(tr.class, OrbitClass::Singular);
    }

    #[test]
    fn plane_missing_the_surface_is_rejected() {
        let f = fixtures::sphere();
        let slice = PlaneSlice::new(&Vec3::z(), 0.45);
        let seed = Vec3::new(0.1, 0.0, 0.45);
        assert!(project_to_curve(&f.model, 2.5, &slice, &seed).is_none());
        assert_eq!(
            trace(&f.model, 2.5, &slice, &seed, &TraceOptions::default()).unwrap_err(),
            OrbitError::SeedOffSurface
        );
    }
}
