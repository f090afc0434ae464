use std::collections::VecDeque;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{DirectionSample, Regime, SphereGrid, StabilityZone, ZoneError};
use crate::lattice::{fit_integer_plane, IntegerPlane, LatticeBasis, LatticeError, PlaneFitOptions, Vec3};
use crate::surface::critical::plane_frame;

/// Unit normal of the best plane through the directions, if they are not collinear.
fn continuous_normal(etas: &[Vec3]) -> Option<Vec3> {
    let mut s = Matrix3::zeros();
    for e in etas {
        s += e * e.transpose();
    }
    let eig = SymmetricEigen::new(s);
    let mut o = [0usize, 1, 2];
    o.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    (eig.eigenvalues[o[1]] > 1e-4 * eig.eigenvalues[o[2]]).then(|| eig.eigenvectors.column(o[0]).normalize())
}

fn special(s: &DirectionSample) -> bool {
    s.direction.irrationality.is_special()
}

/// Breadth-first growth through unassigned stable samples, rejecting samples
/// whose direction leaves the plane fitted to the region so far. Special
/// directions join only once the plane is known: their open orbits may be
/// periodic along a line shared by several planes.
fn grow(grid: &SphereGrid, samples: &[DirectionSample], free: &[bool], seed: usize, tol: f64) -> Vec<usize> {
    let mut seen = vec![false; samples.len()];
    let mut region = vec![seed];
    let mut etas = vec![samples[seed].eta.unwrap()];
    let mut normal: Option<Vec3> = None;
    let mut refit_at = 3;
    let mut deferred = Vec::new();
    seen[seed] = true;
    let mut queue = VecDeque::from([seed]);
    loop {
        while let Some(i) = queue.pop_front() {
            for &j in &grid.neighbors[i] {
                if seen[j] || !free[j] {
                    continue;
                }
                let e = samples[j].eta.unwrap();
                match normal {
                    None if special(&samples[j]) => {
                        deferred.push(j);
                        continue;
                    }
                    Some(n) if n.dot(&e).abs() >= tol => {
                        seen[j] = true;
                        continue;
                    }
                    _ => {}
                }
                seen[j] = true;
                region.push(j);
                etas.push(e);
                queue.push_back(j);
                if etas.len() >= refit_at {
                    normal = continuous_normal(&etas).or(normal);
                    refit_at = etas.len() * 3 / 2 + 1;
                }
            }
        }
        if normal.is_none() {
            break;
        }
        // special neighbours met before the plane was known
        let retry: Vec<usize> = deferred.drain(..).filter(|&j| !seen[j]).collect();
        if retry.is_empty() {
            break;
        }
        let n = normal.unwrap();
        for j in retry {
            seen[j] = true;
            let e = samples[j].eta.unwrap();
            if n.dot(&e).abs() < tol {
                region.push(j);
                etas.push(e);
                queue.push_back(j);
            }
        }
    }
    region
}

/// Mean directions spread by less than about `eta_tol / 2` count as collinear.
fn fit_options(eta_tol: f64) -> PlaneFitOptions {
    PlaneFitOptions {
        collinear_tol: 0.25 * eta_tol * eta_tol,
        ..PlaneFitOptions::default()
    }
}

/// Groups stable open samples into zones of a common integral plane.
///
/// Samples that cannot be placed in a zone of at least two directions are
/// demoted to `Undecided`. Returns the zones and the zone of every sample.
pub fn assemble_zones(
    grid: &SphereGrid,
    samples: &mut [DirectionSample],
    basis: &LatticeBasis,
    eta_tol: f64,
) -> (Vec<StabilityZone>, Vec<Option<usize>>) {
    let n = samples.len();
    let stable = |s: &DirectionSample| s.regime == Regime::StableOpen && s.eta.is_some();
    let mut zone_of: Vec<Option<usize>> = vec![None; n];
    let mut tried = vec![false; n];
    let mut zones: Vec<StabilityZone> = Vec::new();
    let fit_opts = fit_options(eta_tol);
    for seed in 0..n {
        if tried[seed] || zone_of[seed].is_some() || !stable(&samples[seed]) || special(&samples[seed]) {
            continue;
        }
        tried[seed] = true;
        let free: Vec<bool> = (0..n).map(|i| zone_of[i].is_none() && stable(&samples[i])).collect();
        let mut region = grow(grid, samples, &free, seed, eta_tol);
        let mut fit = None;
        for _ in 0..3 {
            let etas: Vec<Vec3> = region.iter().map(|&i| samples[i].eta.unwrap()).collect();
            let Ok(f) = fit_integer_plane(&etas, basis, &fit_opts) else {
                break;
            };
            let before = region.len();
            region.retain(|&i| f.plane.residual(basis, &samples[i].eta.unwrap()) < eta_tol);
            let stable_fit = region.len() == before;
            fit = Some(f);
            if stable_fit {
                break;
            }
        }
        let Some(fit) = fit.filter(|_| region.len() >= 2) else {
            continue;
        };
        let id = zones.len();
        let etas: Vec<Vec3> = region.iter().map(|&i| samples[i].eta.unwrap()).collect();
        for &i in &region {
            zone_of[i] = Some(id);
        }
        let max_eta_residual = region
            .iter()
            .map(|&i| fit.plane.residual(basis, &samples[i].eta.unwrap()))
            .fold(0.0, f64::max);
        zones.push(StabilityZone {
            id,
            samples: region,
            quantum_numbers: fit.plane,
            integer_residual: fit.integer_residual,
            max_eta_residual,
            etas,
            center: Vec3::zeros(),
            boundary: Vec::new(),
            sub_boundaries: Vec::new(),
            special_direction: None,
        });
    }
    for (i, s) in samples.iter_mut().enumerate() {
        if s.regime == Regime::StableOpen && zone_of[i].is_none() {
            s.regime = Regime::Undecided;
        }
    }
    for z in &mut zones {
        attach_special(z, grid, basis, &mut zone_of);
        outline(z, grid, samples, &zone_of);
    }
    (zones, zone_of)
}

/// Marks the plane normal as the zone's special direction when the nearest
/// grid vertex is in the zone or enclosed by it.
fn attach_special(z: &mut StabilityZone, grid: &SphereGrid, basis: &LatticeBasis, zone_of: &mut [Option<usize>]) {
    let mean: Vec3 = z.samples.iter().map(|&i| grid.directions[i]).sum();
    let nrm = z.quantum_numbers.normal(basis);
    let d = if nrm.dot(&mean) >= 0.0 { nrm } else { -nrm };
    let v = grid.nearest(&d);
    let enclosed = zone_of[v].is_none() && grid.neighbors[v].iter().all(|&j| zone_of[j] == Some(z.id));
    if zone_of[v] == Some(z.id) || enclosed {
        z.special_direction = Some(d);
        if enclosed {
            zone_of[v] = Some(z.id);
            z.samples.push(v);
        }
    }
}

fn outline(z: &mut StabilityZone, grid: &SphereGrid, samples: &[DirectionSample], zone_of: &[Option<usize>]) {
    let mean: Vec3 = z.samples.iter().map(|&i| grid.directions[i]).sum();
    z.center = mean.normalize();
    let (u, v) = plane_frame(&z.center);
    let mut boundary = Vec::new();
    let mut inner = Vec::new();
    for &i in &z.samples {
        for &j in &grid.neighbors[i] {
            let mid = (grid.directions[i] + grid.directions[j]).normalize();
            if zone_of[j] != Some(z.id) {
                boundary.push(mid);
            } else if i < j && samples[i].carrier_count != samples[j].carrier_count {
                inner.push(mid);
            }
        }
    }
    boundary.sort_by(|a, b| a.dot(&v).atan2(a.dot(&u)).total_cmp(&b.dot(&v).atan2(b.dot(&u))));
    z.boundary = boundary;
    z.sub_boundaries = inner;
}

/// Refits the integral plane of a zone from its mean directions and checks
/// every direction against it.
pub fn zone_quantum_numbers(
    zone: &StabilityZone,
    basis: &LatticeBasis,
    eta_tol: f64,
) -> Result<IntegerPlane, ZoneError> {
    let opts = fit_options(eta_tol);
    let fit = fit_integer_plane(&zone.etas, basis, &opts)?;
    let worst = zone
        .etas
        .iter()
        .map(|e| fit.plane.residual(basis, e))
        .fold(0.0, f64::max);
    if worst >= eta_tol {
        return Err(LatticeError::NoIntegerFit {
            bound: opts.denom_bound,
            residual: worst,
        }
        .into());
    }
    Ok(fit.plane)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    /// `omega_B tau` at which the orbit crosses the open strip in one relaxation time.
    pub omega_tau: f64,
    pub field: f64,
    pub angle_to_special_deg: f64,
}

/// Field scale at which the closed orbits near a special direction start to
/// behave like the open strip of width `strip_width`.
///
/// `p0` is the Fermi momentum scale and `omega_tau_per_field` converts
/// `omega_B tau` to field units. `b` must lie closer to the special direction
/// than the nearest point of the zone boundary.
pub fn strip_crossover_field(
    zone: &StabilityZone,
    b: &Vec3,
    strip_width: f64,
    p0: f64,
    omega_tau_per_field: f64,
) -> Result<Crossover, ZoneError> {
    let s = zone.special_direction.ok_or(ZoneError::NoSpecialDirection)?;
    let angle_to = |d: &Vec3| s.dot(&d.normalize()).clamp(-1.0, 1.0).acos().to_degrees();
    let angle = angle_to(b);
    let radius = zone.boundary.iter().map(angle_to).fold(f64::INFINITY, f64::min);
    if !(angle < radius) {
        return Err(ZoneError::NotNearSpecialDirection { angle_deg: angle });
    }
    let omega_tau = strip_width / p0;
    Ok(Crossover {
        omega_tau,
        field: omega_tau / omega_tau_per_field,
        angle_to_special_deg: angle,
    })
}

/// Low-index planes expected for cubic nets: every entry in `{-1, 0, 1}`.
pub fn predicted_quantum_numbers() -> Vec<IntegerPlane> {
    let mut out = Vec::new();
    for a in -1..=1 {
        for b in -1..=1 {
            for c in -1..=1 {
                if let Some(p) = IntegerPlane::new([a, b, c]) {
                    if !out.contains(&p) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}
