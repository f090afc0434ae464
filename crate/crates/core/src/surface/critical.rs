use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use super::{PeriodicMesh, SurfaceComponent, SurfaceError};
use crate::dispersion::DispersionModel;
use crate::lattice::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriticalIndex {
    Min,
    Saddle,
    Max,
}

impl CriticalIndex {
    pub fn morse_sign(self) -> i64 {
        match self {
            CriticalIndex::Saddle => -1,
            _ => 1,
        }
    }
}

/// Critical point of the height `B . p` restricted to the Fermi surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightCritical {
    /// Cartesian position inside the unit cell image.
    pub point: Vec3,
    pub index: CriticalIndex,
    /// Height `B . p` at `point`.
    pub height: f64,
}

/// Two unit vectors completing `b` to a right-handed orthonormal frame.
pub fn plane_frame(b: &Vec3) -> (Vec3, Vec3) {
    let b = b.normalize();
    let helper = if b.x.abs() < 0.6 {
        Vec3::x()
    } else if b.y.abs() < 0.6 {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let u = (helper - b * b.dot(&helper)).normalize();
    let v = b.cross(&u);
    (u, v)
}

/// Restricted Hessian of the height at a point where the gradient is parallel to `b`.
pub(crate) fn restricted_hessian(hess: &Matrix3<f64>, grad: &Vec3, b: &Vec3) -> Matrix2<f64> {
    let (u, v) = plane_frame(b);
    let g = b.dot(grad);
    let huu = u.dot(&(hess * u));
    let huv = u.dot(&(hess * v));
    let hvv = v.dot(&(hess * v));
    -Matrix2::new(huu, huv, huv, hvv) / g
}

/// Newton refinement of `{e = level, grad e x B = 0}` from `p0` (Cartesian).
pub(crate) fn refine_height_critical(model: &DispersionModel, level: f64, b: &Vec3, p0: &Vec3) -> Option<Vec3> {
    let (u, v) = plane_frame(b);
    let mut p = *p0;
    let scale = model.amplitude_scale().max(1e-300);
    for _ in 0..50 {
        let j = model.jet(&p);
        let f = Vec3::new(j.value - level, j.grad.dot(&u), j.grad.dot(&v));
        if f.norm() < 1e-12 * scale {
            return Some(p);
        }
        let jac = Matrix3::from_rows(&[j.grad.transpose(), (j.hess * u).transpose(), (j.hess * v).transpose()]);
        // damped least squares tolerates degenerate critical sets
        let mu = 1e-10 * (jac.norm_squared() + 1e-300);
        let lhs = jac.transpose() * jac + Matrix3::identity() * mu;
        let dp = lhs.lu().solve(&(jac.transpose() * f))?;
        let n = dp.norm();
        p -= if n > 0.05 { dp * (0.05 / n) } else { dp };
        if n < 1e-15 {
            break;
        }
    }
    let j = model.jet(&p);
    let f = Vec3::new(j.value - level, j.grad.dot(&u), j.grad.dot(&v));
    (f.norm() < 1e-9 * scale).then_some(p)
}

/// Critical points of the height function on one component, one per lattice orbit.
pub fn height_critical_points(
    model: &DispersionModel,
    mesh: &PeriodicMesh,
    component: &SurfaceComponent,
    b: &Vec3,
) -> Result<Vec<HeightCritical>, SurfaceError> {
    let bhat = b.normalize();
    let neighbors = mesh.vertex_neighbors();
    let mut in_comp = vec![false; mesh.vertices.len()];
    for &t in &component.triangles {
        for &v in &mesh.triangles[t as usize].v {
            in_comp[v as usize] = true;
        }
    }
    let misalign = |x: &Vec3| {
        let (_, g) = model.value_grad(&model.basis.to_cartesian(x));
        g.cross(&bhat).norm() / g.norm()
    };
    let s: Vec<f64> = mesh
        .vertices
        .iter()
        .enumerate()
        .map(|(i, x)| if in_comp[i] { misalign(x) } else { f64::INFINITY })
        .collect();
    let mut found: Vec<HeightCritical> = Vec::new();
    for (i, x) in mesh.vertices.iter().enumerate() {
        if !in_comp[i] || s[i] > 0.5 {
            continue;
        }
        if neighbors[i].iter().any(|&n| s[n as usize] < s[i]) {
            continue;
        }
        let p0 = model.basis.to_cartesian(x);
        let Some(p) = refine_height_critical(model, mesh.level, &bhat, &p0) else {
            continue;
        };
        let xf = model.basis.to_fractional(&p);
        let wrapped = xf.map(|c| c - c.floor());
        if found
            .iter()
            .any(|c| periodic_distance(&model.basis.to_fractional(&c.point), &wrapped) < 1e-6)
        {
            continue;
        }
        let j = model.jet(&p);
        let m = restricted_hessian(&j.hess, &j.grad, &bhat);
        let det = m.determinant();
        let size = m.norm_squared();
        let pw = model.basis.to_cartesian(&wrapped);
        if det.abs() < 1e-6 * size || size == 0.0 {
            return Err(SurfaceError::DegenerateCritical {
                point: [pw[0], pw[1], pw[2]],
                det,
            });
        }
        let index = if det < 0.0 {
            CriticalIndex::Saddle
        } else if m.trace() > 0.0 {
            CriticalIndex::Min
        } else {
            CriticalIndex::Max
        };
        found.push(HeightCritical {
            point: pw,
            index,
            height: bhat.dot(&pw),
        });
    }
    Ok(found)
}

fn periodic_distance(a: &Vec3, b: &Vec3) -> f64 {
    (a - b).map(|d| d - d.round()).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_orthonormal() {
        for b in [Vec3::x(), Vec3::new(0.3, -0.2, 0.9), Vec3::new(0.0, 1.0, 0.0)] {
            let (u, v) = plane_frame(&b);
            let bh = b.normalize();
            assert!(u.dot(&bh).abs() < 1e-15 && v.dot(&bh).abs() < 1e-15 && u.dot(&v).abs() < 1e-15);
            assert!((u.norm() - 1.0).abs() < 1e-15 && (v.norm() - 1.0).abs() < 1e-15);
            assert!((u.cross(&v) - bh).norm() < 1e-15);
        }
    }
}
