use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::integer::{canonical, is_zero, IVec3};
use super::{LatticeBasis, LatticeError, Vec3};

/// Integral plane `n1 [x]_1 + n2 [x]_2 + n3 [x]_3 = 0` in canonical form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntegerPlane {
    pub n: IVec3,
}

impl IntegerPlane {
    /// Canonicalizes `n`; returns `None` for the zero vector.
    pub fn new(n: IVec3) -> Option<Self> {
        if is_zero(&n) {
            None
        } else {
            Some(Self { n: canonical(n) })
        }
    }

    /// Unit Cartesian normal of the plane.
    pub fn normal(&self, basis: &LatticeBasis) -> Vec3 {
        basis.plane_normal(self.n).normalize()
    }

    /// Unit direction of the line where the plane meets the plane orthogonal to `b`.
    pub fn intersection_with(&self, basis: &LatticeBasis, b: &Vec3) -> Option<Vec3> {
        let d = self.normal(basis).cross(b);
        let n = d.norm();
        (n > 1e-12).then(|| d / n)
    }

    /// Sine of the angle between `v` and the plane.
    pub fn residual(&self, basis: &LatticeBasis, v: &Vec3) -> f64 {
        self.normal(basis).dot(v).abs() / v.norm()
    }
}

impl std::fmt::Display for IntegerPlane {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.n[0], self.n[1], self.n[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneFitOptions {
    pub denom_bound: i64,
    /// Samples are collinear when the middle scatter eigenvalue is below
    /// this fraction of the largest.
    pub collinear_tol: f64,
    /// Maximal sine of the angle between the fitted normal and the rounded one.
    pub residual_tol: f64,
}

impl Default for PlaneFitOptions {
    fn default() -> Self {
        Self {
            denom_bound: 12,
            collinear_tol: 1e-8,
            residual_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneFit {
    pub plane: IntegerPlane,
    /// Least-squares normal in reciprocal coordinates, unit length.
    pub normal: Vec3,
    /// Sine of the angle between `normal` and the integer vector.
    pub integer_residual: f64,
    /// Largest sine of the angle between a sample and the integral plane.
    pub max_sample_residual: f64,
}

/// Fits the integral plane spanned by the mean directions `eta_samples`.
pub fn integer_plane_from_directions(
    eta_samples: &[Vec3],
    basis: &LatticeBasis,
    denom_bound: i64,
) -> Result<IntegerPlane, LatticeError> {
    let opts = PlaneFitOptions {
        denom_bound,
        ..Default::default()
    };
    fit_integer_plane(eta_samples, basis, &opts).map(|f| f.plane)
}

/// Same as [`integer_plane_from_directions`] with full diagnostics.
pub fn fit_integer_plane(
    eta_samples: &[Vec3],
    basis: &LatticeBasis,
    opts: &PlaneFitOptions,
) -> Result<PlaneFit, LatticeError> {
    // plane n . [x] = 0 in reciprocal coordinates, samples normalized so the
    // fit does not depend on their lengths
    let mut scatter = Matrix3::zeros();
    let mut count = 0;
    for eta in eta_samples {
        let x = basis.to_fractional(eta);
        let n = x.norm();
        if !(n > 0.0) || !n.is_finite() {
            continue;
        }
        let x = x / n;
        scatter += x * x.transpose();
        count += 1;
    }
    if count < 2 {
        return Err(LatticeError::CollinearSamples);
    }
    let eig = SymmetricEigen::new(scatter);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (lo, mid, hi) = (
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    if mid <= opts.collinear_tol * hi {
        return Err(LatticeError::CollinearSamples);
    }
    let _ = lo;
    let normal: Vec3 = eig.eigenvectors.column(order[0]).into_owned().normalize();

    let k = (0..3)
        .max_by(|&a, &b| normal[a].abs().total_cmp(&normal[b].abs()))
        .unwrap();
    let scaled = normal / normal[k];
    let mut best: Option<(IVec3, f64)> = None;
    for q in 1..=opts.denom_bound.max(1) {
        let m = [0, 1, 2].map(|i| (scaled[i] * q as f64).round() as i64);
        if is_zero(&m) {
            continue;
        }
        let mv = Vec3::new(m[0] as f64, m[1] as f64, m[2] as f64);
        let residual = mv.normalize().cross(&normal).norm();
        if best.is_none_or(|(_, r)| residual < r) {
            best = Some((m, residual));
        }
        if residual < opts.residual_tol {
            break;
        }
    }
    let (m, integer_residual) = best.expect("denominator 1 always yields a vector");
    if integer_residual >= opts.residual_tol {
        return Err(LatticeError::NoIntegerFit {
            bound: opts.denom_bound,
            residual: integer_residual,
        });
    }
    let plane = IntegerPlane::new(m).expect("nonzero");
    let max_sample_residual = eta_samples
        .iter()
        .filter(|e| e.norm() > 0.0)
        .map(|e| plane.residual(basis, e))
        .fold(0.0, f64::max);
    let normal = if crate::lattice::integer::dot(plane.n, m) < 0 {
        -normal
    } else {
        normal
    };
    Ok(PlaneFit {
        plane,
        normal,
        integer_residual,
        max_sample_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::reciprocal_basis;

    #[test]
    fn coordinate_plane() {
        let b = LatticeBasis::cubic();
        let s = [
            Vec3::new(1.0, 0.2, 0.0),
            Vec3::new(-0.3, 1.0, 0.0),
            Vec3::new(0.7, 0.7, 0.0),
        ];
        let p = integer_plane_from_directions(&s, &b, 10).unwrap();
        assert_eq!(p.n, [0, 0, 1]);
    }

    #[test]
    fn collinear_samples() {
        let b = LatticeBasis::cubic();
        let s = [Vec3::new(1.0, 2.0, 3.0), Vec3::new(-2.0, -4.0, -6.0)];
        assert_eq!(
            integer_plane_from_directions(&s, &b, 10),
            Err(LatticeError::CollinearSamples)
        );
        assert_eq!(
            integer_plane_from_directions(&s[..1], &b, 10),
            Err(LatticeError::CollinearSamples)
        );
    }

    #[test]
    fn noisy_diagonal_plane() {
        // exact plane x + y = 0 spanned by (1,-1,0) and (0,0,1), perturbed by 1e-6
        let b = LatticeBasis::cubic();
        let u = Vec3::new(1.0, -1.0, 0.0).normalize();
        let w = Vec3::z();
        let noise = [
            Vec3::new(3e-7, -8e-7, 5e-7),
            Vec3::new(-9e-7, 2e-7, 4e-7),
            Vec3::new(6e-7, 7e-7, -1e-6),
            Vec3::new(-2e-7, -5e-7, 9e-7),
        ];
        let s: Vec<Vec3> = (0..4)
            .map(|i| {
                let t = 0.4 * i as f64;
                u * t.cos() + w * t.sin() + noise[i]
            })
            .collect();
        let fit = fit_integer_plane(&s, &b, &PlaneFitOptions::default()).unwrap();
        assert_eq!(fit.plane.n, [1, 1, 0]);
        assert!(fit.integer_residual < 1e-5);
    }

    #[test]
    fn sheared_basis_uses_reciprocal_coordinates() {
        let b = reciprocal_basis(
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            1.0,
        )
        .unwrap();
        // the plane spanned by g1 and g3 is [x]_2 = 0
        let s = [
            b.reciprocal[0],
            b.reciprocal[2],
            b.reciprocal[0] + b.reciprocal[2] * 2.0,
        ];
        let p = integer_plane_from_directions(&s, &b, 10).unwrap();
        assert_eq!(p.n, [0, 1, 0]);
    }

    #[test]
    fn irrational_normal_has_no_small_fit() {
        let b = LatticeBasis::cubic();
        let nrm = Vec3::new(1.0, 2f64.sqrt(), 3f64.sqrt());
        let a = nrm.cross(&Vec3::x());
        let c = nrm.cross(&a);
        let err = integer_plane_from_directions(&[a, c], &b, 3).unwrap_err();
        assert!(matches!(err, LatticeError::NoIntegerFit { .. }));
    }

    proptest::proptest! {
        #[test]
        fn fit_is_invariant_under_scaling_and_permutation(
            scales in proptest::collection::vec(0.01f64..100.0, 4),
            rot in 0usize..4,
        ) {
            let b = LatticeBasis::cubic();
            let base = [
                Vec3::new(1.0, -1.0, 1.0),
                Vec3::new(0.0, 1.0, -1.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(2.0, -1.0, 1.0),
            ];
            let fit0 = fit_integer_plane(&base, &b, &PlaneFitOptions::default()).unwrap();
            let mut s: Vec<Vec3> = base.iter().zip(&scales).map(|(v, k)| v * *k).collect();
            s.rotate_left(rot);
            let fit1 = fit_integer_plane(&s, &b, &PlaneFitOptions::default()).unwrap();
            proptest::prop_assert_eq!(fit0.plane, fit1.plane);
            proptest::prop_assert_eq!(fit1.plane.n, [0, 1, 1]);
        }
    }
}
