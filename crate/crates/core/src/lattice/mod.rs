//! Direct and reciprocal lattice arithmetic.
//!
//! Quasimomenta are stored in Cartesian momentum units. Fractional
//! coordinates `[p]_i = <p, l_i> / planck_scale` are the coordinates of `p`
//! in the reciprocal basis, so the reciprocal lattice is `Z^3` in fractional
//! coordinates.

mod direction;
pub mod integer;
mod plane;

pub use direction::{classify_direction, classify_exact, FieldDirection, Irrationality};
pub use plane::{fit_integer_plane, integer_plane_from_directions, IntegerPlane, PlaneFit, PlaneFitOptions};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("degenerate lattice: triple product {triple} is below tolerance {tolerance}")]
    DegenerateLattice { triple: f64, tolerance: f64 },
    #[error("planck scale must be positive and finite, got {0}")]
    BadPlanckScale(f64),
    #[error("mean-direction samples are collinear; no plane can be fitted")]
    CollinearSamples,
    #[error("no integer plane with entries up to {bound} fits the samples (residual {residual:.3e})")]
    NoIntegerFit { bound: i64, residual: f64 },
    #[error("zero direction vector")]
    ZeroDirection,
}

/// Direct lattice `l1, l2, l3` with its dual `g1, g2, g3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeBasis {
    pub direct: [Vec3; 3],
    pub reciprocal: [Vec3; 3],
    pub planck_scale: f64,
}

impl Default for LatticeBasis {
    fn default() -> Self {
        Self::cubic()
    }
}

impl LatticeBasis {
    /// Unit cubic lattice with `planck_scale = 1`; the reciprocal lattice is `Z^3`.
    pub fn cubic() -> Self {
        reciprocal_basis(Vec3::x(), Vec3::y(), Vec3::z(), 1.0).expect("unit cube is regular")
    }

    /// Matrix whose columns are `g1, g2, g3`.
    pub fn reciprocal_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&self.reciprocal)
    }

    /// Matrix whose columns are `l1, l2, l3`.
    pub fn direct_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&self.direct)
    }

    pub fn is_identity(&self) -> bool {
        self.planck_scale == 1.0
            && self.direct[0] == Vec3::x()
            && self.direct[1] == Vec3::y()
            && self.direct[2] == Vec3::z()
    }

    /// Coordinates of `p` in the reciprocal basis.
    pub fn to_fractional(&self, p: &Vec3) -> Vec3 {
        Vec3::new(p.dot(&self.direct[0]), p.dot(&self.direct[1]), p.dot(&self.direct[2])) / self.planck_scale
    }

    /// Inverse of [`to_fractional`](Self::to_fractional).
    pub fn to_cartesian(&self, x: &Vec3) -> Vec3 {
        self.reciprocal[0] * x[0] + self.reciprocal[1] * x[1] + self.reciprocal[2] * x[2]
    }

    /// Reciprocal lattice vector `n1 g1 + n2 g2 + n3 g3`.
    pub fn lattice_vector(&self, n: [i64; 3]) -> Vec3 {
        self.to_cartesian(&Vec3::new(n[0] as f64, n[1] as f64, n[2] as f64))
    }

    /// Covariant components `(B, g_i)` of a direction.
    pub fn reciprocal_projections(&self, b: &Vec3) -> Vec3 {
        Vec3::new(
            b.dot(&self.reciprocal[0]),
            b.dot(&self.reciprocal[1]),
            b.dot(&self.reciprocal[2]),
        )
    }

    /// Cartesian normal of the integral plane `n^i [x]_i = 0`.
    pub fn plane_normal(&self, n: [i64; 3]) -> Vec3 {
        (self.direct[0] * n[0] as f64 + self.direct[1] * n[1] as f64 + self.direct[2] * n[2] as f64) / self.planck_scale
    }

    /// `max_{i,j} |<g_i, l_j> - planck_scale * delta_ij|`.
    pub fn duality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { self.planck_scale } else { 0.0 };
                worst = worst.max((self.reciprocal[i].dot(&self.direct[j]) - target).abs());
            }
        }
        worst
    }

    /// Volume of the reciprocal cell.
    pub fn reciprocal_volume(&self) -> f64 {
        self.reciprocal_matrix().determinant().abs()
    }
}

/// Builds the reciprocal basis `g1 = s (l2 x l3) / (l1, l2, l3)` and cyclic.
pub fn reciprocal_basis(l1: Vec3, l2: Vec3, l3: Vec3, planck_scale: f64) -> Result<LatticeBasis, LatticeError> {
    if !(planck_scale.is_finite() && planck_scale > 0.0) {
        return Err(LatticeError::BadPlanckScale(planck_scale));
    }
    let triple = l1.dot(&l2.cross(&l3));
    let tolerance = 1e-12 * l1.norm() * l2.norm() * l3.norm();
    if !(triple.abs() >= tolerance) || triple == 0.0 {
        return Err(LatticeError::DegenerateLattice { triple, tolerance });
    }
    let g1 = l2.cross(&l3) * (planck_scale / triple);
    let g2 = l3.cross(&l1) * (planck_scale / triple);
    let g3 = l1.cross(&l2) * (planck_scale / triple);
    Ok(LatticeBasis {
        direct: [l1, l2, l3],
        reciprocal: [g1, g2, g3],
        planck_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_cube_with_two_pi_scale() {
        let b = reciprocal_basis(Vec3::x(), Vec3::y(), Vec3::z(), 2.0 * PI).unwrap();
        for (g, e) in b.reciprocal.iter().zip([Vec3::x(), Vec3::y(), Vec3::z()]) {
            assert!((g - e * 2.0 * PI).norm() < 1e-14);
        }
    }

    #[test]
    fn sheared_lattice() {
        let b = reciprocal_basis(
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            1.0,
        )
        .unwrap();
        let expected = [
            Vec3::new(1.0, -1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        for (g, e) in b.reciprocal.iter().zip(expected) {
            assert!((g - e).norm() < 1e-14, "{g:?} vs {e:?}");
        }
        // direct multiplication check of <g_i, l_j> = delta_ij
        assert!(b.duality_error() < 1e-14);
    }

    #[test]
    fn coplanar_is_degenerate() {
        let l1 = Vec3::new(1.0, 0.2, 0.0);
        let l2 = Vec3::new(0.3, 1.0, 0.5);
        let err = reciprocal_basis(l1, l2, l1 + l2, 1.0).unwrap_err();
        assert!(matches!(err, LatticeError::DegenerateLattice { .. }));
    }

    #[test]
    fn fractional_roundtrip() {
        let b = reciprocal_basis(
            Vec3::new(1.0, 0.1, 0.0),
            Vec3::new(0.2, 0.9, 0.3),
            Vec3::new(0.0, -0.4, 1.2),
            2.5,
        )
        .unwrap();
        let p = Vec3::new(0.3, -1.7, 2.2);
        let x = b.to_fractional(&p);
        assert!((b.to_cartesian(&x) - p).norm() < 1e-12);
        let g = b.lattice_vector([1, -2, 3]);
        let xg = b.to_fractional(&g);
        assert!((xg - Vec3::new(1.0, -2.0, 3.0)).norm() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn duality_holds_for_random_lattices(
            a in proptest::array::uniform9(-2.0f64..2.0),
            scale in 0.1f64..10.0,
        ) {
            let l1 = Vec3::new(a[0], a[1], a[2]) + Vec3::x() * 3.0;
            let l2 = Vec3::new(a[3], a[4], a[5]) + Vec3::y() * 3.0;
            let l3 = Vec3::new(a[6], a[7], a[8]) + Vec3::z() * 3.0;
            let b = reciprocal_basis(l1, l2, l3, scale).unwrap();
            proptest::prop_assert!(b.duality_error() < 1e-10 * scale);
        }
    }
}
