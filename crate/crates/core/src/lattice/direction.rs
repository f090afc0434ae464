use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::integer::{self, canonical, height, IVec3};
use super::{LatticeBasis, LatticeError, Vec3};

/// Dimension over Q of the span of `(B, g1), (B, g2), (B, g3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Irrationality {
    Irr1,
    Irr2,
    Irr3,
    Undetermined,
}

impl Irrationality {
    /// True for rational directions and directions of irrationality 2.
    pub fn is_special(self) -> bool {
        matches!(self, Irrationality::Irr1 | Irrationality::Irr2)
    }
}

/// A magnetic field direction together with its rational structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDirection {
    pub unit: Vec3,
    pub irrationality: Irrationality,
    /// Independent integer relations `m` with `sum m_i (B, g_i) = 0`.
    pub relations: Vec<IVec3>,
    /// Set when the direction was given exactly as rationals.
    pub exact: bool,
}

impl FieldDirection {
    /// Direction with no rational structure attached (tagged `Undetermined`).
    pub fn unclassified(b: Vec3) -> Result<Self, LatticeError> {
        let n = b.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(LatticeError::ZeroDirection);
        }
        Ok(Self {
            unit: b / n,
            irrationality: Irrationality::Undetermined,
            relations: Vec::new(),
            exact: false,
        })
    }

    /// The antipodal direction; the rational structure is unchanged.
    pub fn reversed(&self) -> Self {
        Self {
            unit: -self.unit,
            ..self.clone()
        }
    }

    /// True when `g_n` lies in the plane orthogonal to this direction.
    pub fn annihilates(&self, basis: &LatticeBasis, n: IVec3, tol: f64) -> bool {
        let g = basis.lattice_vector(n);
        let norm = g.norm();
        norm > 0.0 && self.unit.dot(&g).abs() <= tol * norm
    }
}

/// Searches integer relations among the covariant components of `b`.
///
/// Every coefficient vector with `|m_i| <= height_bound` is examined: for each
/// pair of free coefficients the third is the nearest integer, which is the
/// only candidate able to pass the residual test. A relation is accepted when
/// `|m . b| / (|m| |b|) < tol`. Relations that appear only above half the
/// height bound make the result `Undetermined`.
pub fn classify_direction(
    b: Vec3,
    basis: &LatticeBasis,
    height_bound: i64,
    tol: f64,
) -> Result<FieldDirection, LatticeError> {
    let mut dir = FieldDirection::unclassified(b)?;
    let height_bound = height_bound.max(1);
    let proj = basis.reciprocal_projections(&dir.unit);
    let pn = proj.norm();
    let proj = proj / pn;

    // solve for the coordinate with the largest magnitude
    let k = (0..3).max_by(|&a, &c| proj[a].abs().total_cmp(&proj[c].abs())).unwrap();
    let (i, j) = ((k + 1) % 3, (k + 2) % 3);
    let mut found: Vec<IVec3> = Vec::new();
    for mi in -height_bound..=height_bound {
        for mj in -height_bound..=height_bound {
            let target = -(mi as f64 * proj[i] + mj as f64 * proj[j]) / proj[k];
            let mk = target.round();
            if mk.abs() > height_bound as f64 {
                continue;
            }
            let mut m = [0i64; 3];
            m[i] = mi;
            m[j] = mj;
            m[k] = mk as i64;
            if integer::is_zero(&m) {
                continue;
            }
            let mv = Vec3::new(m[0] as f64, m[1] as f64, m[2] as f64);
            let residual = mv.dot(&proj).abs() / mv.norm();
            if residual < tol {
                let c = canonical(m);
                if c == m || c == [-m[0], -m[1], -m[2]] {
                    found.push(c);
                }
            }
        }
    }
    found.sort_by_key(|m| (height(m), *m));
    found.dedup();

    let reliable: Vec<IVec3> = found
        .iter()
        .copied()
        .filter(|m| 2 * height(m) <= height_bound)
        .collect();
    let reliable_basis = integer::hermite_basis(&reliable);
    let all_basis = integer::hermite_basis(&found);
    dir.relations = reliable_basis.clone();
    dir.irrationality = if all_basis.len() > reliable_basis.len() {
        dir.relations = all_basis;
        Irrationality::Undetermined
    } else {
        match reliable_basis.len() {
            0 => Irrationality::Irr3,
            1 => Irrationality::Irr2,
            _ => Irrationality::Irr1,
        }
    };
    Ok(dir)
}

/// Direction given exactly by rational covariant components
/// `(B, g1) : (B, g2) : (B, g3)`. Such a direction is always rational.
pub fn classify_exact(components: [Ratio<i64>; 3], basis: &LatticeBasis) -> Result<FieldDirection, LatticeError> {
    let lcm = components.iter().fold(1i64, |acc, r| num_integer::lcm(acc, *r.denom()));
    let ints: IVec3 = [0, 1, 2].map(|i| (components[i] * lcm).to_integer());
    if integer::is_zero(&ints) {
        return Err(LatticeError::ZeroDirection);
    }
    let ints = canonical(ints);
    // B = sum c_i l_i / s has (B, g_j) = c_j
    let b = (basis.direct[0] * ints[0] as f64 + basis.direct[1] * ints[1] as f64 + basis.direct[2] * ints[2] as f64)
        / basis.planck_scale;
    let sign = components
        .iter()
        .find(|r| *r.numer() != 0)
        .map(|r| if *r < Ratio::from_integer(0) { -1.0 } else { 1.0 })
        .unwrap_or(1.0);
    let mut dir = FieldDirection::unclassified(b * sign)?;
    dir.irrationality = Irrationality::Irr1;
    dir.relations = integer::orthogonal_pair(ints).to_vec();
    dir.exact = true;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> LatticeBasis {
        LatticeBasis::cubic()
    }

    #[test]
    fn axis_direction_is_rational() {
        let d = classify_direction(Vec3::new(1.0, 0.0, 0.0), &cubic(), 50, 1e-9).unwrap();
        assert_eq!(d.irrationality, Irrationality::Irr1);
        assert_eq!(d.relations, vec![[0, 1, 0], [0, 0, 1]]);
    }

    #[test]
    fn one_rational_hyperplane() {
        let d = classify_direction(Vec3::new(1.0, 2f64.sqrt(), 0.0), &cubic(), 50, 1e-9).unwrap();
        assert_eq!(d.irrationality, Irrationality::Irr2);
        assert_eq!(d.relations, vec![[0, 0, 1]]);
    }

    #[test]
    fn generic_direction_has_no_relations() {
        let d = classify_direction(Vec3::new(1.0, 2f64.sqrt(), 3f64.sqrt()), &cubic(), 50, 1e-10).unwrap();
        assert_eq!(d.irrationality, Irrationality::Irr3);
        assert!(d.relations.is_empty());
    }

    #[test]
    fn relation_only_at_large_height_is_undetermined() {
        // (B, g) proportional to (1, 37/41, 0.5 * sqrt 2): relation (37, -41, 0) has height 41 > 25
        let b = Vec3::new(41.0, 37.0, 41.0 * 0.5 * 2f64.sqrt());
        let d = classify_direction(b, &cubic(), 50, 1e-9).unwrap();
        assert_eq!(d.irrationality, Irrationality::Undetermined);
        let d = classify_direction(b, &cubic(), 100, 1e-9).unwrap();
        assert_eq!(d.irrationality, Irrationality::Irr2);
    }

    #[test]
    fn antipodes_agree() {
        for b in [
            Vec3::new(1.0, 2.0, 3.0),
            Vec3::new(0.3, 2f64.sqrt(), 0.0),
            Vec3::new(0.1, 0.7, 5f64.sqrt()),
        ] {
            let p = classify_direction(b, &cubic(), 30, 1e-9).unwrap();
            let m = classify_direction(-b, &cubic(), 30, 1e-9).unwrap();
            assert_eq!(p.irrationality, m.irrationality);
            assert_eq!(p.relations, m.relations);
        }
    }

    #[test]
    fn exact_rational_input() {
        let r = |n, d| Ratio::new(n, d);
        let d = classify_exact([r(1, 2), r(0, 1), r(3, 4)], &cubic()).unwrap();
        assert!(d.exact);
        assert_eq!(d.irrationality, Irrationality::Irr1);
        assert!((d.unit - Vec3::new(2.0, 0.0, 3.0).normalize()).norm() < 1e-15);
        for m in &d.relations {
            assert_eq!(integer::dot(*m, [2, 0, 3]), 0);
        }
        assert!(classify_exact([r(0, 1); 3], &cubic()).is_err());
    }
}
