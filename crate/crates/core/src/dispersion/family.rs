use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{DispersionError, DispersionModel, EnergyLevel, Term};

/// `alpha sum cos + beta sum cos cos + delta cos cos cos` on the cubic lattice.
pub fn make_anferms(alpha: f64, beta: f64, delta: f64) -> Result<DispersionModel, DispersionError> {
    if !(alpha.is_finite() && beta.is_finite() && delta.is_finite()) {
        return Err(DispersionError::NonFinite);
    }
    if alpha == 0.0 && beta == 0.0 && delta == 0.0 {
        return Err(DispersionError::AllZeroAmplitudes);
    }
    let mut terms = Vec::new();
    if alpha != 0.0 {
        terms.extend([[1, 0, 0], [0, 1, 0], [0, 0, 1]].map(|k| Term::cos(k, alpha)));
    }
    if beta != 0.0 {
        terms.extend([[1, 1, 0], [0, 1, 1], [1, 0, 1]].map(|k| Term::cos(k, beta)));
    }
    if delta != 0.0 {
        terms.push(Term::cos([1, 1, 1], delta));
    }
    DispersionModel::cubic(format!("anferms({alpha},{beta},{delta})"), terms, 0.0)
}

/// A thin net of tubes along the coordinate axes together with its level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinNet {
    pub model: DispersionModel,
    pub level: EnergyLevel,
    pub tube_radius: f64,
}

/// Net of tubes around the coordinate axes with half-width `tube_radius`
/// (cell units) at the middle of each tube.
///
/// With `alpha = 1`, `beta = -1/2`, `delta = 0` the energy equals
/// `3/2 - (a1 a2 + a2 a3 + a3 a1) / 2` with `a_i = 1 - cos(2 pi x_i)`, so the
/// maximum is attained exactly on the coordinate axes. The level through
/// `(1/2, r, 0)` is `1/2 + cos(2 pi r)`.
pub fn make_thin_net(tube_radius: f64) -> Result<ThinNet, DispersionError> {
    if !(tube_radius > 0.0 && tube_radius < 0.5) {
        return Err(DispersionError::RadiusOutOfRange(tube_radius));
    }
    let mut model = make_anferms(1.0, -0.5, 0.0)?;
    model.name = format!("thin_net({tube_radius})");
    Ok(ThinNet {
        model,
        level: EnergyLevel::new(0.5 + (TAU * tube_radius).cos()),
        tube_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Vec3;

    #[test]
    fn anferms_terms() {
        let m = make_anferms(1.0, 0.3, 0.1).unwrap();
        assert_eq!(m.terms.len(), 7);
        assert!((m.evaluate(&Vec3::zeros()) - 4.0).abs() < 1e-14);
        let m = make_anferms(0.0, 0.0, 1.0).unwrap();
        assert!(m.evaluate(&Vec3::new(0.25, 0.3, 0.1)).abs() < 1e-15);
        assert_eq!(
            make_anferms(0.0, 0.0, 0.0).unwrap_err(),
            DispersionError::AllZeroAmplitudes
        );
    }

    #[test]
    fn thin_net_closed_form() {
        let net = make_thin_net(0.1).unwrap();
        let m = &net.model;
        // maximum 3/2 along the axes
        for t in [0.0, 0.17, 0.5, 0.83] {
            assert!((m.evaluate(&Vec3::new(t, 0.0, 0.0)) - 1.5).abs() < 1e-14);
            assert!((m.evaluate(&Vec3::new(0.0, 0.0, t)) - 1.5).abs() < 1e-14);
        }
        assert!((m.evaluate(&Vec3::new(0.5, 0.5, 0.5)) + 4.5).abs() < 1e-14);
        // tube boundary at the tube midpoint
        assert!((m.evaluate(&Vec3::new(0.5, 0.1, 0.0)) - net.level.value).abs() < 1e-14);
        assert!((m.evaluate(&Vec3::new(0.0, 0.5, 0.1)) - net.level.value).abs() < 1e-14);
        assert!((net.level.value - 1.309_016_994_374_947_4).abs() < 1e-12);
    }

    #[test]
    fn thin_net_radius_bounds() {
        assert!(make_thin_net(0.45).is_ok());
        assert_eq!(make_thin_net(0.6).unwrap_err(), DispersionError::RadiusOutOfRange(0.6));
        assert!(make_thin_net(0.0).is_err());
    }
}
