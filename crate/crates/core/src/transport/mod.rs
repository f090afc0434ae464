//! Asymptotic conductivity and resistance tensors in strong magnetic fields.
//!
//! Tensors are stored as exponent matrices: entry `(i, k)` scales as
//! `(omega_B tau)^e_ik` in a frame with `z` along `B`. Coefficients are of
//! order one and are never predicted; they can be supplied for numeric
//! evaluation.

use nalgebra::Matrix3;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::Vec3;
use crate::surface::critical::plane_frame;
use crate::zones::Regime;

pub type Exponent = Ratio<i64>;
pub type ExponentMatrix = [[Exponent; 3]; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("open-orbit tensors need the mean direction of the open orbits")]
    MissingEta,
    #[error("chaotic exponents need 0 < alpha < 1 and 0 < gamma < 1, got alpha={alpha}, gamma={gamma}")]
    BadChaoticParams { alpha: f64, gamma: f64 },
    #[error("no asymptotic tensor for regime {0:?}")]
    UnsupportedRegime(Regime),
    #[error("tensors do not share the field direction or the list is empty")]
    FrameMismatch,
    #[error("mean direction is parallel to the field")]
    DegenerateEta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoefficientTag {
    OrderOne,
    /// Order one inside a zone, vanishing with the open-orbit measure at its special direction.
    VanishingAtZoneCenter,
    /// Antisymmetric Hall part, odd in `B`.
    Skew,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub tag: CoefficientTag,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameRule {
    /// Any in-plane axes.
    Closed,
    /// `x` along the open-orbit mean direction in momentum space.
    OpenEta,
    /// Declared convention: principal axes of the in-plane orbit displacement.
    ChaoticPrincipalAxes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub x: Vec3,
    pub y: Vec3,
    pub z: Vec3,
    pub rule: FrameRule,
    /// Real-space drift direction of open orbits: `eta` turned a quarter turn about `B`.
    pub real_space_drift: Option<Vec3>,
}

impl Frame {
    fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_rows(&[self.x.transpose(), self.y.transpose(), self.z.transpose()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaoticParams {
    pub alpha: f64,
    pub gamma: f64,
    /// In-plane `x` axis; defaults to an arbitrary axis orthogonal to `B`.
    pub axis: Option<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticTensor {
    pub exponents: ExponentMatrix,
    pub coefficients: [[Coefficient; 3]; 3],
    pub frame: Frame,
    /// Overall factor `n e^2 tau / m*`, kept symbolic.
    pub drude_prefactor: bool,
    /// The `(3,3)` entry has an additive `(T / eps_F)^2` floor; the value is the ratio `T / eps_F` if known.
    pub thermal_floor: Option<Option<f64>>,
}

fn r(n: i64) -> Exponent {
    Ratio::from_integer(n)
}

fn int_matrix(m: [[i64; 3]; 3]) -> ExponentMatrix {
    m.map(|row| row.map(r))
}

pub fn closed_exponents() -> ExponentMatrix {
    int_matrix([[-2, -1, -1], [-1, -2, -1], [-1, -1, 0]])
}

pub fn open_exponents() -> ExponentMatrix {
    int_matrix([[-2, -1, -1], [-1, 0, 0], [-1, 0, 0]])
}

pub fn chaotic_exponents(alpha: Exponent, gamma: Exponent) -> ExponentMatrix {
    let one = r(1);
    let beta = one - alpha;
    let two = r(2);
    [
        [-two * alpha, -one, -alpha - gamma],
        [-one, -two * beta, -beta - gamma],
        [-alpha - gamma, -beta - gamma, -two * gamma],
    ]
}

pub fn closed_resistance_exponents() -> ExponentMatrix {
    int_matrix([[0, 1, 0], [1, 0, 0], [0, 0, 0]])
}

pub fn open_resistance_exponents() -> ExponentMatrix {
    int_matrix([[2, 1, 1], [1, 0, 0], [1, 0, 0]])
}

fn coefficients(skew: bool, vanishing: &[(usize, usize)]) -> [[Coefficient; 3]; 3] {
    let mut c = [[Coefficient {
        tag: CoefficientTag::OrderOne,
        value: None,
    }; 3]; 3];
    if skew {
        c[0][1].tag = CoefficientTag::Skew;
        c[1][0].tag = CoefficientTag::Skew;
    }
    for &(i, k) in vanishing {
        c[i][k].tag = CoefficientTag::VanishingAtZoneCenter;
    }
    c
}

fn eta_frame(b: &Vec3, eta: &Vec3) -> Result<Frame, TransportError> {
    let z = b.normalize();
    let x = eta - z * z.dot(eta);
    if x.norm() < 1e-9 * eta.norm().max(1e-300) {
        return Err(TransportError::DegenerateEta);
    }
    let x = x.normalize();
    let y = z.cross(&x);
    Ok(Frame {
        x,
        y,
        z,
        rule: FrameRule::OpenEta,
        real_space_drift: Some(y),
    })
}

fn plain_frame(b: &Vec3, axis: Option<Vec3>, rule: FrameRule) -> Result<Frame, TransportError> {
    let z = b.normalize();
    let x = match axis {
        Some(a) => eta_frame(b, &a)?.x,
        None => plane_frame(&z).0,
    };
    Ok(Frame {
        x,
        y: z.cross(&x),
        z,
        rule,
        real_space_drift: None,
    })
}

/// Exponent matrix of the conductivity tensor for an orbit regime.
///
/// A singular net is treated as closed: its open trajectories have measure zero.
pub fn conductivity_asymptotics(
    regime: Regime,
    eta: Option<Vec3>,
    b: &Vec3,
    chaotic: Option<ChaoticParams>,
) -> Result<AsymptoticTensor, TransportError> {
    let (exponents, coefficients, frame, thermal_floor) = match regime {
        Regime::AllClosed | Regime::SingularNet => (
            closed_exponents(),
            coefficients(true, &[]),
            plain_frame(b, None, FrameRule::Closed)?,
            None,
        ),
        Regime::StableOpen | Regime::PartlyStableOpen | Regime::ChaoticDirected => {
            let eta = eta.ok_or(TransportError::MissingEta)?;
            (
                open_exponents(),
                coefficients(true, &[(1, 1), (1, 2), (2, 1)]),
                eta_frame(b, &eta)?,
                None,
            )
        }
        Regime::ChaoticWandering => {
            let p = chaotic.ok_or(TransportError::BadChaoticParams {
                alpha: f64::NAN,
                gamma: f64::NAN,
            })?;
            let ok = |v: f64| v > 0.0 && v < 1.0;
            if !ok(p.alpha) || !ok(p.gamma) {
                return Err(TransportError::BadChaoticParams {
                    alpha: p.alpha,
                    gamma: p.gamma,
                });
            }
            let q = |v: f64| Ratio::approximate_float(v).unwrap_or_else(|| Ratio::from_integer(0));
            (
                chaotic_exponents(q(p.alpha), q(p.gamma)),
                coefficients(true, &[]),
                plain_frame(b, p.axis, FrameRule::ChaoticPrincipalAxes)?,
                Some(None),
            )
        }
        Regime::Mixed | Regime::Undecided => return Err(TransportError::UnsupportedRegime(regime)),
    };
    Ok(AsymptoticTensor {
        exponents,
        coefficients,
        frame,
        drude_prefactor: true,
        thermal_floor,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Resistance {
    Tensor(AsymptoticTensor),
    /// Only an empirical power law `rho ~ B^a` with `a` in the open range.
    PowerLawRange {
        min: f64,
        max: f64,
    },
}

/// Exponent matrix of the resistance tensor.
pub fn resistance_asymptotics(regime: Regime, eta: Option<Vec3>, b: &Vec3) -> Result<Resistance, TransportError> {
    let (exponents, frame) = match regime {
        Regime::AllClosed | Regime::SingularNet => {
            (closed_resistance_exponents(), plain_frame(b, None, FrameRule::Closed)?)
        }
        Regime::StableOpen | Regime::PartlyStableOpen | Regime::ChaoticDirected => (
            open_resistance_exponents(),
            eta_frame(b, &eta.ok_or(TransportError::MissingEta)?)?,
        ),
        Regime::ChaoticWandering => return Ok(Resistance::PowerLawRange { min: 1.0, max: 2.0 }),
        Regime::Mixed | Regime::Undecided => return Err(TransportError::UnsupportedRegime(regime)),
    };
    Ok(Resistance::Tensor(AsymptoticTensor {
        exponents,
        coefficients: coefficients(true, &[]),
        frame,
        drude_prefactor: false,
        thermal_floor: None,
    }))
}

/// In-plane resistance scale `B^2 cos^2(angle) rho0` for open orbits, with
/// `angle` measured from the zero-conductivity axis.
pub fn open_resistance_scale(field: f64, angle: f64, rho0: f64) -> f64 {
    field * field * angle.cos().powi(2) * rho0
}

impl AsymptoticTensor {
    pub fn with_coefficients(mut self, values: [[f64; 3]; 3]) -> Self {
        for i in 0..3 {
            for k in 0..3 {
                self.coefficients[i][k].value = Some(values[i][k]);
            }
        }
        self
    }

    /// Scales the coefficients that vanish at zone centers by the open-orbit
    /// phase-space fraction.
    pub fn with_open_fraction(mut self, fraction: f64) -> Self {
        for row in &mut self.coefficients {
            for c in row.iter_mut() {
                if c.tag == CoefficientTag::VanishingAtZoneCenter {
                    c.value = Some(c.value.unwrap_or(1.0) * fraction);
                }
            }
        }
        self
    }

    /// Numeric tensor in its own frame. Missing coefficients are taken as one,
    /// with opposite signs across the diagonal for skew entries.
    pub fn evaluate(&self, omega_tau: f64) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for i in 0..3 {
            for k in 0..3 {
                let c = self.coefficients[i][k];
                let default = if c.tag == CoefficientTag::Skew && i > k {
                    -1.0
                } else {
                    1.0
                };
                let e = self.exponents[i][k];
                let e = *e.numer() as f64 / *e.denom() as f64;
                m[(i, k)] = c.value.unwrap_or(default) * omega_tau.powf(e);
            }
        }
        if let Some(Some(t)) = self.thermal_floor {
            m[(2, 2)] += t * t;
        }
        m
    }

    /// Numeric tensor in laboratory coordinates.
    pub fn evaluate_lab(&self, omega_tau: f64) -> Matrix3<f64> {
        let r = self.frame.rotation();
        r.transpose() * self.evaluate(omega_tau) * r
    }

    /// Exponents of the tensor seen in `target`; each entry takes the largest
    /// exponent among the source entries it mixes.
    pub fn exponents_in(&self, target: &Frame) -> ExponentMatrix {
        let m = target.rotation() * self.frame.rotation().transpose();
        let mut out = [[r(i64::MIN / 4); 3]; 3];
        for i in 0..3 {
            for k in 0..3 {
                for j in 0..3 {
                    for l in 0..3 {
                        if (m[(i, j)] * m[(k, l)]).abs() > 1e-12 {
                            out[i][k] = out[i][k].max(self.exponents[j][l]);
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSum {
    pub frame: Frame,
    pub omega_tau: f64,
    pub exponents: ExponentMatrix,
    pub value: Matrix3<f64>,
}

/// Sum of the conductivities of several surface components in the frame of the first.
pub fn sum_components(tensors: &[AsymptoticTensor], omega_tau: f64) -> Result<ComponentSum, TransportError> {
    let first = tensors.first().ok_or(TransportError::FrameMismatch)?;
    let frame = first.frame;
    if tensors.iter().any(|t| (t.frame.z - frame.z).norm() > 1e-9) {
        return Err(TransportError::FrameMismatch);
    }
    let rot = frame.rotation();
    let mut value = Matrix3::zeros();
    let mut exponents = [[r(i64::MIN / 4); 3]; 3];
    for t in tensors {
        value += rot * t.evaluate_lab(omega_tau) * rot.transpose();
        let e = t.exponents_in(&frame);
        for i in 0..3 {
            for k in 0..3 {
                exponents[i][k] = exponents[i][k].max(e[i][k]);
            }
        }
    }
    Ok(ComponentSum {
        frame,
        omega_tau,
        exponents,
        value,
    })
}

/// Log-log slopes of `|f(w)_ik|` between consecutive `omega_taus`, averaged.
pub fn loglog_slopes(f: impl Fn(f64) -> Matrix3<f64>, omega_taus: &[f64]) -> [[f64; 3]; 3] {
    let mut s = [[0.0; 3]; 3];
    let pairs = omega_taus.len().saturating_sub(1).max(1) as f64;
    for w in omega_taus.windows(2) {
        let (a, b) = (f(w[0]), f(w[1]));
        let dl = (w[1] / w[0]).ln();
        for i in 0..3 {
            for k in 0..3 {
                s[i][k] += (b[(i, k)].abs().ln() - a[(i, k)].abs().ln()) / dl / pairs;
            }
        }
    }
    s
}

/// Largest deviation between the log-log slopes of the inverse of `sigma`
/// and the expected resistance exponents.
pub fn inversion_slope_error(sigma: &AsymptoticTensor, expected: &ExponentMatrix, omega_taus: &[f64]) -> f64 {
    let slopes = loglog_slopes(
        |w| {
            sigma
                .evaluate(w)
                .try_inverse()
                .unwrap_or_else(|| Matrix3::from_element(f64::NAN))
        },
        omega_taus,
    );
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for k in 0..3 {
            let e = expected[i][k];
            let d = (slopes[i][k] - *e.numer() as f64 / *e.denom() as f64).abs();
            worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chaotic_half_is_symmetric() {
        let t = conductivity_asymptotics(
            Regime::ChaoticWandering,
            None,
            &Vec3::z(),
            Some(ChaoticParams {
                alpha: 0.5,
                gamma: 0.5,
                axis: None,
            }),
        )
        .unwrap();
        for i in 0..3 {
            for k in 0..3 {
                assert_eq!(t.exponents[i][k], t.exponents[k][i]);
            }
        }
        assert_eq!(t.exponents[2][2], r(-1));
        assert_eq!(t.exponents[0][0], r(-1));
        assert_eq!(t.thermal_floor, Some(None));
    }

    #[test]
    fn frame_follows_eta() {
        let b = Vec3::new(0.1, 0.0, 1.0);
        let t = conductivity_asymptotics(Regime::StableOpen, Some(Vec3::new(1.0, 1.0, 0.0)), &b, None).unwrap();
        let f = t.frame;
        assert!(f.x.dot(&f.z).abs() < 1e-12 && f.y.dot(&f.z).abs() < 1e-12);
        assert!((f.x.cross(&f.y) - f.z).norm() < 1e-12);
        assert_eq!(f.real_space_drift, Some(f.y));
    }

    #[test]
    fn thermal_floor_keeps_longitudinal_finite() {
        let mut t = conductivity_asymptotics(
            Regime::ChaoticWandering,
            None,
            &Vec3::z(),
            Some(ChaoticParams {
                alpha: 0.3,
                gamma: 0.6,
                axis: None,
            }),
        )
        .unwrap();
        t.thermal_floor = Some(Some(0.01));
        assert!((t.evaluate(1e12)[(2, 2)] - 1e-4).abs() < 1e-8);
    }

    #[test]
    fn vanishing_coefficients_scale_with_fraction() {
        let t = conductivity_asymptotics(Regime::StableOpen, Some(Vec3::x()), &Vec3::z(), None)
            .unwrap()
            .with_open_fraction(0.1);
        let m = t.evaluate(1e3);
        assert!((m[(1, 1)] - 0.1).abs() < 1e-12);
        assert!((m[(0, 0)] - 1e-6).abs() < 1e-18);
    }
}
