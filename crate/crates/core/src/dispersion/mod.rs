//! Periodic dispersion relations built from cosine products.

mod family;
mod fermi;
pub mod fixtures;

pub use family::{make_anferms, make_thin_net, ThinNet};
pub use fermi::{fermi_occupation, net_current, NetCurrent};

use std::f64::consts::TAU;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::integer::IVec3;
use crate::lattice::{LatticeBasis, Vec3};

/// Largest per-axis frequency supported by the evaluation tables.
pub const MAX_FREQUENCY: i64 = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispersionError {
    #[error("all amplitudes are zero")]
    AllZeroAmplitudes,
    #[error("tube radius {0} is outside (0, 0.5)")]
    RadiusOutOfRange(f64),
    #[error("grid size {0} is below the minimum {1}")]
    GridTooSmall(usize, usize),
    #[error("temperature must be nonnegative, got {0}")]
    NegativeTemperature(f64),
    #[error("frequency {0:?} exceeds the supported bound {MAX_FREQUENCY}")]
    FrequencyTooLarge(IVec3),
    #[error("non-finite parameter")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TermForm {
    #[default]
    CosProduct,
}

/// `amp * prod_i cos(2 pi k_i [p]_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub k: IVec3,
    pub amp: f64,
    #[serde(default)]
    pub form: TermForm,
}

impl Term {
    pub fn cos(k: IVec3, amp: f64) -> Self {
        Self {
            k,
            amp,
            form: TermForm::CosProduct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLevel {
    pub value: f64,
    #[serde(default)]
    pub band: usize,
}

impl EnergyLevel {
    pub fn new(value: f64) -> Self {
        Self { value, band: 0 }
    }
}

impl From<f64> for EnergyLevel {
    fn from(value: f64) -> Self {
        Self::new(value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionModel {
    pub name: String,
    pub terms: Vec<Term>,
    pub offset: f64,
    pub basis: LatticeBasis,
    #[serde(skip)]
    kmax: [usize; 3],
}

/// Value, gradient and Hessian at one point.
#[derive(Debug, Clone, Copy)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec3,
    pub hess: Matrix3<f64>,
}

struct AxisTable {
    c: [f64; MAX_FREQUENCY as usize + 1],
    s: [f64; MAX_FREQUENCY as usize + 1],
}

impl AxisTable {
    fn new(x: f64, kmax: usize) -> Self {
        let mut c = [0.0; MAX_FREQUENCY as usize + 1];
        let mut s = [0.0; MAX_FREQUENCY as usize + 1];
        c[0] = 1.0;
        if kmax > 0 {
            let (s1, c1) = (TAU * x).sin_cos();
            c[1] = c1;
            s[1] = s1;
            for m in 2..=kmax {
                c[m] = 2.0 * c1 * c[m - 1] - c[m - 2];
                s[m] = 2.0 * c1 * s[m - 1] - s[m - 2];
            }
        }
        Self { c, s }
    }

    #[inline]
    fn cos(&self, k: i64) -> f64 {
        self.c[k.unsigned_abs() as usize]
    }

    #[inline]
    fn sin(&self, k: i64) -> f64 {
        let v = self.s[k.unsigned_abs() as usize];
        if k < 0 {
            -v
        } else {
            v
        }
    }
}

impl DispersionModel {
    pub fn new(
        name: impl Into<String>,
        terms: Vec<Term>,
        offset: f64,
        basis: LatticeBasis,
    ) -> Result<Self, DispersionError> {
        let mut model = Self {
            name: name.into(),
            terms,
            offset,
            basis,
            kmax: [0; 3],
        };
        model.validate()?;
        Ok(model)
    }

    /// Cubic lattice with `Gamma* = Z^3`.
    pub fn cubic(name: impl Into<String>, terms: Vec<Term>, offset: f64) -> Result<Self, DispersionError> {
        Self::new(name, terms, offset, LatticeBasis::cubic())
    }

    /// Recomputes cached data; call after deserializing.
    pub fn validate(&mut self) -> Result<(), DispersionError> {
        if !self.offset.is_finite() {
            return Err(DispersionError::NonFinite);
        }
        let mut kmax = [0usize; 3];
        for t in &self.terms {
            if !t.amp.is_finite() {
                return Err(DispersionError::NonFinite);
            }
            for i in 0..3 {
                if t.k[i].abs() > MAX_FREQUENCY {
                    return Err(DispersionError::FrequencyTooLarge(t.k));
                }
                kmax[i] = kmax[i].max(t.k[i].unsigned_abs() as usize);
            }
        }
        if self.terms.iter().all(|t| t.amp == 0.0) {
            return Err(DispersionError::AllZeroAmplitudes);
        }
        self.kmax = kmax;
        Ok(())
    }

    /// Sum of absolute amplitudes; bounds `|e - offset|`.
    pub fn amplitude_scale(&self) -> f64 {
        self.terms.iter().map(|t| t.amp.abs()).sum()
    }

    pub fn evaluate(&self, p: &Vec3) -> f64 {
        self.value_frac(&self.basis.to_fractional(p))
    }

    pub fn gradient(&self, p: &Vec3) -> Vec3 {
        self.value_grad(p).1
    }

    pub fn value_grad(&self, p: &Vec3) -> (f64, Vec3) {
        let (v, gx) = self.value_grad_frac(&self.basis.to_fractional(p));
        (v, self.grad_to_cartesian(&gx))
    }

    pub fn jet(&self, p: &Vec3) -> Jet {
        let j = self.jet_frac(&self.basis.to_fractional(p));
        if self.basis.is_identity() {
            return j;
        }
        let m = self.basis.direct_matrix() / self.basis.planck_scale;
        Jet {
            value: j.value,
            grad: m * j.grad,
            hess: m * j.hess * m.transpose(),
        }
    }

    /// Gradient in fractional coordinates mapped to Cartesian momentum.
    pub fn grad_to_cartesian(&self, gx: &Vec3) -> Vec3 {
        if self.basis.is_identity() {
            *gx
        } else {
            (self.basis.direct[0] * gx[0] + self.basis.direct[1] * gx[1] + self.basis.direct[2] * gx[2])
                / self.basis.planck_scale
        }
    }

    fn tables(&self, x: &Vec3) -> [AxisTable; 3] {
        [
            AxisTable::new(x[0], self.kmax[0]),
            AxisTable::new(x[1], self.kmax[1]),
            AxisTable::new(x[2], self.kmax[2]),
        ]
    }

    /// Energy at fractional coordinates `x`.
    pub fn value_frac(&self, x: &Vec3) -> f64 {
        let t = self.tables(x);
        self.offset
            + self
                .terms
                .iter()
                .map(|term| term.amp * t[0].cos(term.k[0]) * t[1].cos(term.k[1]) * t[2].cos(term.k[2]))
                .sum::<f64>()
    }

    /// Energy and its gradient with respect to fractional coordinates.
    pub fn value_grad_frac(&self, x: &Vec3) -> (f64, Vec3) {
        let t = self.tables(x);
        let mut v = self.offset;
        let mut g = Vec3::zeros();
        for term in &self.terms {
            let c = [t[0].cos(term.k[0]), t[1].cos(term.k[1]), t[2].cos(term.k[2])];
            let s = [t[0].sin(term.k[0]), t[1].sin(term.k[1]), t[2].sin(term.k[2])];
            v += term.amp * c[0] * c[1] * c[2];
            g[0] -= term.amp * TAU * term.k[0] as f64 * s[0] * c[1] * c[2];
            g[1] -= term.amp * TAU * term.k[1] as f64 * c[0] * s[1] * c[2];
            g[2] -= term.amp * TAU * term.k[2] as f64 * c[0] * c[1] * s[2];
        }
        (v, g)
    }

    pub fn jet_frac(&self, x: &Vec3) -> Jet {
        let t = self.tables(x);
        let mut v = self.offset;
        let mut g = Vec3::zeros();
        let mut h = Matrix3::zeros();
        for term in &self.terms {
            let c = [t[0].cos(term.k[0]), t[1].cos(term.k[1]), t[2].cos(term.k[2])];
            let s = [t[0].sin(term.k[0]), t[1].sin(term.k[1]), t[2].sin(term.k[2])];
            let w = [TAU * term.k[0] as f64, TAU * term.k[1] as f64, TAU * term.k[2] as f64];
            let a = term.amp;
            v += a * c[0] * c[1] * c[2];
            for i in 0..3 {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                g[i] -= a * w[i] * s[i] * c[j] * c[k];
                h[(i, i)] -= a * w[i] * w[i] * c[0] * c[1] * c[2];
                let off = a * w[i] * w[j] * s[i] * s[j] * c[k];
                h[(i, j)] += off;
                h[(j, i)] += off;
            }
        }
        Jet {
            value: v,
            grad: g,
            hess: h,
        }
    }

    /// True when every term is even, which holds for all cosine products.
    pub fn is_even(&self) -> bool {
        self.terms.iter().all(|t| t.form == TermForm::CosProduct)
    }

    /// Sampled band extrema on an `n^3` fractional grid, polished by Newton.
    pub fn energy_range(&self, n: usize) -> (f64, f64) {
        let vals = critical_values(self, n);
        let lo = vals.first().copied().unwrap_or(self.offset);
        let hi = vals.last().copied().unwrap_or(self.offset);
        let mut lo_g = f64::INFINITY;
        let mut hi_g = f64::NEG_INFINITY;
        for_grid(n, |x| {
            let v = self.value_frac(&x);
            lo_g = lo_g.min(v);
            hi_g = hi_g.max(v);
        });
        (lo.min(lo_g), hi.max(hi_g))
    }

    /// Locates a critical point of the energy near `x0` (fractional).
    pub fn refine_critical(&self, x0: &Vec3, max_iter: usize) -> Option<Vec3> {
        let mut x = *x0;
        for _ in 0..max_iter {
            let j = self.jet_frac(&x);
            let gn = j.grad.norm();
            if gn < 1e-12 * self.amplitude_scale().max(1e-300) {
                return Some(x);
            }
            // Levenberg damping keeps the step bounded near degenerate Hessians
            let mu = 1e-8 * j.hess.norm().max(1e-12);
            let h2 = j.hess.transpose() * j.hess + Matrix3::identity() * mu;
            let dx = h2.lu().solve(&(j.hess.transpose() * j.grad))?;
            let step = dx.norm();
            let dx = if step > 0.1 { dx * (0.1 / step) } else { dx };
            x -= dx;
            if dx.norm() < 1e-14 {
                let j = self.jet_frac(&x);
                return (j.grad.norm() < 1e-8 * self.amplitude_scale()).then_some(x);
            }
        }
        let j = self.jet_frac(&x);
        (j.grad.norm() < 1e-8 * self.amplitude_scale()).then_some(x)
    }
}

pub(crate) fn for_grid(n: usize, mut f: impl FnMut(Vec3)) {
    let h = 1.0 / n as f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                f(Vec3::new(i as f64 * h, j as f64 * h, k as f64 * h));
            }
        }
    }
}

/// Critical values of the energy found by Newton from the local minima of
/// `|grad e|` on an `n^3` grid. Sorted and deduplicated to 1e-9.
pub fn critical_values(model: &DispersionModel, n: usize) -> Vec<f64> {
    let n = n.max(4);
    let h = 1.0 / n as f64;
    let idx = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
    let mut g2 = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let x = Vec3::new(i as f64 * h, j as f64 * h, k as f64 * h);
                g2[idx(i, j, k)] = model.value_grad_frac(&x).1.norm_squared();
            }
        }
    }
    let mut values = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = g2[idx(i, j, k)];
                let mut is_min = true;
                'nb: for di in [n - 1, 0, 1] {
                    for dj in [n - 1, 0, 1] {
                        for dk in [n - 1, 0, 1] {
                            if (di, dj, dk) == (0, 0, 0) {
                                continue;
                            }
                            if g2[idx((i + di) % n, (j + dj) % n, (k + dk) % n)] < v {
                                is_min = false;
                                break 'nb;
                            }
                        }
                    }
                }
                if !is_min {
                    continue;
                }
                let x = Vec3::new(i as f64 * h, j as f64 * h, k as f64 * h);
                if let Some(c) = model.refine_critical(&x, 60) {
                    values.push(model.value_frac(&c));
                }
            }
        }
    }
    values.sort_by(f64::total_cmp);
    values.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    values
}
