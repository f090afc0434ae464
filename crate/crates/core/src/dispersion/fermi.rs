use serde::{Deserialize, Serialize};

use super::{DispersionError, DispersionModel, EnergyLevel};
use crate::lattice::Vec3;

/// Fermi-Dirac occupation of the state at `p`. At `t = 0` this is the step
/// function with value 1/2 on the Fermi surface.
pub fn fermi_occupation(
    model: &DispersionModel,
    level: &EnergyLevel,
    t: f64,
    p: &Vec3,
) -> Result<f64, DispersionError> {
    if !(t >= 0.0) {
        return Err(DispersionError::NegativeTemperature(t));
    }
    Ok(occupation(model.evaluate(p) - level.value, t))
}

pub(crate) fn occupation(de: f64, t: f64) -> f64 {
    if t == 0.0 {
        return if de < 0.0 {
            1.0
        } else if de > 0.0 {
            0.0
        } else {
            0.5
        };
    }
    let z = de / t;
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetCurrent {
    /// `integral grad e * f` over one reciprocal cell.
    pub current: Vec3,
    /// `integral |grad e|` over the same cell, the natural size of `current`.
    pub scale: f64,
}

/// Midpoint-rule integral of `grad e * f(e)` over the torus on a `grid_n^3` grid.
pub fn net_current(
    model: &DispersionModel,
    level: &EnergyLevel,
    t: f64,
    grid_n: usize,
) -> Result<NetCurrent, DispersionError> {
    if grid_n < 8 {
        return Err(DispersionError::GridTooSmall(grid_n, 8));
    }
    if !(t >= 0.0) {
        return Err(DispersionError::NegativeTemperature(t));
    }
    let h = 1.0 / grid_n as f64;
    let mut current = Vec3::zeros();
    let mut scale = 0.0;
    for i in 0..grid_n {
        for j in 0..grid_n {
            for k in 0..grid_n {
                let x = Vec3::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h);
                let (v, gx) = model.value_grad_frac(&x);
                let g = model.grad_to_cartesian(&gx);
                current += g * occupation(v - level.value, t);
                scale += g.norm();
            }
        }
    }
    let w = model.basis.reciprocal_volume() / (grid_n * grid_n * grid_n) as f64;
    Ok(NetCurrent {
        current: current * w,
        scale: scale * w,
    })
}
