//! Electron orbits: sections of the Fermi surface by planes orthogonal to B.

mod analysis;
mod classify;
mod interval;
mod seed;
mod separatrix;
mod trace;

pub use analysis::{growth_exponent, mean_direction_and_strip, real_space_projection, DirectionStrip};
pub use classify::{classify_chain, ChainClassifier, Checkpoint};
pub use interval::{
    open_energy_interval, open_status, tilted_directions, EnergyInterval, EnergyScan, IntervalOptions, LevelProbe,
    LevelStatus,
};
pub use seed::{seed_orbits, OrbitContext, OrbitFamilies, SeedOptions};
pub use separatrix::{separatrix_graph, SaddleLink, SeparatrixGraph};
pub use trace::{project_to_curve, trace};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::integer::IVec3;
use crate::lattice::{FieldDirection, Vec3};
use crate::surface::critical::plane_frame;
use crate::surface::SurfaceError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("seed could not be projected onto the orbit")]
    SeedOffSurface,
    #[error("step size collapsed below {min_step} at arc {arc}")]
    StepCollapse { arc: f64, min_step: f64 },
    #[error("trajectory is not directed")]
    NotDirected,
    #[error("energy grid {0} is below the minimum 16")]
    GridTooSmall(usize),
    #[error("open-orbit energies are not connected at this resolution")]
    NonConnectedDetection(Box<EnergyScan>),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OrbitClass {
    Closed,
    OpenPeriodic,
    OpenQuasiperiodic,
    ChaoticDirected,
    ChaoticWandering,
    Singular,
    Undecided,
}

impl OrbitClass {
    /// Open orbits with a well defined mean direction.
    pub fn is_open(self) -> bool {
        matches!(self, OrbitClass::OpenPeriodic | OrbitClass::OpenQuasiperiodic)
    }

    pub fn is_directed(self) -> bool {
        self.is_open() || self == OrbitClass::ChaoticDirected
    }
}

/// The plane `B . p = h` with an orthonormal in-plane frame `(u, v)`, `u x v = B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneSlice {
    pub b: Vec3,
    pub h: f64,
    pub u: Vec3,
    pub v: Vec3,
}

impl PlaneSlice {
    pub fn new(b: &Vec3, h: f64) -> Self {
        let b = b.normalize();
        let (u, v) = plane_frame(&b);
        Self { b, h, u, v }
    }

    pub fn from_direction(dir: &FieldDirection, h: f64) -> Self {
        Self::new(&dir.unit, h)
    }

    /// Same plane with `u` along the in-plane part of `axis`.
    pub fn with_axis(&self, axis: &Vec3) -> Self {
        let a = axis - self.b * self.b.dot(axis);
        if a.norm() < 1e-12 {
            return self.clone();
        }
        let u = a.normalize();
        Self {
            b: self.b,
            h: self.h,
            u,
            v: self.b.cross(&u),
        }
    }

    /// In-plane coordinates of `p - origin`.
    pub fn coords(&self, p: &Vec3, origin: &Vec3) -> [f64; 2] {
        let d = p - origin;
        [d.dot(&self.u), d.dot(&self.v)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceOptions {
    pub trace_tol: f64,
    pub closure_tol: f64,
    pub min_arc: f64,
    pub max_arc: f64,
    pub dir_tol: f64,
    pub crit_radius: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Turning angle per step the step control aims for, radians.
    pub target_angle: f64,
    /// Reverse the flow direction.
    pub reverse: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            trace_tol: 1e-9,
            closure_tol: 1e-6,
            min_arc: 100.0,
            max_arc: 1e4,
            dir_tol: 1e-2,
            crit_radius: 1e-3,
            max_step: 0.05,
            min_step: 1e-7,
            target_angle: 0.08,
            reverse: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub slice: PlaneSlice,
    /// Sample chain on the universal cover, Cartesian.
    pub points: Vec<Vec3>,
    pub arc_length: f64,
    pub class: OrbitClass,
    pub eta: Option<Vec3>,
    pub strip_width: Option<f64>,
    pub period_vector: Option<IVec3>,
    /// Classified at the end of the budget without full confirmation.
    pub low_accuracy: bool,
    /// Largest constraint residual along the chain.
    pub max_drift: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn start(&self) -> Vec3 {
        self.points[0]
    }

    pub fn end(&self) -> Vec3 {
        *self.points.last().unwrap()
    }

    /// Drops the sample chain, keeping endpoints.
    pub fn compact(&mut self) {
        if self.points.len() > 2 {
            let (a, b) = (self.start(), self.end());
            self.points = vec![a, b];
        }
    }
}
