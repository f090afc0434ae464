//! Level surfaces of the dispersion in the 3-torus and their topology.

pub(crate) mod critical;
mod export;
mod extract;
pub(crate) mod topology;

pub use critical::{height_critical_points, plane_frame, CriticalIndex, HeightCritical};
pub use export::{topology_report, write_obj, ComponentReport, TopologyReport};
pub use extract::{extract_surface, extract_surface_with, ExtractOptions};
pub use topology::{analyze, components, homology_class, period_lattice_and_rank, SurfaceComponent};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::integer::IVec3;
use crate::lattice::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("grid size {0} is below the minimum 16")]
    GridTooSmall(usize),
    #[error("level {level} does not cross the band (range {min}..{max})")]
    EmptyLevel { level: f64, min: f64, max: f64 },
    #[error("level {level} passes within one cell of a critical point at {point:?} (critical value {critical_value})")]
    SingularLevel {
        level: f64,
        point: [f64; 3],
        critical_value: f64,
    },
    #[error("edge ({0}, {1}) is not shared by exactly two triangles")]
    NonManifoldEdge(u32, u32),
    #[error("triangle winding is inconsistent across edge ({0}, {1})")]
    NonOrientable(u32, u32),
    #[error("Euler characteristic {0} is not that of a closed orientable surface")]
    BadEuler(i64),
    #[error("lift of the component still grows past horizon {0}")]
    HorizonTooSmall(i64),
    #[error("probe line kept hitting triangle edges after {0} retries")]
    DegenerateProbeLine(usize),
    #[error("degenerate critical point of the height function at {point:?} (det {det:.3e})")]
    DegenerateCritical { point: [f64; 3], det: f64 },
}

/// Triangle with integer cell shifts per corner: corner `c` sits at
/// `vertices[v[c]] + shift[c]` in fractional coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triangle {
    pub v: [u32; 3],
    pub shift: [IVec3; 3],
}

impl Triangle {
    /// Wrap vector of the edge from corner `a` to corner `b`.
    pub fn wrap(&self, a: usize, b: usize) -> IVec3 {
        let (sa, sb) = (self.shift[a], self.shift[b]);
        [sb[0] - sa[0], sb[1] - sa[1], sb[2] - sa[2]]
    }
}

/// Closed triangulated level set in the torus, fractional coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicMesh {
    /// Wrapped into `[0, 1)^3`.
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<Triangle>,
    /// `e(vertex) - level` per vertex.
    pub values: Vec<f64>,
    pub level: f64,
    pub grid_n: usize,
}

impl PeriodicMesh {
    /// Lifted corner positions of triangle `t`.
    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let tri = &self.triangles[t];
        [0, 1, 2].map(|c| {
            let s = tri.shift[c];
            self.vertices[tri.v[c] as usize] + Vec3::new(s[0] as f64, s[1] as f64, s[2] as f64)
        })
    }

    pub fn max_residual(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Vertex adjacency lists.
    pub fn vertex_neighbors(&self) -> Vec<Vec<u32>> {
        let mut nb: Vec<Vec<u32>> = vec![Vec::new(); self.vertices.len()];
        for tri in &self.triangles {
            for c in 0..3 {
                let (a, b) = (tri.v[c], tri.v[(c + 1) % 3]);
                nb[a as usize].push(b);
                nb[b as usize].push(a);
            }
        }
        for list in &mut nb {
            list.sort_unstable();
            list.dedup();
        }
        nb
    }
}
