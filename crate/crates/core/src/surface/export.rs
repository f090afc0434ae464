use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{PeriodicMesh, SurfaceComponent};
use crate::lattice::integer::IVec3;
use crate::lattice::LatticeBasis;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub triangles: usize,
    pub euler: i64,
    pub genus: usize,
    pub rank: Option<usize>,
    pub homology: Option<IVec3>,
    pub periods: Vec<IVec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub level: f64,
    pub grid_n: usize,
    pub vertices: usize,
    pub triangles: usize,
    pub max_residual: f64,
    pub components: Vec<ComponentReport>,
    pub total_homology: IVec3,
}

pub fn topology_report(mesh: &PeriodicMesh, comps: &[SurfaceComponent]) -> TopologyReport {
    let mut total = [0i64; 3];
    for c in comps {
        if let Some(h) = c.homology_class {
            for i in 0..3 {
                total[i] += h[i];
            }
        }
    }
    TopologyReport {
        level: mesh.level,
        grid_n: mesh.grid_n,
        vertices: mesh.vertices.len(),
        triangles: mesh.triangles.len(),
        max_residual: mesh.max_residual(),
        components: comps
            .iter()
            .map(|c| ComponentReport {
                triangles: c.triangles.len(),
                euler: c.euler,
                genus: c.genus,
                rank: c.rank,
                homology: c.homology_class,
                periods: c.period_lattice.clone(),
            })
            .collect(),
        total_homology: total,
    }
}

/// Wavefront OBJ in Cartesian coordinates. Each face is preceded by a
/// `# wrap` comment with the cell shift of its three corners.
pub fn write_obj<W: Write>(mesh: &PeriodicMesh, basis: &LatticeBasis, mut out: W) -> io::Result<()> {
    writeln!(out, "# level {}", mesh.level)?;
    writeln!(out, "# grid {}", mesh.grid_n)?;
    for v in &mesh.vertices {
        let p = basis.to_cartesian(v);
        writeln!(out, "v {:.9} {:.9} {:.9}", p[0], p[1], p[2])?;
    }
    for t in &mesh.triangles {
        let s = t.shift;
        writeln!(
            out,
            "# wrap {} {} {} {} {} {} {} {} {}",
            s[0][0], s[0][1], s[0][2], s[1][0], s[1][1], s[1][2], s[2][0], s[2][1], s[2][2]
        )?;
        writeln!(out, "f {} {} {}", t.v[0] + 1, t.v[1] + 1, t.v[2] + 1)?;
    }
    Ok(())
}
