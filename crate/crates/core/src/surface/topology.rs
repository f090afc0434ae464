use std::collections::{HashMap, VecDeque};

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use super::{PeriodicMesh, SurfaceError};
use crate::lattice::integer::{hermite_basis, is_zero, IVec3};

/// One connected component of a periodic mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceComponent {
    pub triangles: Vec<u32>,
    pub vertex_count: usize,
    pub edge_count: usize,
    pub euler: i64,
    pub genus: usize,
    /// Filled by [`period_lattice_and_rank`]; `None` until then.
    pub rank: Option<usize>,
    pub period_lattice: Vec<IVec3>,
    /// Filled by [`homology_class`].
    pub homology_class: Option<IVec3>,
}

/// Neighbor across edge `(c, c+1)` of each triangle, with the edge's local index there.
pub(crate) struct Adjacency {
    pub(crate) across: Vec<[(u32, u8); 3]>,
}

type EdgeKey = (u32, u32, IVec3);

pub(crate) fn adjacency(mesh: &PeriodicMesh) -> Result<Adjacency, SurfaceError> {
    let mut map: HashMap<EdgeKey, Vec<(u32, u8, bool)>> = HashMap::with_capacity(mesh.triangles.len() * 2);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for c in 0..3 {
            let d = (c + 1) % 3;
            let (a, b) = (tri.v[c], tri.v[d]);
            let w = tri.wrap(c, d);
            let nw = [-w[0], -w[1], -w[2]];
            let (key, forward) = if (a, w) >= (b, nw) {
                ((a, b, w), true)
            } else {
                ((b, a, nw), false)
            };
            map.entry(key).or_default().push((t as u32, c as u8, forward));
        }
    }
    let mut across = vec![[(u32::MAX, 0u8); 3]; mesh.triangles.len()];
    for (key, uses) in &map {
        if uses.len() != 2 {
            return Err(SurfaceError::NonManifoldEdge(key.0, key.1));
        }
        let (t0, c0, f0) = uses[0];
        let (t1, c1, f1) = uses[1];
        if f0 == f1 {
            return Err(SurfaceError::NonOrientable(key.0, key.1));
        }
        across[t0 as usize][c0 as usize] = (t1, c1);
        across[t1 as usize][c1 as usize] = (t0, c0);
    }
    Ok(Adjacency { across })
}

/// Connected components with their Euler characteristic and genus.
pub fn components(mesh: &PeriodicMesh) -> Result<Vec<SurfaceComponent>, SurfaceError> {
    let adj = adjacency(mesh)?;
    Ok(components_from(mesh, &adj)?.0)
}

fn components_from(mesh: &PeriodicMesh, adj: &Adjacency) -> Result<(Vec<SurfaceComponent>, Vec<u32>), SurfaceError> {
    let nt = mesh.triangles.len();
    let mut uf = UnionFind::<u32>::new(nt);
    for (t, nb) in adj.across.iter().enumerate() {
        for &(u, _) in nb {
            uf.union(t as u32, u);
        }
    }
    let labels = uf.into_labeling();
    let mut index: HashMap<u32, usize> = HashMap::new();
    let mut comps: Vec<SurfaceComponent> = Vec::new();
    let mut comp_of = vec![0u32; nt];
    for t in 0..nt {
        let next = comps.len();
        let ci = *index.entry(labels[t]).or_insert(next);
        if ci == comps.len() {
            comps.push(SurfaceComponent {
                triangles: Vec::new(),
                vertex_count: 0,
                edge_count: 0,
                euler: 0,
                genus: 0,
                rank: None,
                period_lattice: Vec::new(),
                homology_class: None,
            });
        }
        comps[ci].triangles.push(t as u32);
        comp_of[t] = ci as u32;
    }
    let mut seen = vec![u32::MAX; mesh.vertices.len()];
    for (ci, comp) in comps.iter_mut().enumerate() {
        let mut v = 0;
        for &t in &comp.triangles {
            for &x in &mesh.triangles[t as usize].v {
                if seen[x as usize] != ci as u32 {
                    seen[x as usize] = ci as u32;
                    v += 1;
                }
            }
        }
        let f = comp.triangles.len();
        // closed surface: every edge borders two triangles
        let e = 3 * f / 2;
        comp.vertex_count = v;
        comp.edge_count = e;
        comp.euler = v as i64 - e as i64 + f as i64;
        if comp.euler > 2 || comp.euler % 2 != 0 {
            return Err(SurfaceError::BadEuler(comp.euler));
        }
        comp.genus = ((2 - comp.euler) / 2) as usize;
    }
    Ok((comps, comp_of))
}

/// Period lattice from cycles in the lift of the component to the universal cover.
///
/// Triangles are lifted along a breadth-first spanning tree; every non-tree
/// edge whose two lifts disagree contributes their difference as a period.
pub fn period_lattice_and_rank(
    mesh: &PeriodicMesh,
    component: &SurfaceComponent,
    horizon: i64,
) -> Result<(Vec<IVec3>, usize), SurfaceError> {
    let adj = adjacency(mesh)?;
    period_lattice_with(mesh, &adj, component, horizon)
}

fn period_lattice_with(
    mesh: &PeriodicMesh,
    adj: &Adjacency,
    component: &SurfaceComponent,
    horizon: i64,
) -> Result<(Vec<IVec3>, usize), SurfaceError> {
    let horizon = horizon.max(2);
    let mut lift: HashMap<u32, IVec3> = HashMap::with_capacity(component.triangles.len());
    let mut periods: Vec<IVec3> = Vec::new();
    let Some(&start) = component.triangles.first() else {
        return Ok((Vec::new(), 0));
    };
    lift.insert(start, [0, 0, 0]);
    let mut queue = VecDeque::from([start]);
    while let Some(t) = queue.pop_front() {
        let lt = lift[&t];
        let tri = &mesh.triangles[t as usize];
        for c in 0..3 {
            let (u, cu) = adj.across[t as usize][c];
            let other = &mesh.triangles[u as usize];
            // vertex tri.v[c] is corner (cu + 1) % 3 of the neighbor
            let cu_a = (cu as usize + 1) % 3;
            debug_assert_eq!(other.v[cu_a], tri.v[c]);
            let s_t = tri.shift[c];
            let s_u = other.shift[cu_a];
            let want = [0, 1, 2].map(|i| lt[i] + s_t[i] - s_u[i]);
            match lift.get(&u) {
                None => {
                    if want.iter().any(|x| x.abs() > horizon) {
                        return Err(SurfaceError::HorizonTooSmall(horizon));
                    }
                    lift.insert(u, want);
                    queue.push_back(u);
                }
                Some(have) => {
                    let d = [0, 1, 2].map(|i| want[i] - have[i]);
                    if !is_zero(&d) {
                        periods.push(d);
                    }
                }
            }
        }
    }
    let basis = hermite_basis(&periods);
    let rank = basis.len();
    Ok((basis, rank))
}

const PROBE_RETRIES: usize = 10;

/// Signed intersection numbers of the component with the three loops
/// `x_j, x_k = const` running along each reciprocal basis vector.
pub fn homology_class(mesh: &PeriodicMesh, component: &SurfaceComponent) -> Result<IVec3, SurfaceError> {
    let mut c = [0i64; 3];
    for axis in 0..3 {
        c[axis] = axis_crossings(mesh, &component.triangles, axis)?;
    }
    Ok(c)
}

fn probe_anchor(axis: usize, attempt: usize) -> (f64, f64) {
    let r2 = 2f64.sqrt();
    let r3 = 3f64.sqrt();
    let a = ((attempt as f64 + 1.0) * r2 * (axis as f64 + 1.618_033_988_749_895)).fract();
    let b = ((attempt as f64 + 1.0) * r3 * (axis as f64 + std::f64::consts::E)).fract();
    (a, b)
}

fn axis_crossings(mesh: &PeriodicMesh, triangles: &[u32], axis: usize) -> Result<i64, SurfaceError> {
    let (j, k) = ((axis + 1) % 3, (axis + 2) % 3);
    'attempt: for attempt in 0..PROBE_RETRIES {
        let (a, b) = probe_anchor(axis, attempt);
        let mut count = 0i64;
        for &t in triangles {
            let p = mesh.corners(t as usize);
            let q: [(f64, f64); 3] = p.map(|v| (v[j], v[k]));
            let area = (q[1].0 - q[0].0) * (q[2].1 - q[0].1) - (q[2].0 - q[0].0) * (q[1].1 - q[0].1);
            if area == 0.0 {
                continue;
            }
            let (lo_j, hi_j) = minmax(q.map(|x| x.0));
            let (lo_k, hi_k) = minmax(q.map(|x| x.1));
            for mj in (lo_j - a).ceil() as i64..=(hi_j - a).floor() as i64 {
                for mk in (lo_k - b).ceil() as i64..=(hi_k - b).floor() as i64 {
                    let pt = (a + mj as f64, b + mk as f64);
                    match point_in_triangle(pt, &q, area) {
                        Hit::Inside => count += area.signum() as i64,
                        Hit::Outside => {}
                        Hit::Degenerate => continue 'attempt,
                    }
                }
            }
        }
        return Ok(count);
    }
    Err(SurfaceError::DegenerateProbeLine(PROBE_RETRIES))
}

fn minmax(v: [f64; 3]) -> (f64, f64) {
    (v[0].min(v[1]).min(v[2]), v[0].max(v[1]).max(v[2]))
}

enum Hit {
    Inside,
    Outside,
    Degenerate,
}

fn point_in_triangle(p: (f64, f64), q: &[(f64, f64); 3], area: f64) -> Hit {
    let mut inside = true;
    for e in 0..3 {
        let (a, b) = (q[e], q[(e + 1) % 3]);
        let s = ((b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)) / area;
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        if s.abs() * area.abs() < 1e-12 * len.max(1e-300) {
            return Hit::Degenerate;
        }
        if s < 0.0 {
            inside = false;
        }
    }
    if inside {
        Hit::Inside
    } else {
        Hit::Outside
    }
}

/// Components with genus, period lattice, rank and homology class filled in.
pub fn analyze(mesh: &PeriodicMesh, horizon: i64) -> Result<Vec<SurfaceComponent>, SurfaceError> {
    let adj = adjacency(mesh)?;
    let (mut comps, _) = components_from(mesh, &adj)?;
    for comp in &mut comps {
        let (lattice, rank) = period_lattice_with(mesh, &adj, comp, horizon)?;
        comp.period_lattice = lattice;
        comp.rank = Some(rank);
        comp.homology_class = Some(homology_class(mesh, comp)?);
    }
    Ok(comps)
}

/// Component index of every triangle.
pub(crate) fn triangle_components(mesh: &PeriodicMesh) -> Result<(Vec<SurfaceComponent>, Vec<u32>), SurfaceError> {
    let adj = adjacency(mesh)?;
    components_from(mesh, &adj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Vec3;
    use crate::surface::{PeriodicMesh, Triangle};

    fn tetra_surface() -> PeriodicMesh {
        // boundary of a small tetrahedron, outward winding
        let v = vec![
            Vec3::new(0.1, 0.1, 0.1),
            Vec3::new(0.3, 0.1, 0.1),
            Vec3::new(0.1, 0.3, 0.1),
            Vec3::new(0.1, 0.1, 0.3),
        ];
        let z = [0, 0, 0];
        let tris = [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]]
            .map(|v| Triangle { v, shift: [z; 3] })
            .to_vec();
        PeriodicMesh {
            values: vec![0.0; 4],
            vertices: v,
            triangles: tris,
            level: 0.0,
            grid_n: 16,
        }
    }

    #[test]
    fn tetrahedron_is_a_sphere() {
        let mesh = tetra_surface();
        let comps = analyze(&mesh, 4).unwrap();
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].euler, 2);
        assert_eq!(comps[0].genus, 0);
        assert_eq!(comps[0].rank, Some(0));
        assert_eq!(comps[0].homology_class, Some([0, 0, 0]));
    }

    #[test]
    fn non_manifold_edge() {
        let mut mesh = tetra_surface();
        mesh.triangles.push(Triangle {
            v: [0, 1, 2],
            shift: [[0, 0, 0]; 3],
        });
        assert!(matches!(components(&mesh), Err(SurfaceError::NonManifoldEdge(..))));
        let mut mesh = tetra_surface();
        mesh.triangles[0].v = [0, 1, 2];
        assert!(matches!(components(&mesh), Err(SurfaceError::NonOrientable(..))));
    }
}
