use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PeriodicMesh, SurfaceError, Triangle};
use crate::dispersion::{DispersionModel, EnergyLevel};
use crate::lattice::integer::IVec3;
use crate::lattice::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub grid_n: usize,
    /// Reject levels passing through a cell that contains a critical point.
    pub check_singular: bool,
}

impl ExtractOptions {
    pub fn new(grid_n: usize) -> Self {
        Self {
            grid_n,
            check_singular: true,
        }
    }
}

/// Marching tetrahedra on a periodic `grid_n^3` grid.
pub fn extract_surface(
    model: &DispersionModel,
    level: &EnergyLevel,
    grid_n: usize,
) -> Result<PeriodicMesh, SurfaceError> {
    extract_surface_with(model, level, &ExtractOptions::new(grid_n))
}

// cube corner offsets along the 6 monotone paths from (0,0,0) to (1,1,1)
const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

struct Grid {
    n: usize,
    f: Vec<f64>,
}

impl Grid {
    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    fn at(&self, g: [usize; 3]) -> f64 {
        self.f[self.idx(g[0], g[1], g[2])]
    }
}

fn bits(d: [i64; 3]) -> usize {
    (d[0] as usize) | ((d[1] as usize) << 1) | ((d[2] as usize) << 2)
}

fn parity(p: [usize; 4]) -> bool {
    let mut inv = 0;
    for a in 0..4 {
        for b in a + 1..4 {
            if p[a] > p[b] {
                inv += 1;
            }
        }
    }
    inv % 2 == 0
}

pub fn extract_surface_with(
    model: &DispersionModel,
    level: &EnergyLevel,
    opts: &ExtractOptions,
) -> Result<PeriodicMesh, SurfaceError> {
    let n = opts.grid_n;
    if n < 16 {
        return Err(SurfaceError::GridTooSmall(n));
    }
    let h = 1.0 / n as f64;
    let f: Vec<f64> = (0..n * n * n)
        .into_par_iter()
        .map(|id| {
            let (i, j, k) = (id / (n * n), (id / n) % n, id % n);
            model.value_frac(&Vec3::new(i as f64 * h, j as f64 * h, k as f64 * h)) - level.value
        })
        .collect();
    let (min, max) = f
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if min >= 0.0 || max < 0.0 {
        return Err(SurfaceError::EmptyLevel {
            level: level.value,
            min: min + level.value,
            max: max + level.value,
        });
    }
    let grid = Grid { n, f };

    if opts.check_singular {
        check_singular(model, level, &grid)?;
    }

    // tetrahedra as corner offsets with orientation
    let tets: Vec<([[i64; 3]; 4], bool)> = PERMS
        .iter()
        .map(|p| {
            let mut v = [[0i64; 3]; 4];
            for s in 0..3 {
                v[s + 1] = v[s];
                v[s + 1][p[s]] = 1;
            }
            let d = |a: usize| Vec3::new(v[a][0] as f64, v[a][1] as f64, v[a][2] as f64);
            let det = d(1).dot(&d(2).cross(&d(3)));
            (v, det > 0.0)
        })
        .collect();

    let mut vertex_of = vec![u32::MAX; n * n * n * 8];
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut vwrap: Vec<IVec3> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut triangles: Vec<Triangle> = Vec::new();

    let mut edge_vertex = |base: [i64; 3], d: [i64; 3], grid: &Grid| -> (u32, IVec3) {
        let cell_shift = [0, 1, 2].map(|i| base[i].div_euclid(n as i64));
        let b = [0, 1, 2].map(|i| base[i].rem_euclid(n as i64) as usize);
        let slot = grid.idx(b[0], b[1], b[2]) * 8 + bits(d);
        let id = if vertex_of[slot] != u32::MAX {
            vertex_of[slot]
        } else {
            let e = [0, 1, 2].map(|i| (b[i] + d[i] as usize) % n);
            let (fa, fb) = (grid.at(b), grid.at(e));
            let x0 = Vec3::new(b[0] as f64, b[1] as f64, b[2] as f64) * h;
            let dv = Vec3::new(d[0] as f64, d[1] as f64, d[2] as f64) * h;
            let t = edge_root(model, level.value, &x0, &dv, fa, fb);
            let raw = x0 + dv * t;
            let w = [0, 1, 2].map(|i| raw[i].floor() as i64);
            let pos = raw - Vec3::new(w[0] as f64, w[1] as f64, w[2] as f64);
            let pos = pos.map(|c| if c >= 1.0 { 0.0 } else { c });
            let id = vertices.len() as u32;
            vertices.push(pos);
            vwrap.push(w);
            values.push(model.value_frac(&pos) - level.value);
            vertex_of[slot] = id;
            id
        };
        let w = vwrap[id as usize];
        (id, [0, 1, 2].map(|i| w[i] + cell_shift[i]))
    };

    for i in 0..n as i64 {
        for j in 0..n as i64 {
            for k in 0..n as i64 {
                let c = [i, j, k];
                let mut pos = 0;
                for off in 0..8 {
                    let o = [off & 1, (off >> 1) & 1, (off >> 2) & 1];
                    let g = [0, 1, 2].map(|a| ((c[a] as usize) + o[a]) % n);
                    if grid.at(g) >= 0.0 {
                        pos += 1;
                    }
                }
                if pos == 0 || pos == 8 {
                    continue;
                }
                for (tv, positive) in &tets {
                    let pts: [[i64; 3]; 4] = tv.map(|o| [c[0] + o[0], c[1] + o[1], c[2] + o[2]]);
                    let inside: [bool; 4] =
                        pts.map(|p| grid.at([0, 1, 2].map(|a| p[a].rem_euclid(n as i64) as usize)) >= 0.0);
                    let count = inside.iter().filter(|&&s| s).count();
                    if count == 0 || count == 4 {
                        continue;
                    }
                    let mut edge = |a: usize, b: usize| {
                        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                        let d = [0, 1, 2].map(|x| pts[hi][x] - pts[lo][x]);
                        edge_vertex(pts[lo], d, &grid)
                    };
                    if count == 1 || count == 3 {
                        // lone vertex a; normals must point toward the positive side
                        let lone_positive = count == 1;
                        let a = (0..4).find(|&q| inside[q] == lone_positive).unwrap();
                        let mut rest: Vec<usize> = (0..4).filter(|&q| q != a).collect();
                        if parity([a, rest[0], rest[1], rest[2]]) != *positive {
                            rest.swap(1, 2);
                        }
                        let mut tri = [edge(a, rest[0]), edge(a, rest[1]), edge(a, rest[2])];
                        if lone_positive {
                            tri.swap(1, 2);
                        }
                        triangles.push(make_triangle(tri));
                    } else {
                        let p: Vec<usize> = (0..4).filter(|&q| inside[q]).collect();
                        let mut m: Vec<usize> = (0..4).filter(|&q| !inside[q]).collect();
                        if parity([p[0], p[1], m[0], m[1]]) != *positive {
                            m.swap(0, 1);
                        }
                        let (a, b, cc, dd) = (p[0], p[1], m[0], m[1]);
                        let ac = edge(a, cc);
                        let ad = edge(a, dd);
                        let bd = edge(b, dd);
                        let bc = edge(b, cc);
                        triangles.push(make_triangle([ac, bc, bd]));
                        triangles.push(make_triangle([ac, bd, ad]));
                    }
                }
            }
        }
    }

    Ok(PeriodicMesh {
        vertices,
        triangles,
        values,
        level: level.value,
        grid_n: n,
    })
}

/// Root of the energy on the edge `x0 + t dv`, `t in [0, 1]`: linear
/// interpolation followed by Newton steps kept inside the sign bracket.
fn edge_root(model: &DispersionModel, level: f64, x0: &Vec3, dv: &Vec3, fa: f64, fb: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    let lo_positive = fa >= 0.0;
    let mut t = fa / (fa - fb);
    if !t.is_finite() {
        t = 0.5;
    }
    for _ in 0..60 {
        let (v, g) = model.value_grad_frac(&(x0 + dv * t));
        let r = v - level;
        if r == 0.0 {
            return t;
        }
        if (r >= 0.0) == lo_positive {
            lo = t;
        } else {
            hi = t;
        }
        let slope = g.dot(dv);
        let mut tn = t - r / slope;
        if !(tn > lo && tn < hi) {
            tn = 0.5 * (lo + hi);
        }
        let done = (tn - t).abs() < 1e-13;
        t = tn;
        if done {
            break;
        }
    }
    t
}

fn make_triangle(c: [(u32, IVec3); 3]) -> Triangle {
    let s0 = c[0].1;
    Triangle {
        v: c.map(|x| x.0),
        shift: c.map(|x| [x.1[0] - s0[0], x.1[1] - s0[1], x.1[2] - s0[2]]),
    }
}

/// Searches crossing cubes for critical points of the energy.
fn check_singular(model: &DispersionModel, level: &EnergyLevel, grid: &Grid) -> Result<(), SurfaceError> {
    let n = grid.n;
    let h = 1.0 / n as f64;
    let hess_bound: f64 = model
        .terms
        .iter()
        .map(|t| {
            let k2 = (t.k[0] * t.k[0] + t.k[1] * t.k[1] + t.k[2] * t.k[2]) as f64;
            t.amp.abs() * k2 * std::f64::consts::TAU.powi(2)
        })
        .sum();
    // a critical point within one cell of the center keeps the gradient this small
    let threshold = hess_bound * h * 3f64.sqrt();
    let hit = (0..n * n * n).into_par_iter().find_map_first(|id| {
        let c = [id / (n * n), (id / n) % n, id % n];
        let mut pos = 0;
        for off in 0..8 {
            let g = [
                (c[0] + (off & 1)) % n,
                (c[1] + ((off >> 1) & 1)) % n,
                (c[2] + ((off >> 2) & 1)) % n,
            ];
            if grid.at(g) >= 0.0 {
                pos += 1;
            }
        }
        if pos == 0 || pos == 8 {
            return None;
        }
        let center = Vec3::new(c[0] as f64 + 0.5, c[1] as f64 + 0.5, c[2] as f64 + 0.5) * h;
        let (_, g) = model.value_grad_frac(&center);
        if g.norm() > threshold {
            return None;
        }
        let x = model.refine_critical(&center, 40)?;
        let d = x - center;
        if d.iter().all(|c| c.abs() <= h) {
            Some(x)
        } else {
            None
        }
    });
    match hit {
        Some(x) => Err(SurfaceError::SingularLevel {
            level: level.value,
            point: [x[0], x[1], x[2]],
            critical_value: model.value_frac(&x),
        }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::make_anferms;

    #[test]
    fn orientation_points_to_higher_energy() {
        let m = make_anferms(1.0, 0.0, 0.0).unwrap();
        let mesh = extract_surface(&m, &EnergyLevel::new(0.7), 16).unwrap();
        let mut agree = 0;
        for t in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.corners(t);
            let nrm = (b - a).cross(&(c - a));
            let (_, g) = m.value_grad_frac(&((a + b + c) / 3.0));
            if nrm.dot(&g) > 0.0 {
                agree += 1;
            }
        }
        // the Newton correction can fold a few slivers; the winding itself is
        // checked combinatorially by the topology pass
        assert!(agree as f64 > 0.98 * mesh.triangles.len() as f64);
        crate::surface::components(&mesh).unwrap();
        assert!(mesh.max_residual() < 1e-3);
    }

    #[test]
    fn empty_and_singular_levels() {
        let m = make_anferms(1.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            extract_surface(&m, &EnergyLevel::new(3.5), 32),
            Err(SurfaceError::EmptyLevel { .. })
        ));
        // saddle value of sum cos
        assert!(matches!(
            extract_surface(&m, &EnergyLevel::new(1.0), 32),
            Err(SurfaceError::SingularLevel { .. })
        ));
        let m = make_anferms(0.0, 0.0, 1.0).unwrap();
        assert!(matches!(
            extract_surface(&m, &EnergyLevel::new(0.0), 32),
            Err(SurfaceError::SingularLevel { .. })
        ));
        assert_eq!(
            extract_surface(&m, &EnergyLevel::new(0.0), 8).unwrap_err(),
            SurfaceError::GridTooSmall(8)
        );
    }

    #[test]
    fn vertices_are_wrapped() {
        let m = make_anferms(1.0, 0.0, 0.0).unwrap();
        let mesh = extract_surface(&m, &EnergyLevel::new(0.0), 16).unwrap();
        for v in &mesh.vertices {
            assert!(v.iter().all(|c| (0.0..1.0).contains(c)));
        }
    }
}
