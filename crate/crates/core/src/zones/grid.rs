use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::lattice::Vec3;

/// Largest neighbor angle times frequency, degrees; the limit of subdivided
/// faces is reached from below.
const MAX_SPACING_DEG: f64 = 75.8;

/// Geodesic grid from a subdivided icosahedron; antipodally symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereGrid {
    pub frequency: usize,
    pub directions: Vec<Vec3>,
    pub neighbors: Vec<Vec<usize>>,
    pub antipode: Vec<usize>,
}

fn icosahedron() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let v: Vec<Vec3> = [
        (-1.0, p, 0.0),
        (1.0, p, 0.0),
        (-1.0, -p, 0.0),
        (1.0, -p, 0.0),
        (0.0, -1.0, p),
        (0.0, 1.0, p),
        (0.0, -1.0, -p),
        (0.0, 1.0, -p),
        (p, 0.0, -1.0),
        (p, 0.0, 1.0),
        (-p, 0.0, -1.0),
        (-p, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let f = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (v, f)
}

pub(super) fn key(v: &Vec3) -> [i64; 3] {
    [0, 1, 2].map(|i| (v[i] * 1e9).round() as i64)
}

impl SphereGrid {
    pub fn new(frequency: usize) -> Self {
        let f = frequency.max(1);
        let (iv, faces) = icosahedron();
        let mut index: HashMap<[i64; 3], usize> = HashMap::new();
        let mut directions = Vec::new();
        let mut edges: Vec<(usize, usize)> = Vec::new();
        let mut id = |p: Vec3, directions: &mut Vec<Vec3>| -> usize {
            let p = p.normalize();
            *index.entry(key(&p)).or_insert_with(|| {
                directions.push(p);
                directions.len() - 1
            })
        };
        for face in &faces {
            let [a, b, c] = face.map(|i| iv[i]);
            // barycentric lattice points (i, j) with i + j <= f
            let mut ids = vec![vec![0usize; f + 1]; f + 1];
            for i in 0..=f {
                for j in 0..=f - i {
                    let k = f - i - j;
                    let p = (a * i as f64 + b * j as f64 + c * k as f64) / f as f64;
                    ids[i][j] = id(p, &mut directions);
                }
            }
            for i in 0..=f {
                for j in 0..=f - i {
                    if i + j < f {
                        edges.push((ids[i][j], ids[i + 1][j]));
                        edges.push((ids[i][j], ids[i][j + 1]));
                        edges.push((ids[i + 1][j], ids[i][j + 1]));
                    }
                }
            }
        }
        let mut neighbors = vec![Vec::new(); directions.len()];
        for (a, b) in edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for n in &mut neighbors {
            n.sort_unstable();
            n.dedup();
        }
        Self::from_parts(f, directions, neighbors)
    }

    /// Grid over an arbitrary antipodally symmetric vertex set with the given adjacency.
    pub fn from_parts(frequency: usize, directions: Vec<Vec3>, neighbors: Vec<Vec<usize>>) -> Self {
        let index = index_map(&directions);
        let antipode = directions
            .iter()
            .map(|d| {
                index
                    .get(&key(&-d))
                    .copied()
                    .unwrap_or_else(|| nearest(&directions, &-d))
            })
            .collect();
        Self {
            frequency,
            directions,
            neighbors,
            antipode,
        }
    }

    /// Vertex lookup by position.
    pub(super) fn index(&self) -> HashMap<[i64; 3], usize> {
        index_map(&self.directions)
    }

    /// Coarsest grid whose neighbors are at most `deg` degrees apart.
    pub fn with_resolution(deg: f64) -> Self {
        Self::new((MAX_SPACING_DEG / deg.max(1e-3)).ceil() as usize)
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// One member of each antipodal pair.
    pub fn representatives(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| i <= self.antipode[i]).collect()
    }

    pub fn nearest(&self, d: &Vec3) -> usize {
        nearest(&self.directions, d)
    }

    /// Mean angle between neighbors, degrees.
    pub fn spacing_deg(&self) -> f64 {
        let mut s = 0.0;
        let mut n = 0;
        for (i, nb) in self.neighbors.iter().enumerate() {
            for &j in nb {
                s += self.directions[i].dot(&self.directions[j]).clamp(-1.0, 1.0).acos();
                n += 1;
            }
        }
        (s / n.max(1) as f64).to_degrees()
    }
}

fn index_map(dirs: &[Vec3]) -> HashMap<[i64; 3], usize> {
    dirs.iter().enumerate().map(|(i, d)| (key(d), i)).collect()
}

fn nearest(dirs: &[Vec3], d: &Vec3) -> usize {
    let d = d.normalize();
    (0..dirs.len())
        .max_by(|&a, &b| dirs[a].dot(&d).total_cmp(&dirs[b].dot(&d)))
        .unwrap_or(0)
}
