//! Small exact integer helpers for 3-vectors.

use num_integer::Integer;

pub type IVec3 = [i64; 3];

pub fn gcd3(n: IVec3) -> i64 {
    n[0].gcd(&n[1]).gcd(&n[2])
}

/// Divides by the gcd and makes the first nonzero entry positive.
/// Returns the zero vector unchanged.
pub fn canonical(n: IVec3) -> IVec3 {
    let g = gcd3(n);
    if g == 0 {
        return n;
    }
    let mut out = [n[0] / g, n[1] / g, n[2] / g];
    if let Some(first) = out.iter().copied().find(|&c| c != 0) {
        if first < 0 {
            out.iter_mut().for_each(|c| *c = -*c);
        }
    }
    out
}

pub fn is_zero(n: &IVec3) -> bool {
    n.iter().all(|&c| c == 0)
}

pub fn cross(a: IVec3, b: IVec3) -> IVec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn dot(a: IVec3, b: IVec3) -> i64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn height(n: &IVec3) -> i64 {
    n.iter().map(|c| c.abs()).max().unwrap_or(0)
}

/// Rank over Q of a set of integer vectors.
pub fn rank(vectors: &[IVec3]) -> usize {
    hermite_basis(vectors).len()
}

/// Row-style Hermite reduction: returns a basis of the Z-span of `vectors`
/// in echelon form (leading entries positive, entries above pivots reduced).
pub fn hermite_basis(vectors: &[IVec3]) -> Vec<IVec3> {
    let mut rows: Vec<IVec3> = vectors.iter().copied().filter(|v| !is_zero(v)).collect();
    let mut basis = Vec::new();
    for col in 0..3 {
        // Euclid on column `col` among remaining rows until one row holds the gcd.
        loop {
            let mut nonzero: Vec<usize> = (0..rows.len()).filter(|&i| rows[i][col] != 0).collect();
            if nonzero.len() <= 1 {
                break;
            }
            nonzero.sort_by_key(|&i| rows[i][col].abs());
            let pivot = nonzero[0];
            let p = rows[pivot];
            for &i in &nonzero[1..] {
                let q = Integer::div_floor(&rows[i][col], &p[col]);
                for c in 0..3 {
                    rows[i][c] -= q * p[c];
                }
            }
        }
        if let Some(idx) = (0..rows.len()).find(|&i| rows[i][col] != 0) {
            let mut pivot = rows.swap_remove(idx);
            if pivot[col] < 0 {
                pivot.iter_mut().for_each(|c| *c = -*c);
            }
            basis.push(pivot);
        }
        rows.retain(|v| !is_zero(v));
    }
    // reduce entries above pivots
    for i in 0..basis.len() {
        let col = (0..3).find(|&c| basis[i][c] != 0).unwrap();
        for j in 0..i {
            let q = Integer::div_floor(&basis[j][col], &basis[i][col]);
            if q != 0 {
                for c in 0..3 {
                    basis[j][c] -= q * basis[i][c];
                }
            }
        }
    }
    basis
}

/// Two independent primitive integer vectors orthogonal to `a` (a != 0).
pub fn orthogonal_pair(a: IVec3) -> [IVec3; 2] {
    let candidates = [
        canonical([a[1], -a[0], 0]),
        canonical([a[2], 0, -a[0]]),
        canonical([0, a[2], -a[1]]),
    ];
    let mut nonzero: Vec<IVec3> = candidates.into_iter().filter(|v| !is_zero(v)).collect();
    nonzero.sort_by_key(|v| (height(v), *v));
    let first = nonzero[0];
    let second = nonzero[1..]
        .iter()
        .copied()
        .find(|v| !is_zero(&cross(first, *v)))
        .expect("nonzero vector has a two-dimensional orthogonal complement");
    [first, second]
}
