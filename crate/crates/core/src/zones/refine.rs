use rayon::prelude::*;

use super::grid::key;
use super::{probe_direction, DirectionSample, SphereGrid, SweepOptions};
use crate::lattice::Vec3;
use crate::orbits::OrbitContext;

/// Sample graph after refinement, with the samples on it.
pub(super) struct Refined {
    pub grid: SphereGrid,
    pub samples: Vec<DirectionSample>,
}

/// Halves the grid spacing `opts.refine` times, probing only midpoints of edges
/// whose end regimes differ. Edges with unprobed midpoints are kept, so the
/// sample graph stays connected.
///
/// The vertices of the frequency `2f` grid are those of the `f` grid plus
/// the midpoints of its edges.
pub(super) fn refine(
    ctx: &OrbitContext,
    opts: &SweepOptions,
    mut grid: SphereGrid,
    mut samples: Vec<DirectionSample>,
    in_region: impl Fn(&DirectionSample) -> bool,
    spent: &mut u64,
    exceeded: &mut bool,
) -> Refined {
    for _ in 0..opts.refine {
        let fine = SphereGrid::new(grid.frequency * 2);
        let index = fine.index();
        let locate = |d: &Vec3| index.get(&key(d)).copied().unwrap_or_else(|| fine.nearest(d));
        let mut sample_at: Vec<Option<usize>> = vec![None; fine.len()];
        let at: Vec<usize> = grid.directions.iter().map(locate).collect();
        for (s, &v) in at.iter().enumerate() {
            sample_at[v] = Some(s);
        }

        let mut edges = Vec::new();
        for (p, nb) in grid.neighbors.iter().enumerate() {
            for &q in nb.iter().filter(|&&q| p < q) {
                edges.push((p, q, midpoint(&fine, at[p], &(grid.directions[p] + grid.directions[q]))));
            }
        }
        let wanted = |&(p, q, _): &(usize, usize, usize)| {
            let (a, b) = (&samples[p], &samples[q]);
            a.probed && b.probed && a.regime != b.regime && in_region(a) && in_region(b)
        };
        let mut todo: Vec<usize> = edges.iter().filter(|e| wanted(e)).map(|e| e.2).collect();
        todo.sort_unstable();
        todo.dedup();
        todo.retain(|&m| sample_at[m].is_none());
        // probe one of each antipodal pair
        let reps: Vec<usize> = todo
            .iter()
            .copied()
            .filter(|&m| m <= fine.antipode[m] || todo.binary_search(&fine.antipode[m]).is_err())
            .collect();
        let mut new: Vec<(usize, DirectionSample)> = Vec::new();
        for chunk in reps.chunks(opts.chunk.max(1)) {
            if opts.max_steps.is_some_and(|m| *spent >= m) {
                *exceeded = true;
                break;
            }
            let got: Vec<DirectionSample> = chunk
                .par_iter()
                .map(|&m| probe_direction(ctx, &fine.directions[m], &opts.probe))
                .collect();
            for (&m, s) in chunk.iter().zip(got) {
                *spent += s.steps as u64;
                let j = fine.antipode[m];
                if j != m {
                    new.push((j, s.antipodal()));
                }
                new.push((m, s));
            }
        }
        for (m, s) in new {
            if sample_at[m].is_none() {
                sample_at[m] = Some(samples.len());
                samples.push(s);
            }
        }

        // old edges split at probed midpoints, plus fine edges between present vertices
        let mut neighbors = vec![Vec::new(); samples.len()];
        let mut link = |a: usize, b: usize| {
            neighbors[a].push(b);
            neighbors[b].push(a);
        };
        for &(p, q, mid) in &edges {
            match sample_at[mid] {
                Some(m) if m >= at.len() => {
                    link(p, m);
                    link(m, q);
                }
                _ => link(p, q),
            }
        }
        for v in 0..fine.len() {
            let Some(a) = sample_at[v] else { continue };
            for &w in &fine.neighbors[v] {
                if let Some(b) = sample_at[w] {
                    if v < w {
                        link(a, b);
                    }
                }
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
            n.dedup();
        }
        let directions = samples.iter().map(|s| s.direction.unit).collect();
        grid = SphereGrid::from_parts(fine.frequency, directions, neighbors);
    }
    Refined { grid, samples }
}

/// Fine vertex closest to `toward`, by walking from `from`.
fn midpoint(fine: &SphereGrid, from: usize, toward: &Vec3) -> usize {
    let t = toward.normalize();
    let mut v = from;
    loop {
        let best = fine.neighbors[v]
            .iter()
            .copied()
            .max_by(|&a, &b| fine.directions[a].dot(&t).total_cmp(&fine.directions[b].dot(&t)))
            .unwrap_or(v);
        if fine.directions[best].dot(&t) <= fine.directions[v].dot(&t) {
            return v;
        }
        v = best;
    }
}
