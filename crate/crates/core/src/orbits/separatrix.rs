use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{trace, OrbitClass, OrbitContext, OrbitError, PlaneSlice, TraceOptions};
use crate::lattice::integer::{is_zero, IVec3};
use crate::lattice::Vec3;
use crate::surface::critical::{plane_frame, refine_height_critical, restricted_hessian};
use crate::surface::{CriticalIndex, HeightCritical};

/// One separatrix branch leaving a saddle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleLink {
    pub from: usize,
    pub branch: u8,
    /// Saddle reached, if any.
    pub to: Option<usize>,
    /// Lattice shift of the saddle reached relative to its base copy.
    pub shift: IVec3,
    pub arc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixGraph {
    pub saddles: Vec<HeightCritical>,
    pub links: Vec<SaddleLink>,
    /// Net lattice shifts around cycles of saddle connections.
    pub cycle_shifts: Vec<IVec3>,
}

impl SeparatrixGraph {
    /// Saddle connections close up into an unbounded periodic network.
    pub fn is_singular_net(&self) -> bool {
        !self.cycle_shifts.is_empty()
    }
}

/// Unit tangents of the four separatrix branches at a saddle.
fn branch_directions(ctx: &OrbitContext, c: &HeightCritical, b: &Vec3) -> Option<[Vec3; 4]> {
    let j = ctx.model.jet(&c.point);
    let m = restricted_hessian(&j.hess, &j.grad, b);
    let eig = m.symmetric_eigen();
    let (l1, l2) = (eig.eigenvalues[0], eig.eigenvalues[1]);
    if l1 * l2 >= 0.0 {
        return None;
    }
    let (ip, ineg) = if l1 > 0.0 { (0, 1) } else { (1, 0) };
    let (lp, ln) = (eig.eigenvalues[ip], -eig.eigenvalues[ineg]);
    let e1 = eig.eigenvectors.column(ip);
    let e2 = eig.eigenvectors.column(ineg);
    let (u, v) = plane_frame(b);
    let dir = |s: f64| {
        let d = e1 * ln.sqrt() + e2 * (s * lp.sqrt());
        (u * d[0] + v * d[1]).normalize()
    };
    let (d1, d2) = (dir(1.0), dir(-1.0));
    Some([d1, -d1, d2, -d2])
}

fn locate(ctx: &OrbitContext, saddles: &[HeightCritical], p: &Vec3) -> Option<(usize, IVec3)> {
    let basis = &ctx.model.basis;
    saddles.iter().enumerate().find_map(|(i, s)| {
        let n = basis.to_fractional(&(p - s.point)).map(f64::round);
        let g = basis.to_cartesian(&n);
        ((p - s.point - g).norm() < 1e-6).then(|| (i, [n[0] as i64, n[1] as i64, n[2] as i64]))
    })
}

/// Traces all four separatrices of every saddle of the height function and
/// collects the lattice shifts of closed saddle chains.
pub fn separatrix_graph(ctx: &OrbitContext, b: &Vec3, opts: &TraceOptions) -> Result<SeparatrixGraph, OrbitError> {
    let b = b.normalize();
    let saddles: Vec<HeightCritical> = ctx
        .critical_points(&b)
        .ok_or(OrbitError::NotDirected)?
        .into_iter()
        .filter(|c| c.index == CriticalIndex::Saddle)
        .collect();
    let mut links = Vec::new();
    let offset = 10.0 * opts.crit_radius;
    for (i, s) in saddles.iter().enumerate() {
        let Some(dirs) = branch_directions(ctx, s, &b) else {
            continue;
        };
        let slice = PlaneSlice::new(&b, s.height);
        for (k, d) in dirs.iter().enumerate() {
            let Some(start) = super::project_to_curve(&ctx.model, ctx.level, &slice, &(s.point + d * offset)) else {
                continue;
            };
            let g = ctx.model.gradient(&start);
            let forward = g.cross(&b).dot(d) >= 0.0;
            let topt = TraceOptions {
                reverse: !forward,
                ..*opts
            };
            let tr = match trace(&ctx.model, ctx.level, &slice, &start, &topt) {
                Ok(t) => t,
                Err(OrbitError::StepCollapse { .. }) => continue,
                Err(e) => return Err(e),
            };
            let mut link = SaddleLink {
                from: i,
                branch: k as u8,
                to: None,
                shift: [0; 3],
                arc: tr.arc_length,
            };
            match tr.class {
                OrbitClass::Singular if tr.points.len() > 1 => {
                    if let Some(c) = refine_height_critical(&ctx.model, ctx.level, &b, &tr.end()) {
                        if let Some((j, n)) = locate(ctx, &saddles, &c) {
                            link.to = Some(j);
                            link.shift = n;
                        }
                    }
                }
                OrbitClass::OpenPeriodic => {
                    link.to = Some(i);
                    link.shift = tr.period_vector.unwrap_or([0; 3]);
                }
                _ => {}
            }
            links.push(link);
        }
    }
    let cycle_shifts = cycle_shifts(saddles.len(), &links);
    Ok(SeparatrixGraph {
        saddles,
        links,
        cycle_shifts,
    })
}

/// Shifts of independent cycles: mismatches of BFS lattice potentials.
fn cycle_shifts(n: usize, links: &[SaddleLink]) -> Vec<IVec3> {
    let mut adj: Vec<Vec<(usize, IVec3)>> = vec![Vec::new(); n];
    for l in links {
        if let Some(j) = l.to {
            adj[l.from].push((j, l.shift));
            adj[j].push((l.from, [-l.shift[0], -l.shift[1], -l.shift[2]]));
        }
    }
    let mut pot: Vec<Option<IVec3>> = vec![None; n];
    let mut out: Vec<IVec3> = Vec::new();
    for root in 0..n {
        if pot[root].is_some() {
            continue;
        }
        pot[root] = Some([0; 3]);
        let mut queue = VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            let pi = pot[i].unwrap();
            for &(j, s) in &adj[i] {
                let want = [pi[0] + s[0], pi[1] + s[1], pi[2] + s[2]];
                match pot[j] {
                    None => {
                        pot[j] = Some(want);
                        queue.push_back(j);
                    }
                    Some(pj) => {
                        let m = [want[0] - pj[0], want[1] - pj[1], want[2] - pj[2]];
                        if !is_zero(&m) {
                            let lead = m.iter().find(|&&c| c != 0).copied().unwrap_or(1);
                            let m = if lead < 0 { [-m[0], -m[1], -m[2]] } else { m };
                            if !out.contains(&m) {
                                out.push(m);
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(from: usize, to: usize, shift: IVec3) -> SaddleLink {
        SaddleLink {
            from,
            branch: 0,
            to: Some(to),
            shift,
            arc: 1.0,
        }
    }

    #[test]
    fn chain_closing_on_a_translate_has_a_cycle() {
        let links = [link(0, 1, [0, 0, 0]), link(1, 0, [1, 0, 0])];
        assert_eq!(cycle_shifts(2, &links), vec![[1, 0, 0]]);
    }

    #[test]
    fn contractible_loop_has_none() {
        let links = [link(0, 1, [0, 0, 0]), link(1, 0, [0, 0, 0]), link(0, 0, [0, 0, 0])];
        assert!(cycle_shifts(2, &links).is_empty());
    }
}
