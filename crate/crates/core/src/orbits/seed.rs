use std::collections::{HashMap, HashSet};

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{trace, OrbitClass, OrbitError, PlaneSlice, TraceOptions, Trajectory};
use crate::dispersion::{DispersionModel, EnergyLevel};
use crate::lattice::Vec3;
use crate::surface::topology::triangle_components;
use crate::surface::{extract_surface, height_critical_points, HeightCritical, PeriodicMesh, SurfaceComponent};

/// Fermi surface data shared by every field direction at one energy.
#[derive(Debug, Clone)]
pub struct OrbitContext {
    pub model: DispersionModel,
    pub level: f64,
    pub mesh: PeriodicMesh,
    pub components: Vec<SurfaceComponent>,
    /// Component index of each mesh triangle.
    pub triangle_component: Vec<u32>,
}

impl OrbitContext {
    pub fn new(model: &DispersionModel, level: f64, grid_n: usize) -> Result<Self, OrbitError> {
        let mesh = extract_surface(model, &EnergyLevel::new(level), grid_n)?;
        let (components, triangle_component) = triangle_components(&mesh)?;
        Ok(Self {
            model: model.clone(),
            level,
            mesh,
            components,
            triangle_component,
        })
    }

    /// Height-critical points of all components; `None` if any is degenerate.
    pub fn critical_points(&self, b: &Vec3) -> Option<Vec<HeightCritical>> {
        let mut out = Vec::new();
        for c in &self.components {
            out.extend(height_critical_points(&self.model, &self.mesh, c, b).ok()?);
        }
        Some(out)
    }

    /// Range of `B . p` over the unit cell.
    pub fn height_range(&self, b: &Vec3) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..8 {
            let x = Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64);
            let h = b.dot(&self.model.basis.to_cartesian(&x));
            lo = lo.min(h);
            hi = hi.max(h);
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedOptions {
    pub plane_count: usize,
    pub seeds_per_plane: usize,
    /// Offset of the extra planes placed just above and below critical heights.
    pub critical_offset: f64,
    /// Total arc length over all traces.
    pub arc_budget: f64,
    /// Keep full point chains instead of endpoints only.
    pub keep_points: bool,
    pub trace: TraceOptions,
}

impl Default for SeedOptions {
    fn default() -> Self {
        Self {
            plane_count: 8,
            seeds_per_plane: 6,
            critical_offset: 5e-3,
            arc_budget: 2e5,
            keep_points: false,
            trace: TraceOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitFamilies {
    pub b: Vec3,
    pub trajectories: Vec<Trajectory>,
    /// Surface component of each trajectory's seed.
    pub components: Vec<u32>,
    /// Number of distinct open-orbit carriers, when even.
    pub carrier_count: Option<usize>,
    /// Empty when the height function had degenerate critical points.
    pub critical: Vec<HeightCritical>,
    pub degenerate_critical: bool,
    /// Some planes ran out of arc budget before all seeds were tried.
    pub truncated: bool,
}

impl OrbitFamilies {
    pub fn count(&self, class: OrbitClass) -> usize {
        self.trajectories.iter().filter(|t| t.class == class).count()
    }

    pub fn directed(&self) -> impl Iterator<Item = &Trajectory> {
        self.trajectories.iter().filter(|t| t.class.is_directed())
    }
}

/// Traced segments folded into the unit cell, for recognising seeds on known orbits.
struct SegmentIndex {
    cell: f64,
    map: HashMap<[i64; 3], Vec<(Vec3, Vec3, f64)>>,
}

impl SegmentIndex {
    fn new(cell: f64) -> Self {
        Self {
            cell,
            map: HashMap::new(),
        }
    }

    fn key(&self, x: &Vec3) -> [i64; 3] {
        let f = x.map(|c| c - c.floor());
        [0, 1, 2].map(|i| (f[i] / self.cell).floor() as i64)
    }

    fn insert(&mut self, ctx: &OrbitContext, traj: &Trajectory) {
        let basis = &ctx.model.basis;
        for w in traj.points.windows(2) {
            let m = basis.to_fractional(&((w[0] + w[1]) * 0.5));
            let k = self.key(&m);
            self.map.entry(k).or_default().push((w[0], w[1], traj.slice.h));
        }
    }

    fn contains(&self, ctx: &OrbitContext, b: &Vec3, h: f64, s: &Vec3) -> bool {
        let basis = &ctx.model.basis;
        let f = basis.to_fractional(s);
        let k = self.key(&f);
        let m = (1.0 / self.cell).round() as i64;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let kk = [
                        (k[0] + dx).rem_euclid(m),
                        (k[1] + dy).rem_euclid(m),
                        (k[2] + dz).rem_euclid(m),
                    ];
                    let Some(list) = self.map.get(&kk) else { continue };
                    for (a, c, ht) in list {
                        let n = basis.to_fractional(&(s - (a + c) * 0.5)).map(f64::round);
                        let g = basis.to_cartesian(&n);
                        if (h - b.dot(&g) - ht).abs() > 1e-7 {
                            continue;
                        }
                        if segment_distance(&(s - g), a, c) < 1e-3 {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

fn segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let d = b - a;
    let l = d.norm_squared();
    let t = if l > 0.0 {
        ((p - a).dot(&d) / l).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + d * t)).norm()
}

/// Midpoints of the plane's crossings with the mesh triangles, with their triangle.
fn plane_crossings(ctx: &OrbitContext, b: &Vec3, h: f64) -> Vec<(Vec3, usize)> {
    let basis = &ctx.model.basis;
    let mut out = Vec::new();
    for t in 0..ctx.mesh.triangles.len() {
        let c = ctx.mesh.corners(t).map(|x| basis.to_cartesian(&x));
        let d = c.map(|p| b.dot(&p) - h);
        let mut ends = Vec::with_capacity(2);
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            if (d[i] < 0.0) != (d[j] < 0.0) {
                let w = d[i] / (d[i] - d[j]);
                ends.push(c[i] + (c[j] - c[i]) * w);
            }
        }
        if ends.len() == 2 {
            out.push(((ends[0] + ends[1]) * 0.5, t));
        }
    }
    out
}

/// Visits `0..n` in a spread-out deterministic order.
fn spread_order(n: usize) -> Vec<usize> {
    const PHI: f64 = 0.618_033_988_749_894_9;
    let mut seen = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let i = (((j as f64) * PHI).fract() * n as f64) as usize;
        if !seen[i] {
            seen[i] = true;
            out.push(i);
        }
    }
    out.extend((0..n).filter(|&i| !seen[i]));
    out
}

struct PlaneResult {
    trajectories: Vec<(Trajectory, u32)>,
    truncated: bool,
}

fn seed_plane(ctx: &OrbitContext, b: &Vec3, h: f64, opts: &SeedOptions, budget: f64) -> PlaneResult {
    let slice = PlaneSlice::new(b, h);
    let crossings = plane_crossings(ctx, b, h);
    let mut index = SegmentIndex::new(1.0 / (1.0 / opts.trace.max_step.max(0.02)).floor());
    let mut out = Vec::new();
    let mut spent = 0.0;
    let mut truncated = false;
    for i in spread_order(crossings.len()) {
        if out.len() >= opts.seeds_per_plane {
            break;
        }
        if spent >= budget {
            truncated = true;
            break;
        }
        let (m, t) = crossings[i];
        let Some(seed) = super::project_to_curve(&ctx.model, ctx.level, &slice, &m) else {
            continue;
        };
        if index.contains(ctx, b, h, &seed) {
            continue;
        }
        let mut topt = opts.trace;
        topt.max_arc = topt.max_arc.min((budget - spent).max(topt.min_arc));
        let traj = match trace(&ctx.model, ctx.level, &slice, &seed, &topt) {
            Ok(tr) => tr,
            Err(OrbitError::StepCollapse { .. }) => Trajectory {
                slice: slice.clone(),
                points: vec![seed],
                arc_length: 0.0,
                class: OrbitClass::Singular,
                eta: None,
                strip_width: None,
                period_vector: None,
                low_accuracy: false,
                max_drift: 0.0,
                steps: 0,
            },
            Err(_) => continue,
        };
        spent += traj.arc_length;
        index.insert(ctx, &traj);
        out.push((traj, ctx.triangle_component[t]));
    }
    PlaneResult {
        trajectories: out,
        truncated,
    }
}

/// Folded coarse cells visited by a trajectory.
fn visited_cells(ctx: &OrbitContext, traj: &Trajectory, n: i64) -> HashSet<[i64; 3]> {
    traj.points
        .iter()
        .map(|p| {
            let f = ctx.model.basis.to_fractional(p);
            [0, 1, 2].map(|i| ((f[i] - f[i].floor()) * n as f64).floor() as i64 % n)
        })
        .collect()
}

/// Groups directed trajectories sharing a substantial part of their folded footprint.
fn carrier_clusters(ctx: &OrbitContext, trajs: &[Trajectory]) -> usize {
    let sets: Vec<(usize, HashSet<[i64; 3]>)> = trajs
        .iter()
        .enumerate()
        .filter(|(_, t)| t.class.is_directed())
        .map(|(i, t)| (i, visited_cells(ctx, t, 16)))
        .collect();
    if sets.is_empty() {
        return 0;
    }
    let mut uf = UnionFind::<usize>::new(sets.len());
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            let shared = sets[i].1.intersection(&sets[j].1).count();
            if shared as f64 >= 0.2 * sets[i].1.len().min(sets[j].1.len()) as f64 {
                uf.union(i, j);
            }
        }
    }
    let mut labels = uf.into_labeling();
    labels.sort_unstable();
    labels.dedup();
    labels.len()
}

/// Traces orbits on stratified planes `B . p = h` across one cell plus
/// planes just above and below every critical height.
pub fn seed_orbits(ctx: &OrbitContext, b: &Vec3, opts: &SeedOptions) -> OrbitFamilies {
    let b = b.normalize();
    let (lo, hi) = ctx.height_range(&b);
    let n = opts.plane_count.max(1);
    // irrational offset keeps planes off symmetric heights
    let mut heights: Vec<f64> = (0..n)
        .map(|j| lo + (j as f64 + 0.381_966_011_250_105) / n as f64 * (hi - lo))
        .collect();
    let critical = ctx.critical_points(&b);
    if let Some(cs) = &critical {
        for c in cs {
            heights.push(c.height - opts.critical_offset);
            heights.push(c.height + opts.critical_offset);
        }
    }
    let budget = opts.arc_budget / heights.len() as f64;
    let results: Vec<PlaneResult> = heights
        .par_iter()
        .map(|&h| seed_plane(ctx, &b, h, opts, budget))
        .collect();
    let mut trajectories = Vec::new();
    let mut components = Vec::new();
    let mut truncated = false;
    for r in results {
        truncated |= r.truncated;
        for (t, c) in r.trajectories {
            trajectories.push(t);
            components.push(c);
        }
    }
    let clusters = carrier_clusters(ctx, &trajectories);
    if !opts.keep_points {
        for t in &mut trajectories {
            t.compact();
        }
    }
    OrbitFamilies {
        b,
        trajectories,
        components,
        carrier_count: (clusters > 0 && clusters.is_multiple_of(2)).then_some(clusters),
        degenerate_critical: critical.is_none(),
        critical: critical.unwrap_or_default(),
        truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{fixtures, make_thin_net};

    #[test]
    fn rank_zero_surface_has_only_closed_orbits() {
        let f = fixtures::sphere();
        let ctx = OrbitContext::new(&f.model, f.level.value, 32).unwrap();
        let fam = seed_orbits(&ctx, &Vec3::new(0.2, 0.5, 0.8), &SeedOptions::default());
        assert!(!fam.trajectories.is_empty());
        assert!(fam.trajectories.iter().all(|t| t.class == OrbitClass::Closed));
        assert_eq!(fam.carrier_count, None);
    }

    #[test]
    fn thin_net_in_zone_has_paired_open_directions() {
        let net = make_thin_net(0.1).unwrap();
        let ctx = OrbitContext::new(&net.model, net.level.value, 32).unwrap();
        let b = Vec3::new(0.03, 0.02, 1.0).normalize();
        let fam = seed_orbits(&ctx, &b, &SeedOptions::default());
        assert!(fam.count(OrbitClass::Closed) > 0);
        let etas: Vec<Vec3> = fam.directed().map(|t| t.eta.unwrap()).collect();
        assert!(!etas.is_empty());
        let axis = b.cross(&Vec3::z()).normalize();
        for e in &etas {
            // in the xy plane and orthogonal to B
            assert!(e.z.abs() < 1e-2, "{e:?}");
            assert!(e.dot(&b).abs() < 1e-9);
            assert!(e.cross(&axis).norm() < 0.05, "{e:?}");
        }
        assert!(etas.iter().any(|e| e.dot(&axis) > 0.0));
        assert!(etas.iter().any(|e| e.dot(&axis) < 0.0));
    }
}
