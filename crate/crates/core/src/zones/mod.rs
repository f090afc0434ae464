//! Stability zones on the sphere of magnetic field directions.

mod assemble;
mod export;
mod grid;
mod refine;

pub use assemble::{assemble_zones, predicted_quantum_numbers, strip_crossover_field, zone_quantum_numbers, Crossover};
pub use export::{lambert_equal_area, write_csv, write_svg};
pub use grid::SphereGrid;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{classify_direction, FieldDirection, IntegerPlane, Irrationality, LatticeError, Vec3};
use crate::orbits::{
    seed_orbits, separatrix_graph, tilted_directions, EnergyInterval, OrbitClass, OrbitContext, OrbitError,
    SeedOptions, TraceOptions,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZoneError {
    #[error("field direction is {angle_deg:.2} degrees from the zone's special direction")]
    NotNearSpecialDirection { angle_deg: f64 },
    #[error("zone has no special rational direction")]
    NoSpecialDirection,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    AllClosed,
    StableOpen,
    PartlyStableOpen,
    SingularNet,
    ChaoticDirected,
    ChaoticWandering,
    Mixed,
    Undecided,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub closed: usize,
    pub open: usize,
    pub chaotic_directed: usize,
    pub chaotic_wandering: usize,
    pub singular: usize,
    pub undecided: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSample {
    pub direction: FieldDirection,
    pub regime: Regime,
    /// Common mean direction of the open orbits, orthogonal to `B`.
    pub eta: Option<Vec3>,
    /// Mean directions of the individual open orbits.
    pub open_etas: Vec<Vec3>,
    pub carrier_count: Option<usize>,
    /// Widest strip among open orbits.
    pub strip_width: Option<f64>,
    /// Fraction of traced orbits that are open.
    pub open_fraction: f64,
    pub counts: ClassCounts,
    pub steps: usize,
    /// Full energy scan, only when requested.
    pub interval: Option<EnergyInterval>,
    /// False for directions skipped when the sweep budget ran out.
    pub probed: bool,
}

impl DirectionSample {
    fn unprobed(direction: FieldDirection) -> Self {
        Self {
            direction,
            regime: Regime::Undecided,
            eta: None,
            open_etas: Vec::new(),
            carrier_count: None,
            strip_width: None,
            open_fraction: 0.0,
            counts: ClassCounts::default(),
            steps: 0,
            interval: None,
            probed: false,
        }
    }

    /// The same record seen from `-B`: orbits are unchanged, their flow reversed.
    pub fn antipodal(&self) -> Self {
        Self {
            direction: self.direction.reversed(),
            eta: self.eta.map(|e| -e),
            open_etas: self.open_etas.iter().map(|e| -e).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeOptions {
    pub seed: SeedOptions,
    /// Tilt for the persistence test at rational directions, degrees.
    pub rotation_deg: f64,
    /// Height bound of the integer relation search for the field direction.
    pub height_bound: i64,
    pub rational_tol: f64,
    /// Largest sine of the angle between open-orbit directions treated as equal.
    pub eta_tol: f64,
    /// Trace separatrices at rational directions without open orbits.
    pub separatrix: bool,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            seed: SeedOptions {
                plane_count: 4,
                seeds_per_plane: 2,
                arc_budget: 5e4,
                trace: TraceOptions {
                    min_arc: 25.0,
                    dir_tol: 3e-2,
                    ..TraceOptions::default()
                },
                ..SeedOptions::default()
            },
            rotation_deg: 1.0,
            height_bound: 8,
            rational_tol: 1e-9,
            eta_tol: 2e-2,
            separatrix: true,
        }
    }
}

fn open_count(ctx: &OrbitContext, b: &Vec3, seed: &SeedOptions) -> usize {
    seed_orbits(ctx, b, seed)
        .trajectories
        .iter()
        .filter(|t| t.class.is_open())
        .count()
}

/// Classifies the orbit regime at one field direction.
pub fn probe_direction(ctx: &OrbitContext, b: &Vec3, opts: &ProbeOptions) -> DirectionSample {
    let direction = classify_direction(*b, &ctx.model.basis, opts.height_bound, opts.rational_tol)
        .unwrap_or_else(|_| FieldDirection::unclassified(Vec3::z()).expect("nonzero"));
    let b = direction.unit;
    let fam = seed_orbits(ctx, &b, &opts.seed);
    let mut counts = ClassCounts::default();
    for t in &fam.trajectories {
        match t.class {
            OrbitClass::Closed => counts.closed += 1,
            OrbitClass::OpenPeriodic | OrbitClass::OpenQuasiperiodic => counts.open += 1,
            OrbitClass::ChaoticDirected => counts.chaotic_directed += 1,
            OrbitClass::ChaoticWandering => counts.chaotic_wandering += 1,
            OrbitClass::Singular => counts.singular += 1,
            OrbitClass::Undecided => counts.undecided += 1,
        }
    }
    let steps = fam.trajectories.iter().map(|t| t.steps).sum();
    let open: Vec<&crate::orbits::Trajectory> = fam.trajectories.iter().filter(|t| t.class.is_open()).collect();
    let open_etas: Vec<Vec3> = open.iter().filter_map(|t| t.eta).collect();
    let total = fam.trajectories.len().max(1);
    let mut sample = DirectionSample {
        direction: direction.clone(),
        regime: Regime::AllClosed,
        eta: None,
        open_etas: open_etas.clone(),
        carrier_count: fam.carrier_count,
        strip_width: open.iter().filter_map(|t| t.strip_width).reduce(f64::max),
        open_fraction: open.len() as f64 / total as f64,
        counts,
        steps,
        interval: None,
        probed: true,
    };
    let special = direction.irrationality.is_special() || direction.irrationality == Irrationality::Undetermined;
    if let Some(e0) = open_etas.first() {
        let consistent = open_etas.iter().all(|e| e.cross(e0).norm() < opts.eta_tol);
        if !consistent {
            sample.regime = if direction.irrationality == Irrationality::Irr1 {
                Regime::Mixed
            } else {
                Regime::Undecided
            };
            return sample;
        }
        let sum: Vec3 = open_etas.iter().map(|e| if e.dot(e0) < 0.0 { -e } else { *e }).sum();
        let inplane = sum - b * b.dot(&sum);
        sample.eta = Some(inplane.normalize());
        sample.regime = if special {
            let persists = tilted_directions(&b, opts.rotation_deg)
                .iter()
                .all(|t| open_count(ctx, t, &opts.seed) > 0);
            if persists {
                Regime::StableOpen
            } else {
                Regime::PartlyStableOpen
            }
        } else {
            Regime::StableOpen
        };
        return sample;
    }
    sample.regime = if counts.chaotic_directed > 0 {
        Regime::ChaoticDirected
    } else if counts.chaotic_wandering > 0 {
        Regime::ChaoticWandering
    } else if counts.undecided > 0 {
        Regime::Undecided
    } else if opts.separatrix
        && direction.irrationality == Irrationality::Irr1
        && separatrix_graph(ctx, &b, &opts.seed.trace).is_ok_and(|g| g.is_singular_net())
    {
        Regime::SingularNet
    } else {
        Regime::AllClosed
    };
    sample
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityZone {
    pub id: usize,
    /// Grid indices of member directions.
    pub samples: Vec<usize>,
    pub quantum_numbers: IntegerPlane,
    pub integer_residual: f64,
    /// Largest sine of the angle between a member's direction and the zone plane.
    pub max_eta_residual: f64,
    /// Mean directions of the member samples.
    pub etas: Vec<Vec3>,
    pub center: Vec3,
    /// Midpoints of grid edges leaving the zone, ordered around the center.
    pub boundary: Vec<Vec3>,
    /// Midpoints of grid edges inside the zone across which the carrier count jumps.
    pub sub_boundaries: Vec<Vec3>,
    /// Rational direction normal to the zone plane, when it lies inside the zone.
    pub special_direction: Option<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialDirection {
    pub zone: usize,
    pub direction: Vec3,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleDiagram {
    pub level: f64,
    pub resolution_deg: f64,
    pub grid_frequency: usize,
    pub samples: Vec<DirectionSample>,
    pub zones: Vec<StabilityZone>,
    /// Zone of each sample.
    pub zone_of: Vec<Option<usize>>,
    pub special_directions: Vec<SpecialDirection>,
    /// The step budget ran out; unprobed samples are `Undecided`.
    pub budget_exceeded: bool,
    /// Refinement levels applied after the uniform pass.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub refine: usize,
    /// Sample adjacency of a refined diagram; empty for a uniform grid.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub neighbors: Vec<Vec<usize>>,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl AngleDiagram {
    /// Sample graph; vertex `i` is sample `i`.
    pub fn grid(&self) -> SphereGrid {
        if self.neighbors.is_empty() {
            return SphereGrid::new(self.grid_frequency);
        }
        let dirs = self.samples.iter().map(|s| s.direction.unit).collect();
        SphereGrid::from_parts(self.grid_frequency, dirs, self.neighbors.clone())
    }

    pub fn count(&self, regime: Regime) -> usize {
        self.samples.iter().filter(|s| s.regime == regime).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    pub resolution_deg: f64,
    pub probe: ProbeOptions,
    /// Tracer steps per call before the sweep stops early; checked between chunks.
    pub max_steps: Option<u64>,
    /// Representatives probed between budget checks and checkpoints.
    pub chunk: usize,
    /// Probe only directions within the given angle (degrees) of `±axis`.
    pub region: Option<(Vec3, f64)>,
    /// Levels of adaptive refinement: each halves the spacing, probing
    /// only midpoints of edges whose end regimes differ.
    pub refine: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            resolution_deg: 2.0,
            probe: ProbeOptions::default(),
            max_steps: None,
            chunk: 256,
            region: None,
            refine: 0,
        }
    }
}

/// Probes every direction of the grid and assembles zones.
pub fn sweep(ctx: &OrbitContext, opts: &SweepOptions) -> AngleDiagram {
    sweep_resumable(ctx, opts, None, |_| {})
}

/// Like [`sweep`], continuing from `prior` (one entry per antipodal
/// representative) and reporting progress after every chunk.
pub fn sweep_resumable(
    ctx: &OrbitContext,
    opts: &SweepOptions,
    prior: Option<Vec<Option<DirectionSample>>>,
    mut checkpoint: impl FnMut(&[Option<DirectionSample>]),
) -> AngleDiagram {
    let grid = SphereGrid::with_resolution(opts.resolution_deg);
    let reps = grid.representatives();
    let mut done: Vec<Option<DirectionSample>> = match prior {
        Some(p) if p.len() == reps.len() => p,
        _ => vec![None; reps.len()],
    };
    // the budget covers this call only, so a resumed sweep makes progress
    let mut spent: u64 = 0;
    let mut exceeded = false;
    let in_region = |k: usize| {
        opts.region.is_none_or(|(c, deg)| {
            let d = grid.directions[reps[k]];
            d.dot(&c.normalize()).abs() >= deg.to_radians().cos()
        })
    };
    let todo: Vec<usize> = (0..reps.len()).filter(|&k| done[k].is_none() && in_region(k)).collect();
    for chunk in todo.chunks(opts.chunk.max(1)) {
        if opts.max_steps.is_some_and(|m| spent >= m) {
            exceeded = true;
            break;
        }
        let results: Vec<DirectionSample> = chunk
            .par_iter()
            .map(|&k| probe_direction(ctx, &grid.directions[reps[k]], &opts.probe))
            .collect();
        for (&k, s) in chunk.iter().zip(results) {
            spent += s.steps as u64;
            done[k] = Some(s);
        }
        checkpoint(&done);
    }
    let mut samples: Vec<Option<DirectionSample>> = vec![None; grid.len()];
    for (k, &i) in reps.iter().enumerate() {
        let s = done[k].clone().unwrap_or_else(|| {
            exceeded |= in_region(k);
            DirectionSample::unprobed(FieldDirection::unclassified(grid.directions[i]).expect("unit"))
        });
        let j = grid.antipode[i];
        if j != i {
            samples[j] = Some(s.antipodal());
        }
        samples[i] = Some(s);
    }
    let samples: Vec<DirectionSample> = samples
        .into_iter()
        .map(|s| s.expect("every direction filled"))
        .collect();
    let refine::Refined { grid, mut samples } = if opts.refine > 0 && !exceeded {
        let near = |s: &DirectionSample| {
            opts.region.is_none_or(|(c, deg)| {
                s.direction.unit.dot(&c.normalize()).abs() >= deg.to_radians().cos()
            })
        };
        refine::refine(ctx, opts, grid, samples, near, &mut spent, &mut exceeded)
    } else {
        refine::Refined { grid, samples }
    };
    let (zones, zone_of) = assemble_zones(&grid, &mut samples, &ctx.model.basis, opts.probe.eta_tol);
    // local behaviour at special directions inside zones
    let special_directions = zones
        .par_iter()
        .filter_map(|z| z.special_direction.map(|d| (z.id, d)))
        .map(|(zone, d)| SpecialDirection {
            zone,
            direction: d,
            regime: probe_direction(ctx, &d, &opts.probe).regime,
        })
        .collect();
    AngleDiagram {
        level: ctx.level,
        resolution_deg: opts.resolution_deg,
        grid_frequency: grid.frequency,
        samples,
        zones,
        zone_of,
        special_directions,
        budget_exceeded: exceeded,
        refine: opts.refine,
        neighbors: if opts.refine > 0 { grid.neighbors } else { Vec::new() },
    }
}

/// Widest open-orbit strip at `b`, for [`strip_crossover_field`].
pub fn measure_strip_width(ctx: &OrbitContext, b: &Vec3, trace: &TraceOptions) -> Option<f64> {
    let seed = SeedOptions {
        trace: *trace,
        ..SeedOptions::default()
    };
    seed_orbits(ctx, b, &seed)
        .trajectories
        .iter()
        .filter_map(|t| t.strip_width)
        .reduce(f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{fixtures, make_thin_net};

    #[test]
    fn rank_zero_model_is_all_closed() {
        let f = fixtures::sphere();
        let ctx = OrbitContext::new(&f.model, f.level.value, 32).unwrap();
        let s = probe_direction(&ctx, &Vec3::new(0.3, 0.1, 0.9), &ProbeOptions::default());
        assert_eq!(s.regime, Regime::AllClosed);
        assert!(s.eta.is_none());
    }

    #[test]
    fn thin_net_near_pole() {
        let net = make_thin_net(0.1).unwrap();
        let ctx = OrbitContext::new(&net.model, net.level.value, 32).unwrap();
        let b = Vec3::new(
            2f64.to_radians().sin() * 0.6,
            2f64.to_radians().sin() * 0.8,
            2f64.to_radians().cos(),
        );
        let s = probe_direction(&ctx, &b, &ProbeOptions::default());
        assert_eq!(s.regime, Regime::StableOpen);
        let eta = s.eta.unwrap();
        assert!(eta.dot(&s.direction.unit).abs() < 1e-9);
        let expect = s.direction.unit.cross(&Vec3::z()).normalize();
        assert!(eta.cross(&expect).norm() < 1e-2);

        let pole = probe_direction(&ctx, &Vec3::z(), &ProbeOptions::default());
        assert!(
            matches!(pole.regime, Regime::SingularNet | Regime::Mixed),
            "{:?}",
            pole.regime
        );
    }

    #[test]
    fn partly_stable_cylinder() {
        let f = fixtures::cylinder();
        let ctx = OrbitContext::new(&f.model, f.level.value, 32).unwrap();
        let s = probe_direction(&ctx, &Vec3::new(1.0, 0.0, 0.0), &ProbeOptions::default());
        assert_eq!(s.regime, Regime::PartlyStableOpen);
    }
}
