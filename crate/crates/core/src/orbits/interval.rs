use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{seed_orbits, OrbitContext, OrbitError, OrbitFamilies, SeedOptions};
use crate::dispersion::{critical_values, DispersionModel};
use crate::lattice::{FieldDirection, Vec3};
use crate::surface::critical::plane_frame;
use crate::surface::SurfaceError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntervalOptions {
    pub grid_n: usize,
    /// Tilt used to test whether open orbits at a rational direction persist.
    pub rotation_deg: f64,
    pub seed: SeedOptions,
}

impl Default for IntervalOptions {
    fn default() -> Self {
        Self {
            grid_n: 32,
            rotation_deg: 1.0,
            seed: SeedOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelStatus {
    /// Singular, empty or unresolved level.
    Skipped,
    NoOpen,
    /// Open orbits that survive small rotations of the field.
    Stable,
    /// Open orbits at a rational direction that disappear under rotation.
    PartlyStable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelProbe {
    pub level: f64,
    pub status: LevelStatus,
    pub open_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyScan {
    pub b: Vec3,
    pub step: f64,
    pub probes: Vec<LevelProbe>,
}

/// Energies carrying stable open orbits, as a hull of scan cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyInterval {
    /// `[eps1, eps2]`; `None` when no stable open orbits were found.
    pub stable: Option<[f64; 2]>,
    /// Only one scan level carries stable open orbits.
    pub degenerate: bool,
    /// Hull including partly stable families; only for rational directions.
    pub partly_stable_bounds: Option<[f64; 2]>,
    pub scan: EnergyScan,
}

impl EnergyInterval {
    pub fn eps1(&self) -> Option<f64> {
        self.stable.map(|s| s[0])
    }

    pub fn eps2(&self) -> Option<f64> {
        self.stable.map(|s| s[1])
    }

    pub fn contains(&self, e: f64) -> bool {
        self.stable.is_some_and(|s| s[0] <= e && e <= s[1])
    }
}

/// Field direction tilted by `deg` degrees towards each of four in-plane axes.
pub fn tilted_directions(b: &Vec3, deg: f64) -> [Vec3; 4] {
    let (u, v) = plane_frame(b);
    let (s, c) = deg.to_radians().sin_cos();
    [u, -u, v, -v].map(|a| (b * c + a * s).normalize())
}

fn has_open(f: &OrbitFamilies) -> usize {
    f.trajectories.iter().filter(|t| t.class.is_open()).count()
}

/// Whether open orbits exist at `dir` and, for rational directions, whether
/// they persist under a small tilt of the field.
pub fn open_status(ctx: &OrbitContext, dir: &FieldDirection, opts: &IntervalOptions) -> (LevelStatus, usize) {
    let fam = seed_orbits(ctx, &dir.unit, &opts.seed);
    let n = has_open(&fam);
    if n == 0 {
        return (LevelStatus::NoOpen, 0);
    }
    if !dir.irrationality.is_special() {
        return (LevelStatus::Stable, n);
    }
    let persists = tilted_directions(&dir.unit, opts.rotation_deg)
        .iter()
        .all(|b| has_open(&seed_orbits(ctx, b, &opts.seed)) > 0);
    if persists {
        (LevelStatus::Stable, n)
    } else {
        (LevelStatus::PartlyStable, n)
    }
}

fn hull(probes: &[LevelProbe], pick: impl Fn(LevelStatus) -> bool) -> Option<(usize, usize)> {
    let first = probes.iter().position(|p| pick(p.status))?;
    let last = probes.iter().rposition(|p| pick(p.status))?;
    Some((first, last))
}

/// Scans `eps_grid` energies across the band for open orbits at direction `dir`.
///
/// Levels passing near a critical value of the energy are skipped. Each
/// scan level stands for a cell of width `step`, so the reported bounds are
/// the outer edges of the first and last cells with stable open orbits.
pub fn open_energy_interval(
    model: &DispersionModel,
    dir: &FieldDirection,
    eps_grid: usize,
    opts: &IntervalOptions,
) -> Result<EnergyInterval, OrbitError> {
    if eps_grid < 16 {
        return Err(OrbitError::GridTooSmall(eps_grid));
    }
    let crit = critical_values(model, 32);
    let (lo, hi) = model.energy_range(32);
    let step = (hi - lo) / eps_grid as f64;
    let probes: Vec<LevelProbe> = (0..eps_grid)
        .into_par_iter()
        .map(|i| {
            let level = lo + (i as f64 + 0.5) * step;
            let skipped = LevelProbe {
                level,
                status: LevelStatus::Skipped,
                open_count: 0,
            };
            if crit.iter().any(|c| (c - level).abs() < 1e-3 * step) {
                return Ok(skipped);
            }
            match OrbitContext::new(model, level, opts.grid_n) {
                Ok(ctx) => {
                    let (status, open_count) = open_status(&ctx, dir, opts);
                    Ok(LevelProbe {
                        level,
                        status,
                        open_count,
                    })
                }
                Err(OrbitError::Surface(
                    SurfaceError::SingularLevel { .. }
                    | SurfaceError::EmptyLevel { .. }
                    | SurfaceError::NonManifoldEdge(..)
                    | SurfaceError::NonOrientable(..),
                )) => Ok(skipped),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, OrbitError>>()?;
    let scan = EnergyScan {
        b: dir.unit,
        step,
        probes,
    };
    let stable = hull(&scan.probes, |s| s == LevelStatus::Stable);
    if let Some((a, b)) = stable {
        if scan.probes[a..=b].iter().any(|p| p.status == LevelStatus::NoOpen) {
            return Err(OrbitError::NonConnectedDetection(Box::new(scan)));
        }
    }
    let cell = |a: usize, b: usize| {
        [
            (scan.probes[a].level - 0.5 * step).max(lo),
            (scan.probes[b].level + 0.5 * step).min(hi),
        ]
    };
    let partly = if dir.irrationality.is_special() {
        hull(&scan.probes, |s| {
            matches!(s, LevelStatus::Stable | LevelStatus::PartlyStable)
        })
        .filter(|_| scan.probes.iter().any(|p| p.status == LevelStatus::PartlyStable))
        .map(|(a, b)| cell(a, b))
    } else {
        None
    };
    let degenerate = stable.is_some_and(|(a, b)| a == b);
    Ok(EnergyInterval {
        stable: stable.map(|(a, b)| cell(a, b)),
        degenerate,
        partly_stable_bounds: partly,
        scan,
    })
}
