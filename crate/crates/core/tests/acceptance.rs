//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Criterion numbers given on the
//! command line restrict the run, e.g. `cargo test --test acceptance -- 5 6`.

use std::cell::OnceCell;
use std::time::Instant;

use num_rational::Ratio;
use openorbit::dispersion::{fixtures, make_anferms, make_thin_net, net_current, DispersionModel, EnergyLevel, Term};
use openorbit::lattice::{classify_direction, Irrationality};
use openorbit::orbits::{
    classify_chain, open_energy_interval, seed_orbits, IntervalOptions, OrbitContext, SeedOptions,
};
use openorbit::surface::{analyze, extract_surface};
use openorbit::transport::{
    chaotic_exponents, closed_exponents, closed_resistance_exponents, conductivity_asymptotics, inversion_slope_error,
    open_exponents, open_resistance_exponents, ChaoticParams, ExponentMatrix,
};
use openorbit::zones::{
    predicted_quantum_numbers, sweep, zone_quantum_numbers, AngleDiagram, ProbeOptions, Regime, SweepOptions,
};
use openorbit::{probe_direction, IntegerPlane, OrbitClass, PlaneSlice, TraceOptions, Vec3};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

#[derive(Default)]
struct Sweeps {
    thin_net: OnceCell<(AngleDiagram, f64)>,
}

impl Sweeps {
    fn thin_net(&self) -> &(AngleDiagram, f64) {
        self.thin_net.get_or_init(|| {
            let net = make_thin_net(0.1).unwrap();
            let ctx = OrbitContext::new(&net.model, net.level.value, 32).unwrap();
            let t = Instant::now();
            let d = sweep(
                &ctx,
                &SweepOptions {
                    resolution_deg: 2.0,
                    ..Default::default()
                },
            );
            (d, t.elapsed().as_secs_f64())
        })
    }
}

fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    // angle between lines
    (a.normalize().dot(&b.normalize()).abs().min(1.0)).acos().to_degrees()
}

fn axes() -> [Vec3; 6] {
    [Vec3::x(), -Vec3::x(), Vec3::y(), -Vec3::y(), Vec3::z(), -Vec3::z()]
}

fn thin_net_zones(sweeps: &Sweeps) -> Outcome {
    let (d, secs) = sweeps.thin_net();
    let grid = d.grid();
    ensure!(d.zones.len() == 6, "{} zones, expected 6", d.zones.len());
    let mut axis_zone = Vec::new();
    for a in axes() {
        let z = d.zone_of[grid.nearest(&a)];
        ensure!(z.is_some(), "no zone at {:?}", a.as_slice());
        axis_zone.push(z.unwrap());
    }
    let mut sorted = axis_zone.clone();
    sorted.sort();
    sorted.dedup();
    ensure!(sorted.len() == 6, "axes share zones: {axis_zone:?}");
    let mut worst: f64 = 0.0;
    for (a, &zi) in axes().iter().zip(&axis_zone) {
        let z = &d.zones[zi];
        let n = z.quantum_numbers.n.map(|c| c.abs());
        let expect = [a.x.abs() as i64, a.y.abs() as i64, a.z.abs() as i64];
        ensure!(
            n == expect,
            "zone at {:?} has plane {}",
            a.as_slice(),
            z.quantum_numbers
        );
        for &i in &z.samples {
            let s = &d.samples[i];
            let b = s.direction.unit;
            let line = b.cross(a);
            for e in s.open_etas.iter().chain(s.eta.iter()) {
                worst = worst.max(angle_deg(e, &line));
            }
        }
    }
    ensure!(
        worst <= 3.0,
        "open direction off the coordinate plane by {worst:.2} deg"
    );
    Ok(format!(
        "6 zones at 2 deg ({} directions, {secs:.0} s), worst eta deviation {worst:.3} deg",
        d.samples.len()
    ))
}

fn lemma_corpus() -> Outcome {
    let check = |name: &str, model: &DispersionModel, level: f64, n: usize| -> Result<usize, String> {
        let mesh = match extract_surface(model, &EnergyLevel::new(level), n) {
            Ok(m) => m,
            Err(_) => return Ok(0),
        };
        let comps = analyze(&mesh, 4).map_err(|e| format!("{name}: {e}"))?;
        let mut total = [0i64; 3];
        for c in &comps {
            let r = c.rank.unwrap();
            let h = c.homology_class.unwrap();
            if h == [0, 0, 0] {
                ensure!(
                    c.genus >= r,
                    "{name}: homology-zero component with genus {} < rank {r}",
                    c.genus
                );
            } else {
                ensure!(r <= 2, "{name}: component of class {h:?} has rank {r}");
            }
            for k in 0..3 {
                total[k] += h[k];
            }
        }
        ensure!(total == [0, 0, 0], "{name}: total homology {total:?}");
        Ok(comps.len())
    };
    let corpus = fixtures::all();
    ensure!(corpus.len() >= 6, "only {} fixtures", corpus.len());
    let mut comps = 0;
    for f in &corpus {
        comps += check(f.name, &f.model, f.level.value, 32)?;
    }
    let mut runner = TestRunner::new(Config {
        cases: 24,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.02..0.98f64);
    runner
        .run(&strategy, |(a, b, c, t)| {
            let m = make_anferms(a, b, c).unwrap();
            let (lo, hi) = m.energy_range(32);
            let level = lo + t * (hi - lo);
            check("anferms", &m, level, 24).map_err(TestCaseError::fail)?;
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "{} fixtures ({comps} components) and 24 random anferms levels",
        corpus.len()
    ))
}

fn resonance() -> Outcome {
    let m = make_anferms(1.0, 0.0, 0.0).unwrap();
    let ctx = OrbitContext::new(&m, 0.0, 48).unwrap();
    let center = Vec3::new(0.2, 0.3, 1.0).normalize();
    let opts = SweepOptions {
        resolution_deg: 2.0,
        region: Some((center, 5.0)),
        ..Default::default()
    };
    let d = sweep(&ctx, &opts);
    let grid = d.grid();
    let zi = d.zone_of[grid.nearest(&center)].ok_or("no zone at the region center")?;
    let zone = &d.zones[zi];
    let plane = zone_quantum_numbers(zone, &m.basis, opts.probe.eta_tol).map_err(|e| e.to_string())?;
    ensure!(
        plane == zone.quantum_numbers,
        "refit gives {plane}, zone has {}",
        zone.quantum_numbers
    );
    ensure!(
        zone.integer_residual < 1e-3,
        "integer residual {:.2e}",
        zone.integer_residual
    );
    // interior samples: every neighbour in the same zone
    let interior: Vec<usize> = zone
        .samples
        .iter()
        .copied()
        .filter(|&i| grid.neighbors[i].iter().all(|&j| d.zone_of[j] == Some(zi)))
        .collect();
    ensure!(
        !interior.is_empty(),
        "zone of {} samples has no interior",
        zone.samples.len()
    );
    let accurate = ProbeOptions {
        seed: SeedOptions {
            plane_count: 6,
            seeds_per_plane: 4,
            arc_budget: 2e5,
            trace: TraceOptions {
                min_arc: 100.0,
                dir_tol: 1e-2,
                ..TraceOptions::default()
            },
            ..SeedOptions::default()
        },
        ..ProbeOptions::default()
    };
    let jitter = 0.4 * grid.spacing_deg().to_radians();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_eta, mut worst_perp, mut orbits) = (0.0f64, 0.0f64, 0);
    let mut probed = 0;
    while probed < 20 {
        let base = grid.directions[interior[rng.gen_range(0..interior.len())]];
        let b = (base + Vec3::new(rng.gen(), rng.gen(), rng.gen()).map(|v: f64| (2.0 * v - 1.0) * jitter)).normalize();
        let dir = classify_direction(b, &m.basis, 8, 1e-9).unwrap();
        if dir.irrationality != Irrationality::Irr3 {
            continue;
        }
        probed += 1;
        let s = probe_direction(&ctx, &b, &accurate);
        ensure!(
            !s.open_etas.is_empty(),
            "no open orbits at {:?} ({:?})",
            b.as_slice(),
            s.regime
        );
        let e0 = s.open_etas[0];
        for e in &s.open_etas {
            worst_eta = worst_eta.max(angle_deg(e, &e0));
            worst_perp = worst_perp.max(e.normalize().dot(&b).abs());
        }
        orbits += s.open_etas.len();
    }
    ensure!(worst_eta <= 1.0, "open directions spread {worst_eta:.3} deg");
    ensure!(worst_perp <= 1e-6, "eta.B up to {worst_perp:.2e}");
    Ok(format!(
        "zone {} of {} samples, residual {:.1e}; 20 directions, {orbits} open orbits, spread {worst_eta:.3} deg, |eta.B| {worst_perp:.1e}",
        zone.quantum_numbers,
        zone.samples.len(),
        zone.integer_residual
    ))
}

fn disjoint(name: &str, d: &AngleDiagram) -> Result<String, String> {
    let mut owners: Vec<Vec<IntegerPlane>> = vec![Vec::new(); d.samples.len()];
    for z in &d.zones {
        for &i in &z.samples {
            ensure!(
                d.zone_of[i] == Some(z.id),
                "{name}: sample {i} listed by zone {} but mapped to {:?}",
                z.id,
                d.zone_of[i]
            );
            owners[i].push(z.quantum_numbers);
        }
    }
    for (i, o) in owners.iter().enumerate() {
        ensure!(o.len() <= 1, "{name}: sample {i} in planes {o:?}");
        ensure!(
            o.is_empty() == d.zone_of[i].is_none(),
            "{name}: sample {i} zone map disagrees"
        );
    }
    let assigned = owners.iter().filter(|o| !o.is_empty()).count();
    Ok(format!("{name}: {} zones, {assigned} samples", d.zones.len()))
}

fn non_overlap(sweeps: &Sweeps) -> Outcome {
    let mut parts = vec![disjoint("thin net 2 deg", &sweeps.thin_net().0)?];
    for (a, b, c, level) in [(1.0, 0.3, 0.0, 0.3), (1.0, 0.0, 0.0, 0.0)] {
        let m = make_anferms(a, b, c).unwrap();
        let ctx = OrbitContext::new(&m, level, 48).unwrap();
        let d = sweep(
            &ctx,
            &SweepOptions {
                resolution_deg: 12.0,
                ..Default::default()
            },
        );
        parts.push(disjoint(&format!("anferms({a}, {b}, {c}) at {level}, 12 deg"), &d)?);
    }
    Ok(parts.join("; "))
}

fn ints(m: [[i64; 3]; 3]) -> ExponentMatrix {
    m.map(|row| row.map(Ratio::from_integer))
}

fn conductivity_forms(sweeps: &Sweeps) -> Outcome {
    ensure!(
        closed_exponents() == ints([[-2, -1, -1], [-1, -2, -1], [-1, -1, 0]]),
        "closed conductivity exponents"
    );
    ensure!(
        open_exponents() == ints([[-2, -1, -1], [-1, 0, 0], [-1, 0, 0]]),
        "open conductivity exponents"
    );
    ensure!(
        closed_resistance_exponents() == ints([[0, 1, 0], [1, 0, 0], [0, 0, 0]]),
        "closed resistance exponents"
    );
    ensure!(
        open_resistance_exponents() == ints([[2, 1, 1], [1, 0, 0], [1, 0, 0]]),
        "open resistance exponents"
    );
    let (al, ga) = (Ratio::new(1, 3), Ratio::new(1, 4));
    let be = Ratio::from_integer(1) - al;
    let c = chaotic_exponents(al, ga);
    let two = Ratio::from_integer(2);
    let expect = [
        [-two * al, Ratio::from_integer(-1), -al - ga],
        [Ratio::from_integer(-1), -two * be, -be - ga],
        [-al - ga, -be - ga, -two * ga],
    ];
    ensure!(c == expect, "chaotic exponents");
    ensure!(c[0][0] + c[1][1] == Ratio::from_integer(-2), "alpha + beta != 1");
    for (a, g) in [(0.0, 0.5), (1.0, 0.5), (0.5, 1.2)] {
        let p = ChaoticParams {
            alpha: a,
            gamma: g,
            axis: None,
        };
        ensure!(
            conductivity_asymptotics(Regime::ChaoticWandering, None, &Vec3::z(), Some(p)).is_err(),
            "alpha={a}, gamma={g} accepted"
        );
    }

    // generic order-one coefficients; the (1,2) block carries the Hall part
    let coeffs = [[0.7, 0.9, 0.4], [-0.9, 1.3, 0.6], [-0.4, -0.2, 1.1]];
    let b = Vec3::new(0.1, 0.2, 1.0).normalize();
    let eta = b.cross(&Vec3::z()).normalize();
    let open = conductivity_asymptotics(Regime::StableOpen, Some(eta), &b, None)
        .unwrap()
        .with_coefficients(coeffs);
    let limit = open.evaluate(1e9);
    let rank = limit
        .svd(false, false)
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-6)
        .count();
    ensure!(rank == 2, "open limit has rank {rank}");
    let closed = conductivity_asymptotics(Regime::AllClosed, None, &b, None)
        .unwrap()
        .with_coefficients(coeffs);
    let wt = [1e3, 1e4, 1e5, 1e6];
    let e_closed = inversion_slope_error(&closed, &closed_resistance_exponents(), &wt);
    let e_open = inversion_slope_error(&open, &open_resistance_exponents(), &wt);
    ensure!(e_closed <= 0.05, "closed inversion slopes off by {e_closed:.3}");
    ensure!(e_open <= 0.05, "open inversion slopes off by {e_open:.3}");

    let predicted = predicted_quantum_numbers();
    let (d, _) = sweeps.thin_net();
    for z in &d.zones {
        ensure!(
            predicted.contains(&z.quantum_numbers),
            "thin net plane {} not predicted",
            z.quantum_numbers
        );
    }
    Ok(format!(
        "exponents exact, open limit rank 2, slope errors {e_closed:.1e}/{e_open:.1e}, {} thin-net planes predicted",
        d.zones.len()
    ))
}

fn hygiene() -> Outcome {
    let sheared = {
        use openorbit::lattice::reciprocal_basis;
        let basis = reciprocal_basis(
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.3, 1.1, 0.0),
            Vec3::new(0.2, -0.1, 0.9),
            1.0,
        )
        .unwrap();
        DispersionModel::new(
            "sheared",
            vec![
                Term::cos([1, 0, 0], 1.0),
                Term::cos([1, 1, 0], 0.4),
                Term::cos([0, 1, -1], 0.3),
            ],
            0.0,
            basis,
        )
        .unwrap()
    };
    let models = [
        make_anferms(1.0, 0.3, 0.1).unwrap(),
        make_thin_net(0.1).unwrap().model,
        sheared,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst_grad: f64 = 0.0;
    let h = 1e-5;
    for k in 0..1000 {
        let m = &models[k % models.len()];
        let p = Vec3::new(
            rng.gen_range(-4.0..4.0),
            rng.gen_range(-4.0..4.0),
            rng.gen_range(-4.0..4.0),
        );
        let g = m.gradient(&p);
        let mut fd = Vec3::zeros();
        for i in 0..3 {
            let mut e = Vec3::zeros();
            e[i] = h;
            fd[i] = (m.evaluate(&(p + e)) - m.evaluate(&(p - e))) / (2.0 * h);
        }
        worst_grad = worst_grad.max((fd - g).norm() / g.norm().max(m.amplitude_scale()));
    }
    ensure!(worst_grad < 1e-6, "gradient relative error {worst_grad:.2e}");

    let mut worst_drift: f64 = 0.0;
    let mut traces = 0;
    let net = make_thin_net(0.1).unwrap();
    let g3 = fixtures::genus_three();
    let cyl = fixtures::cylinder();
    for (model, level, dirs) in [
        (
            &net.model,
            net.level.value,
            vec![Vec3::new(0.05, 0.03, 1.0), Vec3::new(0.3, 0.5, 1.0)],
        ),
        (
            &g3.model,
            g3.level.value,
            vec![Vec3::new(0.2, 0.3, 1.0), Vec3::new(0.7, 0.1, 0.4)],
        ),
        (&cyl.model, cyl.level.value, vec![Vec3::new(1.0, 0.01, 0.02)]),
    ] {
        let ctx = OrbitContext::new(model, level, 32).unwrap();
        for b in dirs {
            let fam = seed_orbits(&ctx, &b.normalize(), &SeedOptions::default());
            for t in &fam.trajectories {
                worst_drift = worst_drift.max(t.max_drift);
                traces += 1;
            }
        }
    }
    ensure!(worst_drift < 1e-8, "constraint drift {worst_drift:.2e}");

    let mut worst_current: f64 = 0.0;
    for (m, level) in [
        (make_anferms(1.0, 0.3, 0.1).unwrap(), 0.2),
        (net.model.clone(), net.level.value),
        (fixtures::donut().model, 0.3),
    ] {
        ensure!(m.is_even(), "{} is not even", m.name);
        for t in [0.0, 0.05] {
            let c = net_current(&m, &EnergyLevel::new(level), t, 32).map_err(|e| e.to_string())?;
            worst_current = worst_current.max(c.current.norm() / c.scale);
        }
    }
    ensure!(worst_current < 1e-10, "net current {worst_current:.2e} of scale");

    for f in fixtures::all() {
        let mut inv = Vec::new();
        for n in [32, 64] {
            let mesh = extract_surface(&f.model, &f.level, n).map_err(|e| format!("{}: {e}", f.name))?;
            let comps = analyze(&mesh, 4).map_err(|e| format!("{}: {e}", f.name))?;
            let mut v: Vec<_> = comps.iter().map(|c| (c.genus, c.rank, c.homology_class)).collect();
            v.sort();
            inv.push(v);
        }
        ensure!(inv[0] == inv[1], "{}: {:?} vs {:?}", f.name, inv[0], inv[1]);
    }
    Ok(format!(
        "gradient {worst_grad:.1e}, drift {worst_drift:.1e} over {traces} traces, current {worst_current:.1e}, grid doubling stable"
    ))
}

fn chain(f: impl Fn(f64) -> [f64; 2], len: f64, ds: f64) -> Vec<Vec3> {
    (0..=(len / ds) as usize)
        .map(|i| {
            let q = f(i as f64 * ds);
            Vec3::new(q[0], q[1], 0.0)
        })
        .collect()
}

fn interval_and_chaos() -> Outcome {
    let net = make_thin_net(0.1).unwrap();
    let level = net.level.value;
    let dirs = [
        Vec3::new(0.061, 0.037, 1.0),
        Vec3::new(-0.043, 0.072, 1.0),
        Vec3::new(1.0, 0.052, -0.031),
        Vec3::new(0.047, 1.0, 0.066),
        Vec3::new(-0.058, -0.041, -1.0),
    ];
    let opts = IntervalOptions::default();
    let mut widths = Vec::new();
    for b in dirs {
        let dir = classify_direction(b, &net.model.basis, 8, 1e-9).unwrap();
        let iv = open_energy_interval(&net.model, &dir, 64, &opts).map_err(|e| format!("{:?}: {e}", b.as_slice()))?;
        ensure!(
            iv.contains(level),
            "{:?}: interval {:?} misses the net level {level}",
            b.as_slice(),
            iv.stable
        );
        let s = iv.stable.unwrap();
        widths.push(s[1] - s[0]);
    }

    let rank0 = make_anferms(0.0, 0.0, 1.0).unwrap();
    for b in [
        Vec3::new(0.061, 0.037, 1.0),
        Vec3::new(0.3, 0.5, 0.8),
        Vec3::new(1.0, 0.2, 0.05),
    ] {
        let dir = classify_direction(b, &rank0.basis, 8, 1e-9).unwrap();
        let iv = open_energy_interval(&rank0, &dir, 64, &opts).map_err(|e| e.to_string())?;
        ensure!(
            iv.stable.is_none(),
            "rank-0 model has open orbits at {:?}: {:?}",
            b.as_slice(),
            iv.stable
        );
    }

    let slice = PlaneSlice::new(&Vec3::z(), 0.0);
    let topts = TraceOptions {
        min_arc: 50.0,
        max_arc: 5000.0,
        ..Default::default()
    };
    let growing = chain(
        |t| {
            [
                t,
                0.05 * t.powf(0.8) * (4.0 * std::f64::consts::PI * (t + 1.0).log2()).sin(),
            ]
        },
        5000.0,
        0.05,
    );
    let spiral = chain(
        |t| {
            let (r, th) = (t.sqrt() * 10.0, t.ln().max(0.0) * 2.0);
            [r * th.cos(), r * th.sin()]
        },
        5000.0,
        0.05,
    );
    let c1 = classify_chain(&growing, &slice, None, &topts).0;
    let c2 = classify_chain(&spiral, &slice, None, &topts).0;
    ensure!(c1 == OrbitClass::ChaoticDirected, "growing strip classified {c1:?}");
    ensure!(c2 == OrbitClass::ChaoticWandering, "turning drift classified {c2:?}");
    Ok(format!(
        "5 thin-net directions connected around {level:.3} (widths {:.3}..{:.3}), rank-0 empty, synthetic chains directed/wandering",
        widths.iter().cloned().fold(f64::INFINITY, f64::min),
        widths.iter().cloned().fold(0.0, f64::max)
    ))
}

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let sweeps = Sweeps::default();
    let criteria: [(&str, &dyn Fn() -> Outcome); 7] = [
        ("thin net zones", &|| thin_net_zones(&sweeps)),
        ("lemma corpus", &lemma_corpus),
        ("topological resonance", &resonance),
        ("zone non-overlap", &|| non_overlap(&sweeps)),
        ("conductivity forms", &|| conductivity_forms(&sweeps)),
        ("numerical hygiene", &hygiene),
        ("open-orbit interval and chaos", &interval_and_chaos),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let n = k + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let r =
            std::panic::catch_unwind(std::panic::AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(detail) => println!("criterion {n} {name}: PASS [{secs:.0} s] {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} {name}: FAIL [{secs:.0} s] {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
