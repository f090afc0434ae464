//! Command-line driver: configuration, run manifests and file outputs.

pub mod config;
pub mod manifest;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use openorbit::orbits::{project_to_curve, OrbitError, PlaneSlice};
use openorbit::surface::{analyze, topology_report, write_obj};
use openorbit::transport::{conductivity_asymptotics, resistance_asymptotics, AsymptoticTensor, Resistance};
use openorbit::zones::{
    probe_direction, sweep_resumable, write_csv, write_svg, AngleDiagram, DirectionSample, ProbeOptions, Regime,
};
use openorbit::{
    classify_direction, extract_surface, open_energy_interval, trace, EnergyLevel, OrbitContext, SurfaceError, Vec3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::RunConfig;
pub use manifest::RunManifest;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("step budget exhausted; partial results written to {0}")]
    Budget(PathBuf),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Geometry(_) => 3,
            CliError::Budget(_) => 4,
            CliError::Io(_) | CliError::Other(_) => 1,
        }
    }
}

impl From<SurfaceError> for CliError {
    fn from(e: SurfaceError) -> Self {
        match e {
            SurfaceError::GridTooSmall(_) => CliError::Config(e.to_string()),
            _ => CliError::Geometry(e.to_string()),
        }
    }
}

impl From<OrbitError> for CliError {
    fn from(e: OrbitError) -> Self {
        match e {
            OrbitError::Surface(s) => s.into(),
            OrbitError::SeedOffSurface | OrbitError::NotDirected => CliError::Geometry(e.to_string()),
            OrbitError::GridTooSmall(_) => CliError::Config(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "openorbit",
    version,
    about = "Fermi surface topology and magnetic orbit analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GlobalArgs {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Sweep grid resolution in degrees.
    #[arg(long, global = true)]
    pub resolution: Option<f64>,
    /// Tracer step budget for a sweep.
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    /// Continue the sweep recorded in this manifest.
    #[arg(long, global = true)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Extract the Fermi surface and report its topology.
    Surface,
    /// Trace one trajectory.
    Trace,
    /// Scan energies for stable open orbits at one direction.
    Interval,
    /// Sweep field directions and assemble stability zones.
    Sweep,
    /// Asymptotic conductivity and resistance for a direction or zone.
    Transport,
    /// Summarize the outputs in the run directory.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Surface => "surface",
            Command::Trace => "trace",
            Command::Interval => "interval",
            Command::Sweep => "sweep",
            Command::Transport => "transport",
            Command::Report => "report",
        }
    }
}

pub fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    if let Some(n) = cli.global.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let (mut cfg, prior) = match &cli.global.resume {
        Some(m) => {
            let (man, cfg) = RunManifest::load_with_config(m)?;
            (cfg, Some(man))
        }
        None => match &cli.global.config {
            Some(p) => (RunConfig::load(p)?, None),
            None => (RunConfig::default(), None),
        },
    };
    if let Some(o) = &cli.global.out {
        cfg.output_dir = o.clone();
    }
    if let Some(r) = cli.global.resolution {
        if !(r > 0.0 && r <= 90.0) {
            return Err(CliError::Config(format!("resolution {r} is outside (0, 90]")));
        }
        cfg.sweep.resolution_deg = r;
    }
    if let Some(b) = cli.global.budget {
        cfg.sweep.max_steps = Some(b);
    }
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out)?;
    let mut manifest = match prior {
        Some(m) if m.config_hash == cfg.hash() => m,
        _ => RunManifest::load_or_new(&out, &cfg)?,
    };
    let start = Instant::now();
    let result = match cli.command {
        Command::Surface => cmd_surface(&cfg, &out),
        Command::Trace => cmd_trace(&cfg, &out),
        Command::Interval => cmd_interval(&cfg, &out),
        Command::Sweep => cmd_sweep(&cfg, &out, &mut manifest),
        Command::Transport => cmd_transport(&cfg, &out),
        Command::Report => cmd_report(&out, &manifest),
    };
    let (files, err) = match result {
        Ok(files) => (files, None),
        Err((files, e)) => (files, Some(e)),
    };
    let secs = start.elapsed().as_secs_f64();
    log::info!(
        "{} {} in {secs:.1} s",
        cli.command.name(),
        if err.is_none() { "done" } else { "failed" }
    );
    manifest.record(cli.command.name(), files, secs, err.is_none());
    manifest.save(&out, &cfg)?;
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

type CmdResult = Result<Vec<String>, (Vec<String>, CliError)>;

fn fail<E: Into<CliError>>(e: E) -> (Vec<String>, CliError) {
    (Vec::new(), e.into())
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<String, CliError> {
    let mut w = BufWriter::new(File::create(out.join(name))?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Other(e.to_string()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(name.to_string())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

fn vec3(a: [f64; 3]) -> Result<Vec3, CliError> {
    let v = Vec3::new(a[0], a[1], a[2]);
    if v.norm() > 0.0 && v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(CliError::Config(format!("bad direction {a:?}")))
    }
}

fn cmd_surface(cfg: &RunConfig, out: &Path) -> CmdResult {
    let (model, level) = cfg.model().map_err(fail)?;
    let mesh = extract_surface(&model, &EnergyLevel::new(level), cfg.grid_n).map_err(fail)?;
    let comps = analyze(&mesh, 4).map_err(fail)?;
    let mut obj = BufWriter::new(File::create(out.join("surface.obj")).map_err(fail)?);
    write_obj(&mesh, &model.basis, &mut obj).map_err(fail)?;
    obj.flush().map_err(fail)?;
    let report = topology_report(&mesh, &comps);
    let json = write_json(out, "topology.json", &report).map_err(fail)?;
    Ok(vec!["surface.obj".into(), json])
}

#[derive(Serialize)]
struct TraceSidecar<'a> {
    b: Vec3,
    h: f64,
    start: Vec3,
    class: openorbit::OrbitClass,
    eta: Option<Vec3>,
    strip_width: Option<f64>,
    period_vector: Option<[i64; 3]>,
    arc_length: f64,
    low_accuracy: bool,
    max_drift: f64,
    steps: usize,
    points_file: &'a str,
}

fn cmd_trace(cfg: &RunConfig, out: &Path) -> CmdResult {
    let (model, level) = cfg.model().map_err(fail)?;
    let b = vec3(cfg.trace.b).map_err(fail)?.normalize();
    let slice = PlaneSlice::new(&b, cfg.trace.h);
    let start = match cfg.trace.start {
        Some(s) => project_to_curve(&model, level, &slice, &Vec3::new(s[0], s[1], s[2])),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let basis = &model.basis;
            (0..2000).find_map(|_| {
                let x = basis.to_cartesian(&Vec3::new(rng.gen(), rng.gen(), rng.gen()));
                let x = x - b * (b.dot(&x) - cfg.trace.h);
                project_to_curve(&model, level, &slice, &x)
            })
        }
    }
    .ok_or_else(|| fail(OrbitError::SeedOffSurface))?;
    let tr = trace(&model, level, &slice, &start, &cfg.trace.options).map_err(fail)?;
    let mut w = csv::Writer::from_path(out.join("trajectory.csv")).map_err(|e| fail(CliError::Other(e.to_string())))?;
    let csv_err = |e: csv::Error| fail(CliError::Other(e.to_string()));
    w.write_record(["arc_length", "x", "y", "z"]).map_err(csv_err)?;
    let mut arc = 0.0;
    for (i, p) in tr.points.iter().enumerate() {
        if i > 0 {
            arc += (p - tr.points[i - 1]).norm();
        }
        w.serialize((arc, p.x, p.y, p.z)).map_err(csv_err)?;
    }
    w.flush().map_err(fail)?;
    let side = TraceSidecar {
        b,
        h: cfg.trace.h,
        start,
        class: tr.class,
        eta: tr.eta,
        strip_width: tr.strip_width,
        period_vector: tr.period_vector,
        arc_length: tr.arc_length,
        low_accuracy: tr.low_accuracy,
        max_drift: tr.max_drift,
        steps: tr.steps,
        points_file: "trajectory.csv",
    };
    let json = write_json(out, "trajectory.json", &side).map_err(fail)?;
    Ok(vec!["trajectory.csv".into(), json])
}

fn cmd_interval(cfg: &RunConfig, out: &Path) -> CmdResult {
    let (model, _) = cfg.model().map_err(fail)?;
    let b = vec3(cfg.interval.b).map_err(fail)?;
    let dir = classify_direction(
        b,
        &model.basis,
        cfg.sweep.probe.height_bound,
        cfg.sweep.probe.rational_tol,
    )
    .map_err(|e| fail(CliError::Config(e.to_string())))?;
    let res = open_energy_interval(&model, &dir, cfg.interval.eps_grid, &cfg.interval.options);
    let json = match res {
        Ok(iv) => write_json(out, "interval.json", &iv),
        Err(OrbitError::NonConnectedDetection(scan)) => {
            let name = write_json(out, "interval_scan.json", &scan).map_err(fail)?;
            return Err((
                vec![name],
                CliError::Other("open-orbit energies do not form one interval".into()),
            ));
        }
        Err(e) => return Err(fail(e)),
    }
    .map_err(fail)?;
    Ok(vec![json])
}

const PARTIAL: &str = "sweep_partial.json";

fn cmd_sweep(cfg: &RunConfig, out: &Path, manifest: &mut RunManifest) -> CmdResult {
    let (model, level) = cfg.model().map_err(fail)?;
    let ctx = OrbitContext::new(&model, level, cfg.grid_n).map_err(fail)?;
    let prior: Option<Vec<Option<DirectionSample>>> = match &manifest.partial {
        Some(p) if out.join(p).exists() => Some(read_json(&out.join(p)).map_err(fail)?),
        _ => None,
    };
    let partial_path = out.join(PARTIAL);
    let mut save_err = None;
    let diagram = sweep_resumable(&ctx, &cfg.sweep, prior, |done| {
        let tmp = out.join(format!("{PARTIAL}.tmp"));
        let r = File::create(&tmp)
            .map_err(CliError::from)
            .and_then(|f| {
                let mut w = BufWriter::new(f);
                serde_json::to_writer(&mut w, done).map_err(|e| CliError::Other(e.to_string()))?;
                w.flush()?;
                Ok(())
            })
            .and_then(|_| fs::rename(&tmp, &partial_path).map_err(CliError::from));
        if let Err(e) = r {
            save_err.get_or_insert(e);
        }
    });
    if let Some(e) = save_err {
        return Err(fail(e));
    }
    log::info!("{} samples, {} zones", diagram.samples.len(), diagram.zones.len());
    manifest.partial = Some(PARTIAL.into());
    let mut files = vec![write_json(out, "diagram.json", &diagram).map_err(fail)?];
    let csv_file = File::create(out.join("diagram.csv")).map_err(fail)?;
    write_csv(&diagram, BufWriter::new(csv_file)).map_err(|e| fail(CliError::Other(e.to_string())))?;
    files.push("diagram.csv".into());
    write_svg(
        &diagram,
        BufWriter::new(File::create(out.join("diagram.svg")).map_err(fail)?),
    )
    .map_err(fail)?;
    files.push("diagram.svg".into());
    if diagram.budget_exceeded {
        files.push(PARTIAL.into());
        return Err((files, CliError::Budget(out.to_path_buf())));
    }
    let _ = fs::remove_file(&partial_path);
    manifest.partial = None;
    Ok(files)
}

#[derive(Serialize, Deserialize)]
pub struct NumericTensor {
    pub omega_tau: f64,
    /// Laboratory coordinates, rows.
    pub sigma: [[f64; 3]; 3],
}

#[derive(Serialize, Deserialize)]
pub struct TransportReport {
    pub b: Vec3,
    pub regime: Regime,
    pub eta: Option<Vec3>,
    pub zone: Option<usize>,
    pub quantum_numbers: Option<[i64; 3]>,
    pub conductivity: AsymptoticTensor,
    pub resistance: Resistance,
    pub numeric: Vec<NumericTensor>,
}

fn cmd_transport(cfg: &RunConfig, out: &Path) -> CmdResult {
    let (model, level) = cfg.model().map_err(fail)?;
    let t = &cfg.transport;
    let (sample, zone, planes) = match t.zone {
        Some(z) => {
            let d: AngleDiagram = read_json(&out.join("diagram.json")).map_err(fail)?;
            let zone = d
                .zones
                .get(z)
                .ok_or_else(|| fail(CliError::Config(format!("no zone {z} in diagram.json"))))?;
            let best = zone
                .samples
                .iter()
                .filter(|&&i| d.samples[i].eta.is_some())
                .max_by(|&&a, &&b| {
                    let c = zone.center;
                    d.samples[a]
                        .direction
                        .unit
                        .dot(&c)
                        .total_cmp(&d.samples[b].direction.unit.dot(&c))
                })
                .copied()
                .ok_or_else(|| fail(CliError::Other("zone has no open samples".into())))?;
            (d.samples[best].clone(), Some(z), Some(zone.quantum_numbers.n))
        }
        None => {
            let ctx = OrbitContext::new(&model, level, cfg.grid_n).map_err(fail)?;
            let b = vec3(t.b).map_err(fail)?;
            let opts = ProbeOptions {
                seed: t.seed,
                ..cfg.sweep.probe
            };
            (probe_direction(&ctx, &b, &opts), None, None)
        }
    };
    let b = sample.direction.unit;
    let bad = |e: openorbit::TransportError| fail(CliError::Other(e.to_string()));
    let sigma = conductivity_asymptotics(sample.regime, sample.eta, &b, t.chaotic).map_err(bad)?;
    let rho = resistance_asymptotics(sample.regime, sample.eta, &b).map_err(bad)?;
    let numeric = t
        .omega_tau
        .iter()
        .map(|&w| {
            let m = sigma.evaluate_lab(w);
            NumericTensor {
                omega_tau: w,
                sigma: [0, 1, 2].map(|i| [0, 1, 2].map(|k| m[(i, k)])),
            }
        })
        .collect();
    let report = TransportReport {
        b,
        regime: sample.regime,
        eta: sample.eta,
        zone,
        quantum_numbers: planes,
        conductivity: sigma,
        resistance: rho,
        numeric,
    };
    Ok(vec![write_json(out, "tensor.json", &report).map_err(fail)?])
}

fn cmd_report(out: &Path, manifest: &RunManifest) -> CmdResult {
    let mut s = String::new();
    s.push_str("# Run report\n\n");
    s.push_str(&format!(
        "config hash `{}`, version {}\n\n",
        manifest.config_hash, manifest.tool_version
    ));
    for st in &manifest.stages {
        s.push_str(&format!(
            "- {} ({:.1} s, {}): {}\n",
            st.name,
            st.elapsed_secs,
            if st.complete { "complete" } else { "partial" },
            st.outputs.join(", ")
        ));
    }
    let topo = out.join("topology.json");
    if topo.exists() {
        let r: openorbit::surface::TopologyReport = read_json(&topo).map_err(fail)?;
        s.push_str("\n## Surface\n\n| component | genus | rank | homology |\n|---|---|---|---|\n");
        for (i, c) in r.components.iter().enumerate() {
            s.push_str(&format!("| {i} | {} | {:?} | {:?} |\n", c.genus, c.rank, c.homology));
        }
    }
    let diag = out.join("diagram.json");
    if diag.exists() {
        let d: AngleDiagram = read_json(&diag).map_err(fail)?;
        s.push_str(&format!(
            "\n## Angle diagram\n\n{} directions at {:.2} degrees, {} zones{}\n\n",
            d.samples.len(),
            d.resolution_deg,
            d.zones.len(),
            if d.budget_exceeded { " (budget exhausted)" } else { "" }
        ));
        for r in [
            Regime::AllClosed,
            Regime::StableOpen,
            Regime::PartlyStableOpen,
            Regime::SingularNet,
            Regime::ChaoticDirected,
            Regime::ChaoticWandering,
            Regime::Mixed,
            Regime::Undecided,
        ] {
            s.push_str(&format!("- {r:?}: {}\n", d.count(r)));
        }
        s.push_str(
            "\n| zone | samples | quantum numbers | integer residual | special direction |\n|---|---|---|---|---|\n",
        );
        for z in &d.zones {
            s.push_str(&format!(
                "| {} | {} | {} | {:.2e} | {} |\n",
                z.id,
                z.samples.len(),
                z.quantum_numbers,
                z.integer_residual,
                z.special_direction
                    .map_or("-".to_string(), |v| format!("({:.3}, {:.3}, {:.3})", v.x, v.y, v.z))
            ));
        }
    }
    let tensor = out.join("tensor.json");
    if tensor.exists() {
        let t: TransportReport = read_json(&tensor).map_err(fail)?;
        s.push_str(&format!(
            "\n## Transport\n\nregime {:?}, conductivity exponents\n\n",
            t.regime
        ));
        for row in &t.conductivity.exponents {
            let cells: Vec<String> = row.iter().map(|e| e.to_string()).collect();
            s.push_str(&format!("    {}\n", cells.join("  ")));
        }
    }
    fs::write(out.join("report.md"), s).map_err(fail)?;
    Ok(vec!["report.md".into()])
}
