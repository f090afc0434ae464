use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use super::{AngleDiagram, Regime};
use crate::lattice::Vec3;

#[derive(Serialize)]
struct Row {
    index: usize,
    bx: f64,
    by: f64,
    bz: f64,
    regime: Regime,
    irrationality: String,
    eta_x: Option<f64>,
    eta_y: Option<f64>,
    eta_z: Option<f64>,
    carrier_count: Option<usize>,
    open_fraction: f64,
    steps: usize,
    probed: bool,
    zone: Option<usize>,
    n1: Option<i64>,
    n2: Option<i64>,
    n3: Option<i64>,
}

/// One row per direction sample.
pub fn write_csv<W: Write>(diagram: &AngleDiagram, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (i, s) in diagram.samples.iter().enumerate() {
        let zone = diagram.zone_of[i];
        let n = zone.map(|z| diagram.zones[z].quantum_numbers.n);
        w.serialize(Row {
            index: i,
            bx: s.direction.unit.x,
            by: s.direction.unit.y,
            bz: s.direction.unit.z,
            regime: s.regime,
            irrationality: format!("{:?}", s.direction.irrationality),
            eta_x: s.eta.map(|e| e.x),
            eta_y: s.eta.map(|e| e.y),
            eta_z: s.eta.map(|e| e.z),
            carrier_count: s.carrier_count,
            open_fraction: s.open_fraction,
            steps: s.steps,
            probed: s.probed,
            zone,
            n1: n.map(|n| n[0]),
            n2: n.map(|n| n[1]),
            n3: n.map(|n| n[2]),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Lambert azimuthal equal-area coordinates of `d` about `+z`, or about `-z`
/// for the lower hemisphere. The equator maps to the unit circle.
pub fn lambert_equal_area(d: &Vec3) -> (f64, f64) {
    let d = d.normalize();
    let z = d.z.abs();
    let k = (1.0 / (1.0 + z)).sqrt();
    (d.x * k, d.y * k)
}

fn regime_color(r: Regime) -> &'static str {
    match r {
        Regime::AllClosed => "#e6e6e6",
        Regime::StableOpen => "#4c72b0",
        Regime::PartlyStableOpen => "#f28e2b",
        Regime::SingularNet => "#222222",
        Regime::ChaoticDirected => "#d62728",
        Regime::ChaoticWandering => "#9467bd",
        Regime::Mixed => "#8c564b",
        Regime::Undecided => "#ffffff",
    }
}

fn plane_color(n: [i64; 3]) -> String {
    let h = n
        .iter()
        .fold(17u64, |h, &c| h.wrapping_mul(31).wrapping_add(c.unsigned_abs()));
    let hue = (h % 360) as f64;
    format!("hsl({hue:.0},65%,50%)")
}

/// Both hemispheres as equal-area discs, samples colored by zone plane or regime.
pub fn write_svg<W: Write>(diagram: &AngleDiagram, mut out: W) -> std::io::Result<()> {
    let r = 200.0;
    let pad = 20.0;
    let cx = [pad + r, 3.0 * pad + 3.0 * r];
    let cy = pad + r + 20.0;
    let dot = (r * diagram.resolution_deg.to_radians() * 0.45).max(0.8);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}">"#,
        4.0 * pad + 4.0 * r,
        2.0 * pad + 2.0 * r + 40.0
    );
    for (k, label) in ["B.z >= 0", "B.z < 0"].iter().enumerate() {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{cy:.2}" r="{r:.2}" fill="none" stroke="#000"/><text x="{:.2}" y="16" text-anchor="middle" font-size="14">{label}</text>"##,
            cx[k], cx[k]
        );
    }
    for (i, smp) in diagram.samples.iter().enumerate() {
        let d = smp.direction.unit;
        let k = usize::from(d.z < 0.0);
        let (x, y) = lambert_equal_area(&d);
        let fill = match diagram.zone_of[i] {
            Some(z) => plane_color(diagram.zones[z].quantum_numbers.n),
            None => regime_color(smp.regime).to_string(),
        };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{dot:.2}" fill="{fill}"/>"#,
            cx[k] + r * x,
            cy - r * y
        );
    }
    for z in &diagram.zones {
        let d = z.center;
        let k = usize::from(d.z < 0.0);
        let (x, y) = lambert_equal_area(&d);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"#,
            cx[k] + r * x,
            cy - r * y,
            z.quantum_numbers
        );
    }
    s.push_str("</svg>\n");
    out.write_all(s.as_bytes())
}
