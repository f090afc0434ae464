use serde::{Deserialize, Serialize};

use super::{OrbitClass, PlaneSlice, TraceOptions};
use crate::lattice::{LatticeBasis, Vec3};

/// Growth factor separating bounded from unbounded transverse extent.
const GROWTH: f64 = 1.5;

/// Chain statistics at arc `min_arc * 2^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub arc: f64,
    pub index: usize,
    /// Principal direction in plane coordinates, signed by the displacement.
    pub eta: [f64; 2],
    pub displacement: f64,
    /// Angle between this and the previous direction estimate.
    pub turn: f64,
}

/// Incremental classifier over an in-plane chain starting at the origin.
#[derive(Debug, Clone)]
pub struct ChainClassifier {
    min_arc: f64,
    max_arc: f64,
    dir_tol: f64,
    pts: Vec<[f64; 2]>,
    arcs: Vec<f64>,
    // weighted moments about the origin
    sw: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    sxy: f64,
    syy: f64,
    checkpoints: Vec<Checkpoint>,
    next: f64,
}

fn angle(a: [f64; 2], b: [f64; 2]) -> f64 {
    let c = a[0] * b[0] + a[1] * b[1];
    let s = a[0] * b[1] - a[1] * b[0];
    s.atan2(c).abs()
}

impl ChainClassifier {
    pub fn new(opts: &TraceOptions) -> Self {
        Self {
            min_arc: opts.min_arc.max(1e-9),
            max_arc: opts.max_arc,
            dir_tol: opts.dir_tol,
            pts: vec![[0.0, 0.0]],
            arcs: vec![0.0],
            sw: 0.0,
            sx: 0.0,
            sy: 0.0,
            sxx: 0.0,
            sxy: 0.0,
            syy: 0.0,
            checkpoints: Vec::new(),
            next: opts.min_arc.max(1e-9),
        }
    }

    pub fn checkpoints(&self) -> &[Checkpoint] {
        &self.checkpoints
    }

    /// Latest direction estimate.
    pub fn eta(&self) -> Option<[f64; 2]> {
        self.checkpoints.last().map(|c| c.eta).or_else(|| {
            let q = *self.pts.last()?;
            let n = (q[0] * q[0] + q[1] * q[1]).sqrt();
            (n > 0.0).then(|| [q[0] / n, q[1] / n])
        })
    }

    /// Adds a point; returns a class once the evidence is conclusive.
    pub fn push(&mut self, q: [f64; 2], arc: f64) -> Option<OrbitClass> {
        let prev = *self.pts.last().unwrap();
        let w = arc - self.arcs.last().unwrap();
        let m = [(q[0] + prev[0]) * 0.5, (q[1] + prev[1]) * 0.5];
        self.sw += w;
        self.sx += w * m[0];
        self.sy += w * m[1];
        self.sxx += w * m[0] * m[0];
        self.sxy += w * m[0] * m[1];
        self.syy += w * m[1] * m[1];
        self.pts.push(q);
        self.arcs.push(arc);
        if arc >= self.next {
            self.next *= 2.0;
            self.checkpoint();
            return self.decide();
        }
        None
    }

    fn principal(&self) -> [f64; 2] {
        let n = self.sw.max(1e-300);
        let (mx, my) = (self.sx / n, self.sy / n);
        let cxx = self.sxx / n - mx * mx;
        let cxy = self.sxy / n - mx * my;
        let cyy = self.syy / n - my * my;
        let th = 0.5 * (2.0 * cxy).atan2(cxx - cyy);
        let mut e = [th.cos(), th.sin()];
        let q = *self.pts.last().unwrap();
        if e[0] * q[0] + e[1] * q[1] < 0.0 {
            e = [-e[0], -e[1]];
        }
        e
    }

    fn checkpoint(&mut self) {
        let eta = self.principal();
        let index = self.pts.len() - 1;
        let q = self.pts[index];
        let turn = self
            .checkpoints
            .last()
            .map(|c| angle(c.eta, eta))
            .unwrap_or(std::f64::consts::PI);
        self.checkpoints.push(Checkpoint {
            arc: self.arcs[index],
            index,
            eta,
            displacement: (q[0] * q[0] + q[1] * q[1]).sqrt(),
            turn,
        });
    }

    /// Strip widths `2 max |eta x q|` up to each checkpoint, for the latest `eta`.
    fn widths(&self) -> Vec<f64> {
        let eta = self.checkpoints.last().unwrap().eta;
        let mut out = Vec::with_capacity(self.checkpoints.len());
        let mut worst = 0.0f64;
        let mut i = 0;
        for c in &self.checkpoints {
            while i <= c.index {
                let q = self.pts[i];
                worst = worst.max((eta[0] * q[1] - eta[1] * q[0]).abs());
                i += 1;
            }
            out.push(2.0 * worst);
        }
        out
    }

    fn decide(&self) -> Option<OrbitClass> {
        let k = self.checkpoints.len() - 1;
        if k == 0 {
            return None;
        }
        let cp = &self.checkpoints;
        let w = self.widths();
        let d_ratio = cp[k].displacement / cp[k - 1].displacement.max(1e-300);
        let converged = cp[k].turn < self.dir_tol;
        let w_growth = |j: usize| w[j] / w[j - 1].max(1e-300);
        if converged && w_growth(k) <= GROWTH && d_ratio >= GROWTH && w[k] < self.dir_tol * cp[k].displacement {
            return Some(OrbitClass::OpenQuasiperiodic);
        }
        if k >= 2
            && converged
            && cp[k - 1].turn < 2.0 * self.dir_tol
            && w_growth(k) > GROWTH
            && w_growth(k - 1) > GROWTH
            && d_ratio >= GROWTH
        {
            return Some(OrbitClass::ChaoticDirected);
        }
        if k >= 3 && cp[k].arc >= 8.0 * self.min_arc && (k - 2..=k).all(|j| cp[j].turn > 10.0 * self.dir_tol) {
            return Some(OrbitClass::ChaoticWandering);
        }
        None
    }

    /// Verdict when the budget runs out; the flag marks a low-accuracy result.
    pub fn finish(&mut self) -> (OrbitClass, bool) {
        let last_arc = *self.arcs.last().unwrap();
        if self.checkpoints.last().is_none_or(|c| c.arc < last_arc) && last_arc >= self.min_arc {
            self.checkpoint();
            if let Some(c) = self.decide() {
                return (c, false);
            }
        }
        let k = self.checkpoints.len();
        if k >= 2 {
            let w = self.widths();
            let cp = &self.checkpoints;
            if cp[k - 1].turn < self.dir_tol
                && w[k - 1] <= GROWTH * w[k - 2]
                && cp[k - 1].displacement > cp[k - 2].displacement
            {
                return (OrbitClass::OpenQuasiperiodic, true);
            }
        }
        (OrbitClass::Undecided, false)
    }

    pub fn max_arc(&self) -> f64 {
        self.max_arc
    }

    pub fn width_along(&self, eta: [f64; 2]) -> f64 {
        2.0 * self
            .pts
            .iter()
            .map(|q| (eta[0] * q[1] - eta[1] * q[0]).abs())
            .fold(0.0, f64::max)
    }
}

/// Classifies a finished chain of points lying in `slice`.
///
/// A chain ending where it started is closed; with a basis, a chain ending at
/// a lattice translate of its start inside the plane is periodic.
pub fn classify_chain(
    points: &[Vec3],
    slice: &PlaneSlice,
    basis: Option<&LatticeBasis>,
    opts: &TraceOptions,
) -> (OrbitClass, Option<Vec3>) {
    if points.len() < 2 {
        return (OrbitClass::Undecided, None);
    }
    let p0 = points[0];
    let last = points[points.len() - 1];
    let arc: f64 = points.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    if arc > 0.0 && (last - p0).norm() < opts.closure_tol {
        return (OrbitClass::Closed, None);
    }
    if let Some(basis) = basis {
        let d = basis.to_fractional(&(last - p0));
        let n = d.map(f64::round);
        let g = basis.to_cartesian(&n);
        if n.norm() > 0.0 && (last - p0 - g).norm() < opts.closure_tol && slice.b.dot(&g).abs() < opts.closure_tol {
            return (OrbitClass::OpenPeriodic, Some(g.normalize()));
        }
    }
    let mut c = ChainClassifier::new(opts);
    let mut s = 0.0;
    for w in points.windows(2) {
        s += (w[1] - w[0]).norm();
        if let Some(class) = c.push(slice.coords(&w[1], &p0), s) {
            let eta = c.eta().map(|e| slice.u * e[0] + slice.v * e[1]);
            return (class, if class.is_directed() { eta } else { None });
        }
    }
    let (class, _) = c.finish();
    let eta = c.eta().map(|e| slice.u * e[0] + slice.v * e[1]);
    (class, if class.is_directed() { eta } else { None })
}
