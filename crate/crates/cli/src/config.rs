use std::path::{Path, PathBuf};

use openorbit::dispersion::fixtures;
use openorbit::lattice::reciprocal_basis;
use openorbit::orbits::{IntervalOptions, SeedOptions, TraceOptions};
use openorbit::transport::ChaoticParams;
use openorbit::zones::SweepOptions;
use openorbit::{make_anferms, make_thin_net, DispersionModel, Term, Vec3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    /// Direct lattice vectors as rows.
    pub direct: [[f64; 3]; 3],
    #[serde(default = "one")]
    pub planck_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DispersionConfig {
    Anferms {
        alpha: f64,
        beta: f64,
        delta: f64,
    },
    ThinNet {
        tube_radius: f64,
    },
    Terms {
        terms: Vec<Term>,
        #[serde(default)]
        offset: f64,
    },
    Fixture {
        name: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub b: [f64; 3],
    pub h: f64,
    /// Start point; a random point of the plane section when absent.
    pub start: Option<[f64; 3]>,
    pub options: TraceOptions,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            b: [0.0, 0.0, 1.0],
            h: 0.0,
            start: None,
            options: TraceOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntervalConfig {
    pub b: [f64; 3],
    pub eps_grid: usize,
    pub options: IntervalOptions,
}

impl Default for IntervalConfig {
    fn default() -> Self {
        Self {
            b: [0.0, 0.0, 1.0],
            eps_grid: 64,
            options: IntervalOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportConfig {
    /// Field direction; ignored when `zone` is set.
    pub b: [f64; 3],
    /// Zone of a previous sweep in the output directory.
    pub zone: Option<usize>,
    pub omega_tau: Vec<f64>,
    pub chaotic: Option<ChaoticParams>,
    pub seed: SeedOptions,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self {
            b: [0.0, 0.0, 1.0],
            zone: None,
            omega_tau: vec![1e2, 1e3, 1e4],
            chaotic: None,
            seed: SeedOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Cubic lattice when absent.
    pub lattice: Option<LatticeConfig>,
    pub dispersion: DispersionConfig,
    /// Fermi level; the model's natural level for nets and fixtures when absent.
    pub level: Option<f64>,
    pub temperature: f64,
    pub grid_n: usize,
    pub sweep: SweepOptions,
    pub trace: TraceConfig,
    pub interval: IntervalConfig,
    pub transport: TransportConfig,
    pub output_dir: PathBuf,
    /// Seed for randomized start points.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lattice: None,
            dispersion: DispersionConfig::ThinNet { tube_radius: 0.1 },
            level: None,
            temperature: 0.0,
            grid_n: 32,
            sweep: SweepOptions::default(),
            trace: TraceConfig::default(),
            interval: IntervalConfig::default(),
            transport: TransportConfig::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Model and Fermi level.
    pub fn model(&self) -> Result<(DispersionModel, f64), CliError> {
        let bad = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        let (mut model, natural) = match &self.dispersion {
            DispersionConfig::Anferms { alpha, beta, delta } => {
                (make_anferms(*alpha, *beta, *delta).map_err(|e| bad(&e))?, None)
            }
            DispersionConfig::ThinNet { tube_radius } => {
                let net = make_thin_net(*tube_radius).map_err(|e| bad(&e))?;
                (net.model, Some(net.level.value))
            }
            DispersionConfig::Terms { terms, offset } => (
                DispersionModel::cubic("custom", terms.clone(), *offset).map_err(|e| bad(&e))?,
                None,
            ),
            DispersionConfig::Fixture { name } => {
                let f = fixtures::all()
                    .into_iter()
                    .find(|f| f.name == name)
                    .ok_or_else(|| CliError::Config(format!("unknown fixture {name}")))?;
                (f.model, Some(f.level.value))
            }
        };
        if let Some(l) = &self.lattice {
            let [a, b, c] = l.direct.map(|r| Vec3::new(r[0], r[1], r[2]));
            let basis = reciprocal_basis(a, b, c, l.planck_scale).map_err(|e| bad(&e))?;
            model = DispersionModel::new(model.name.clone(), model.terms.clone(), model.offset, basis)
                .map_err(|e| bad(&e))?;
        }
        let level = self.level.or(natural).unwrap_or(0.0);
        if !level.is_finite() || !(self.temperature >= 0.0) {
            return Err(CliError::Config(
                "level must be finite and temperature nonnegative".into(),
            ));
        }
        Ok((model, level))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let c = RunConfig {
            dispersion: DispersionConfig::Anferms {
                alpha: 1.0,
                beta: 0.5,
                delta: 0.0,
            },
            level: Some(0.25),
            ..RunConfig::default()
        };
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"grid": 32}"#).is_err());
        assert!(RunConfig::from_json(r#"{"sweep": {"resolution": 2}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"grid_n": 24}"#).is_ok());
    }
}
