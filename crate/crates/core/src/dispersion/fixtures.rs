//! Small catalogue of test surfaces with known topology.
//!
//! Each entry returns a model on the cubic lattice together with a regular
//! level and the expected per-component invariants.

use serde::{Deserialize, Serialize};

use super::{make_anferms, make_thin_net, DispersionModel, EnergyLevel, Term};
use crate::lattice::integer::IVec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedComponent {
    pub genus: usize,
    pub rank: usize,
    /// Homology class up to sign.
    pub homology: IVec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: &'static str,
    pub model: DispersionModel,
    pub level: EnergyLevel,
    /// Components per unit cell.
    pub expected: Vec<ExpectedComponent>,
}

fn cubic(name: &str, terms: Vec<Term>, offset: f64) -> DispersionModel {
    DispersionModel::cubic(name, terms, offset).expect("fixture terms are valid")
}

/// Small sphere around the maximum of `sum cos`.
pub fn sphere() -> Fixture {
    Fixture {
        name: "sphere",
        model: make_anferms(1.0, 0.0, 0.0).unwrap(),
        level: EnergyLevel::new(2.5),
        expected: vec![ExpectedComponent {
            genus: 0,
            rank: 0,
            homology: [0, 0, 0],
        }],
    }
}

/// Torus around a closed loop in the plane `z = 0`; rank 0.
///
/// The energy is `(cos x + cos y - 1)^2 + 2 (1 - cos z)` written out in cosine products.
pub fn donut() -> Fixture {
    let terms = vec![
        Term::cos([2, 0, 0], 0.5),
        Term::cos([0, 2, 0], 0.5),
        Term::cos([1, 1, 0], 2.0),
        Term::cos([1, 0, 0], -2.0),
        Term::cos([0, 1, 0], -2.0),
        Term::cos([0, 0, 1], -2.0),
    ];
    Fixture {
        name: "donut",
        model: cubic("donut", terms, 4.0),
        level: EnergyLevel::new(0.3),
        expected: vec![ExpectedComponent {
            genus: 1,
            rank: 0,
            homology: [0, 0, 0],
        }],
    }
}

/// `cos x + cos y`: a warped cylinder along z.
pub fn cylinder() -> Fixture {
    Fixture {
        name: "cylinder",
        model: cubic(
            "cylinder",
            vec![Term::cos([1, 0, 0], 1.0), Term::cos([0, 1, 0], 1.0)],
            0.0,
        ),
        level: EnergyLevel::new(0.5),
        expected: vec![ExpectedComponent {
            genus: 1,
            rank: 1,
            homology: [0, 0, 0],
        }],
    }
}

/// Pair of warped planes normal to z with opposite classes.
pub fn slab_pair() -> Fixture {
    Fixture {
        name: "slab_pair",
        model: cubic(
            "slab_pair",
            vec![Term::cos([0, 0, 1], 1.0), Term::cos([1, 1, 0], 0.15)],
            0.0,
        ),
        level: EnergyLevel::new(0.5),
        expected: vec![
            ExpectedComponent {
                genus: 1,
                rank: 2,
                homology: [0, 0, 1],
            },
            ExpectedComponent {
                genus: 1,
                rank: 2,
                homology: [0, 0, 1],
            },
        ],
    }
}

/// Tube along z whose cross-section shears as z advances.
pub fn twisted_tube() -> Fixture {
    let terms = vec![
        Term::cos([1, 0, 0], 1.0),
        Term::cos([0, 1, 0], 1.0),
        Term::cos([1, 0, 1], 0.3),
        Term::cos([0, 1, 1], -0.3),
    ];
    Fixture {
        name: "twisted_tube",
        model: cubic("twisted_tube", terms, 0.0),
        level: EnergyLevel::new(1.2),
        expected: vec![ExpectedComponent {
            genus: 1,
            rank: 1,
            homology: [0, 0, 0],
        }],
    }
}

/// `sum cos` at zero: one genus-3 component of full rank.
pub fn genus_three() -> Fixture {
    Fixture {
        name: "genus_three",
        model: make_anferms(1.0, 0.0, 0.0).unwrap(),
        level: EnergyLevel::new(0.0),
        expected: vec![ExpectedComponent {
            genus: 3,
            rank: 3,
            homology: [0, 0, 0],
        }],
    }
}

pub fn thin_net() -> Fixture {
    let net = make_thin_net(0.1).unwrap();
    Fixture {
        name: "thin_net",
        model: net.model,
        level: net.level,
        expected: vec![ExpectedComponent {
            genus: 3,
            rank: 3,
            homology: [0, 0, 0],
        }],
    }
}

pub fn all() -> Vec<Fixture> {
    vec![
        sphere(),
        donut(),
        cylinder(),
        slab_pair(),
        twisted_tube(),
        genus_three(),
        thin_net(),
    ]
}
