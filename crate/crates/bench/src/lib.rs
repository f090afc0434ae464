//! Shared inputs for the benchmarks.

use openorbit::dispersion::fixtures;
use openorbit::{DispersionModel, OrbitContext};

/// Thin net model, its level and an orbit context on a `grid_n` grid.
pub fn thin_net(grid_n: usize) -> (DispersionModel, f64, OrbitContext) {
    let f = fixtures::thin_net();
    let ctx = OrbitContext::new(&f.model, f.level.value, grid_n).expect("thin net is regular");
    (f.model, f.level.value, ctx)
}
