//! Fixtures shared by the kernel benchmarks.

use glvortex::initial::{well_prepared, RadialProfile};
use glvortex::pde::BoundaryCondition;
use glvortex::track::VortexConfiguration;
use glvortex::{ComplexField, EpsilonScaling, Grid};

/// Well-prepared (+1, −1) dipole on `[0, 4]²` with `h ≈ ε/3`.
pub fn dipole(eps: f64) -> (Grid, EpsilonScaling, ComplexField) {
    let n = (12.0 / eps).ceil() as usize + 1;
    let grid = Grid::square([0.0, 0.0], 4.0, n).expect("grid");
    let scaling = EpsilonScaling::new(eps, 1.0).expect("scaling");
    let config = VortexConfiguration::new(vec![[1.3, 2.0], [2.7, 2.0]], vec![1, -1]).expect("config");
    let profile = RadialProfile::solve(20.0, 20_000).expect("profile");
    let u = well_prepared(&config, &scaling, &grid, &BoundaryCondition::Neumann, &profile).expect("datum");
    (grid, scaling, u)
}
