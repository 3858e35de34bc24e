pub mod error;
pub mod field;
pub mod grid;
pub mod ops;

pub use error::{Error, Result};
pub use field::{ComplexField, Location, ScalarField, TensorField, VectorField, C64};
pub use grid::{EpsilonScaling, Grid, Point};
pub mod poisson;
pub mod interp;
pub mod testfn;
pub mod pde;
pub mod track;
pub mod renergy;
pub mod initial;
pub mod ode;
pub mod harness;
