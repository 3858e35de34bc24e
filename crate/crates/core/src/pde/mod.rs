//! Time integration of the forced mixed flow.

pub mod bc;
pub mod fields;
pub mod mms;
pub mod residuals;
pub mod simulate;
pub mod step;

pub use bc::{BoundaryCondition, BoundarySpec, PointCharge};
pub use fields::{CutoffSpec, ExternalFields, FieldSpec, Source, VectorFn};
pub use step::{default_dt, step, PdeState, Stepper};
pub use simulate::{simulate, Frame, Setup, TrajectoryRecord};
