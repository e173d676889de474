//! Reproduction-law families through their log-Laplace transforms κ_t,
//! plus the scalar fields and indicator sets used across the crate.

mod field;
mod indicator;
mod model;
mod tabulated;

pub use field::{finite_difference, CustomField, ScalarField};
pub use indicator::IndicatorSet;
pub use model::{AnalyticLaplace, EnvironmentModel, VALIDATION_GRID};
pub use tabulated::{CellLaw, Intensity, TabulatedLaplace};
