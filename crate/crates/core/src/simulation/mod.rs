//! Monte Carlo evaluation of the bounds on synthetic school populations.

pub mod config;
pub mod dgp;
pub mod experiment;
pub mod grid;

pub use config::{Alignment, CovariateCombo, DeclaredRange, PopulationDef, RangeKeyword, SimConfig, Study};
pub use dgp::{generate_replicate, SimUnit};
pub use experiment::{
    coverage_rate, run_cell, CellStatus, ExperimentResult, MetricSummary, PopulationRow, METRICS,
};
pub use grid::{GridConfig, OneOrMany};
