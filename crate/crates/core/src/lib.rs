//! Nonparametric bounds on the population average treatment effect when a
//! randomized experiment's sample was not drawn at random from the
//! population of interest.
//!
//! Worst-case and monotone-sample-selection bounds, propensity-score
//! stratified versions of both, population redefinition by covariate
//! trimming, a percentile bootstrap for the bound endpoints, and the
//! simulation engine used to study their behaviour.

pub mod analysis;
pub mod bounds;
pub mod error;
pub mod linalg;
pub mod model;
pub mod population;
pub mod propensity;
pub mod resampling;
pub mod simulation;
pub mod stats;

pub use analysis::{
    analyze_population, analyze_stratified, compute_bound, BoundSpec, PopulationAnalysis,
    Redefinition, StratificationSpec, StratifiedAnalysis,
};
pub use bounds::{
    bound_width, mss_bounds, precision_gain, stratified_bounds, worst_case_bounds,
    StratumRangePolicy, StratumSummary,
};
pub use error::{Error, Result};
pub use model::{
    estimate_sate, true_pate, Arm, BoundInterval, Framework, OutcomeRange, PotentialOutcomes,
    SateEstimate, StudyData, UnitRecord,
};
pub use propensity::{fit_propensity, CovariateSpec, FitStatus, PropensityModel, StratumRequirement};
pub use resampling::{bootstrap_bounds, BootstrapBounds};
