//! End-to-end bound computation: optional population redefinition, then
//! unstratified and propensity-stratified bounds on the result.

use serde::{Deserialize, Serialize};

use crate::bounds::{
    mss_bounds, stratified_bounds, stratum_summaries, weighted_stratum_effect, worst_case_bounds,
    StratumRangePolicy, StratumSummary,
};
use crate::error::{Error, Result};
use crate::model::{difference_in_means, estimate_sate, BoundInterval, Framework, SateEstimate, StudyData};
use crate::population::{redefine_by_pscore_range, redefine_by_sd};
use crate::propensity::{stratify, CovariateSpec, FitStatus, StratumRequirement};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Redefinition {
    /// Keep non-sampled units within this many sample SDs on every covariate.
    Sd(f64),
    /// Keep non-sampled units inside the sampled propensity-score range.
    PscoreRange(CovariateSpec),
}

impl Redefinition {
    pub fn apply(&self, data: &StudyData) -> Result<StudyData> {
        match self {
            Redefinition::Sd(s) => redefine_by_sd(data, *s),
            Redefinition::PscoreRange(spec) => redefine_by_pscore_range(data, spec).map(|(d, _)| d),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Redefinition::Sd(s) => format!("sd:{s}"),
            Redefinition::PscoreRange(_) => "pscore-range".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratificationSpec {
    pub k: usize,
    pub covariates: CovariateSpec,
    #[serde(default)]
    pub requirement: StratumRequirement,
    #[serde(default)]
    pub ranges: StratumRangePolicy,
}

impl StratificationSpec {
    pub fn new(k: usize, covariates: CovariateSpec) -> Self {
        Self {
            k,
            covariates,
            requirement: StratumRequirement::BothArms,
            ranges: StratumRangePolicy::Observed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedAnalysis {
    /// Stratum count after reduction.
    pub k: usize,
    pub fit_status: FitStatus,
    pub strata: Vec<StratumSummary>,
    pub worst_case: BoundInterval,
    pub mss: BoundInterval,
    /// Population-weighted stratum effect.
    pub effect: f64,
}

pub fn analyze_stratified(data: &StudyData, spec: &StratificationSpec) -> Result<StratifiedAnalysis> {
    let (model, assignment) = stratify(data, &spec.covariates, spec.k, spec.requirement)?;
    let strata = stratum_summaries(data, &assignment, spec.ranges)?;
    Ok(StratifiedAnalysis {
        k: assignment.k,
        fit_status: model.status,
        worst_case: stratified_bounds(&strata, false)?,
        mss: stratified_bounds(&strata, true)?,
        effect: weighted_stratum_effect(&strata),
        strata,
    })
}

/// Everything reported for one population of inference.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationAnalysis {
    pub population_size: usize,
    pub sample_size: usize,
    pub p_sel: f64,
    pub sate: f64,
    /// Present when both arms have at least two units.
    pub inference: Option<SateEstimate>,
    pub worst_case: BoundInterval,
    pub mss: BoundInterval,
    pub stratified: Option<StratifiedAnalysis>,
}

impl PopulationAnalysis {
    pub fn bound(&self, framework: Framework) -> Option<BoundInterval> {
        match framework {
            Framework::WorstCase => Some(self.worst_case),
            Framework::Mss => Some(self.mss),
            Framework::WorstCaseStratified => self.stratified.as_ref().map(|s| s.worst_case),
            Framework::MssStratified => self.stratified.as_ref().map(|s| s.mss),
        }
    }
}

pub fn analyze_population(
    data: &StudyData,
    stratification: Option<&StratificationSpec>,
) -> Result<PopulationAnalysis> {
    let sate = difference_in_means(data.sampled())?;
    let p_sel = data.p_sel();
    let range = data.range();
    Ok(PopulationAnalysis {
        population_size: data.population_size(),
        sample_size: data.sample_size(),
        p_sel,
        sate,
        inference: estimate_sate(data).ok(),
        worst_case: worst_case_bounds(sate, p_sel, range)?,
        mss: mss_bounds(sate, p_sel, range)?,
        stratified: stratification
            .map(|s| analyze_stratified(data, s))
            .transpose()?,
    })
}

/// A fully specified bound: framework plus the stratification and
/// redefinition settings it depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub framework: Framework,
    #[serde(default)]
    pub stratification: Option<StratificationSpec>,
    #[serde(default)]
    pub redefinition: Option<Redefinition>,
}

impl BoundSpec {
    pub fn new(framework: Framework) -> Self {
        Self {
            framework,
            stratification: None,
            redefinition: None,
        }
    }

    pub fn stratified(mut self, spec: StratificationSpec) -> Self {
        self.stratification = Some(spec);
        self
    }

    pub fn redefined(mut self, redefinition: Redefinition) -> Self {
        self.redefinition = Some(redefinition);
        self
    }
}

/// Computes one bound from raw study data, redefining and refitting as the
/// spec requires.
pub fn compute_bound(data: &StudyData, spec: &BoundSpec) -> Result<BoundInterval> {
    let redefined;
    let data = match &spec.redefinition {
        Some(r) => {
            redefined = r.apply(data)?;
            &redefined
        }
        None => data,
    };
    let sate = difference_in_means(data.sampled())?;
    match spec.framework {
        Framework::WorstCase => worst_case_bounds(sate, data.p_sel(), data.range()),
        Framework::Mss => mss_bounds(sate, data.p_sel(), data.range()),
        fw => {
            let strat = spec.stratification.as_ref().ok_or_else(|| {
                Error::InvalidArgument(format!("framework {fw} needs a stratification spec"))
            })?;
            let s = analyze_stratified(data, strat)?;
            Ok(if fw.is_mss() { s.mss } else { s.worst_case })
        }
    }
}
