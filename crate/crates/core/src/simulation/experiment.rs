//! Replicate loop and per-cell aggregation.
//!
//! Every replicate yields one metric vector per population definition.
//! Missing values are NaN and are left out of that metric's mean.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{DeclaredRange, PopulationDef, SimConfig};
use super::dgp::generate_replicate;
use crate::analysis::{analyze_population, StratificationSpec};
use crate::bounds::precision_gain;
use crate::error::{Error, Result};
use crate::model::{true_pate, BoundInterval, OutcomeRange, StudyData, UnitRecord};
use crate::population::redefine_by_sd;
use crate::stats::{mean, sample_sd};

/// Share of failed replicates above which a row is reported as failed.
pub const MAX_FAILURE_SHARE: f64 = 0.1;

/// Column order of the per-replicate metric vector.
pub const METRICS: [&str; 34] = [
    "population_size",
    "pate",
    "sate",
    "sate_se",
    "sate_bias",
    "ci_coverage",
    "wc_lo",
    "wc_hi",
    "wc_width",
    "wc_coverage",
    "mss_lo",
    "mss_hi",
    "mss_width",
    "mss_coverage",
    "gain_mss_vs_wc",
    "gain_wc_vs_p_wc",
    "gain_mss_vs_p_wc",
    "strat_k",
    "swc_lo",
    "swc_hi",
    "swc_width",
    "swc_coverage",
    "smss_lo",
    "smss_hi",
    "smss_width",
    "smss_coverage",
    "strat_effect",
    "strat_bias",
    "gain_swc_vs_wc",
    "gain_smss_vs_mss",
    "gain_smss_vs_wc",
    "mss_plausible_fraction",
    "excluded_fraction",
    "violated_fraction",
];

pub fn metric_index(name: &str) -> Option<usize> {
    METRICS.iter().position(|m| *m == name)
}

type MetricRow = [f64; METRICS.len()];

/// Fraction of (interval, truth) pairs with `lo <= truth <= hi`.
pub fn coverage_rate(intervals: &[(f64, f64)], truths: &[f64]) -> Result<f64> {
    if intervals.len() != truths.len() {
        return Err(Error::InvalidArgument(format!(
            "{} intervals but {} truths",
            intervals.len(),
            truths.len()
        )));
    }
    if intervals.is_empty() {
        return Err(Error::InvalidArgument("coverage of an empty set".into()));
    }
    let hits = intervals
        .iter()
        .zip(truths)
        .filter(|((lo, hi), t)| lo <= *t && *t <= hi)
        .count();
    Ok(hits as f64 / truths.len() as f64)
}

fn covers(b: &BoundInterval, truth: f64) -> f64 {
    if b.contains(truth) {
        1.0
    } else {
        0.0
    }
}

fn gain(before: &BoundInterval, after: &BoundInterval) -> f64 {
    precision_gain(before, after).unwrap_or(f64::NAN)
}

/// Share of non-sampled units whose effect does not exceed the smallest
/// sampled effect, i.e. units for which selection monotonicity holds
/// against every sampled unit.
pub fn mss_plausible_fraction(units: &[UnitRecord]) -> f64 {
    let effect = |u: &UnitRecord| u.potential.map_or(f64::NAN, |p| p.effect());
    let floor = units
        .iter()
        .filter(|u| u.z)
        .map(effect)
        .fold(f64::INFINITY, f64::min);
    let others: Vec<f64> = units.iter().filter(|u| !u.z).map(effect).collect();
    if others.is_empty() {
        return f64::NAN;
    }
    others.iter().filter(|&&d| d <= floor).count() as f64 / others.len() as f64
}

fn declared_range(config: &SimConfig, units: &[UnitRecord]) -> Result<OutcomeRange> {
    match config.declared_range {
        DeclaredRange::Fixed([lo, hi]) => OutcomeRange::new(lo, hi),
        DeclaredRange::Keyword(_) => {
            let (lo, hi) = units
                .iter()
                .filter_map(|u| u.y)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y)));
            OutcomeRange::new(lo, hi)
        }
    }
}

/// Metrics for one population of one replicate. `full_wc` is the worst-case
/// bound on the full population, the baseline for redefinition gains.
/// The flag is true when only the stratified part failed.
fn population_metrics(
    data: &StudyData,
    full: &StudyData,
    full_wc: Option<&BoundInterval>,
    strat: &StratificationSpec,
    violated: &[bool],
) -> Result<(MetricRow, bool)> {
    let mut m = [f64::NAN; METRICS.len()];
    let mut set = |name: &str, v: f64| m[metric_index(name).expect("known metric")] = v;

    let pate = true_pate(data)?;
    let a = analyze_population(data, None)?;
    set("population_size", a.population_size as f64);
    set("pate", pate);
    set("sate", a.sate);
    set("sate_bias", a.sate - pate);
    if let Some(inf) = a.inference {
        set("sate_se", inf.se);
        set("ci_coverage", f64::from(u8::from(inf.ci_lo <= pate && pate <= inf.ci_hi)));
    }
    set("wc_lo", a.worst_case.lo);
    set("wc_hi", a.worst_case.hi);
    set("wc_width", a.worst_case.width());
    set("wc_coverage", covers(&a.worst_case, pate));
    set("mss_lo", a.mss.lo);
    set("mss_hi", a.mss.hi);
    set("mss_width", a.mss.width());
    set("mss_coverage", covers(&a.mss, pate));
    set("gain_mss_vs_wc", gain(&a.worst_case, &a.mss));
    let baseline = full_wc.copied().unwrap_or(a.worst_case);
    set("gain_wc_vs_p_wc", gain(&baseline, &a.worst_case));
    set("gain_mss_vs_p_wc", gain(&baseline, &a.mss));
    set("mss_plausible_fraction", mss_plausible_fraction(data.units()));
    let outside = full.population_size() - full.sample_size();
    let kept = data.population_size() - data.sample_size();
    set("excluded_fraction", (outside - kept) as f64 / outside as f64);
    let kept_ids: std::collections::HashSet<&str> =
        data.units().iter().map(|u| u.id.as_str()).collect();
    let flagged = full
        .units()
        .iter()
        .zip(violated)
        .filter(|(u, v)| **v && kept_ids.contains(u.id.as_str()))
        .count();
    set("violated_fraction", flagged as f64 / kept.max(1) as f64);

    let strat_failed = match crate::analysis::analyze_stratified(data, strat) {
        Ok(s) => {
            set("strat_k", s.k as f64);
            set("swc_lo", s.worst_case.lo);
            set("swc_hi", s.worst_case.hi);
            set("swc_width", s.worst_case.width());
            set("swc_coverage", covers(&s.worst_case, pate));
            set("smss_lo", s.mss.lo);
            set("smss_hi", s.mss.hi);
            set("smss_width", s.mss.width());
            set("smss_coverage", covers(&s.mss, pate));
            set("strat_effect", s.effect);
            set("strat_bias", s.effect - pate);
            set("gain_swc_vs_wc", gain(&a.worst_case, &s.worst_case));
            set("gain_smss_vs_mss", gain(&a.mss, &s.mss));
            set("gain_smss_vs_wc", gain(&a.worst_case, &s.mss));
            false
        }
        Err(_) => true,
    };
    Ok((m, strat_failed))
}

/// Outcome of one population within one replicate.
#[derive(Debug, Clone, PartialEq)]
pub enum PopulationOutcome {
    Ok { metrics: Box<MetricRow>, strat_failed: bool },
    Failed(Error),
}

/// Generates replicate `replicate` and analyses every configured population.
/// A generation failure fails every population of the replicate.
pub fn run_replicate(config: &SimConfig, replicate: usize) -> Vec<PopulationOutcome> {
    let fail_all = |e: Error| vec![PopulationOutcome::Failed(e); config.populations.len()];
    let units = match generate_replicate(config, replicate) {
        Ok(u) => u,
        Err(e) => return fail_all(e),
    };
    let violated: Vec<bool> = units.iter().map(|u| u.ignorability_violated).collect();
    let records: Vec<UnitRecord> = units.into_iter().map(|u| u.record).collect();
    let full = match declared_range(config, &records).and_then(|r| StudyData::new(records, r)) {
        Ok(d) => d,
        Err(e) => return fail_all(e),
    };
    let strat = StratificationSpec {
        ranges: config.stratum_ranges,
        ..StratificationSpec::new(config.k, config.covariate_spec())
    };
    let full_wc = analyze_population(&full, None).ok().map(|a| a.worst_case);

    config
        .populations
        .iter()
        .map(|pop| {
            let data = match pop {
                PopulationDef::Full => Ok(full.clone()),
                PopulationDef::Sd(s) => redefine_by_sd(&full, f64::from(*s)),
            };
            match data.and_then(|d| population_metrics(&d, &full, full_wc.as_ref(), &strat, &violated)) {
                Ok((metrics, strat_failed)) => PopulationOutcome::Ok {
                    metrics: Box::new(metrics),
                    strat_failed,
                },
                Err(e) => PopulationOutcome::Failed(e),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// `sd / sqrt(count)` over the replicates that produced the metric.
    pub mcse: f64,
    pub count: usize,
}

impl MetricSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let present: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
        let count = present.len();
        let mcse = if count >= 2 {
            sample_sd(&present) / (count as f64).sqrt()
        } else {
            f64::NAN
        };
        Self {
            mean: if count > 0 { mean(&present) } else { f64::NAN },
            mcse,
            count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

impl CellStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationRow {
    pub population: PopulationDef,
    pub status: CellStatus,
    pub failed_reps: usize,
    pub strat_failed_reps: usize,
    /// First error message seen, if any replicate failed.
    pub first_error: Option<String>,
    /// Aligned with [`METRICS`].
    pub metrics: Vec<MetricSummary>,
}

impl PopulationRow {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        metric_index(name).map(|i| &self.metrics[i])
    }

    pub fn mean(&self, name: &str) -> f64 {
        self.metric(name).map_or(f64::NAN, |m| m.mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub config: SimConfig,
    pub rows: Vec<PopulationRow>,
}

impl ExperimentResult {
    pub fn row(&self, population: PopulationDef) -> Option<&PopulationRow> {
        self.rows.iter().find(|r| r.population == population)
    }
}

/// Runs `config.reps` replicates in parallel and aggregates them in
/// replicate order, so the result does not depend on the thread count.
pub fn run_cell(config: &SimConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let outcomes: Vec<Vec<PopulationOutcome>> = (0..config.reps)
        .into_par_iter()
        .map(|i| run_replicate(config, i))
        .collect();

    let rows = config
        .populations
        .iter()
        .enumerate()
        .map(|(p, &population)| {
            let mut failed_reps = 0;
            let mut strat_failed_reps = 0;
            let mut first_error = None;
            let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(config.reps); METRICS.len()];
            for rep in &outcomes {
                match &rep[p] {
                    PopulationOutcome::Ok {
                        metrics,
                        strat_failed,
                    } => {
                        strat_failed_reps += usize::from(*strat_failed);
                        for (col, v) in columns.iter_mut().zip(metrics.iter()) {
                            col.push(*v);
                        }
                    }
                    PopulationOutcome::Failed(e) => {
                        failed_reps += 1;
                        first_error.get_or_insert_with(|| e.to_string());
                    }
                }
            }
            let status = if failed_reps as f64 > MAX_FAILURE_SHARE * config.reps as f64 {
                CellStatus::Failed
            } else {
                CellStatus::Ok
            };
            PopulationRow {
                population,
                status,
                failed_reps,
                strat_failed_reps,
                first_error,
                metrics: columns.iter().map(|c| MetricSummary::from_values(c)).collect(),
            }
        })
        .collect();
    Ok(ExperimentResult {
        config: config.clone(),
        rows,
    })
}
