//! Worst-case, monotone-sample-selection (MSS), and stratified bounds on the
//! population average treatment effect.
//!
//! With `p = Pr(Z = 1)` and declared outcome range `[y_lo, y_hi]`, the
//! unobserved non-sampled counterfactual means are replaced by the range
//! endpoints:
//!
//! ```text
//! lo = sate·p + (y_lo − y_hi)(1 − p)
//! hi = sate·p + (y_hi − y_lo)(1 − p)
//! ```
//!
//! MSS keeps the same lower end and caps the upper end at the sample effect.
//! Stratified bounds average per-stratum bounds with population weights.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{difference_in_means, BoundInterval, Framework, OutcomeRange, StudyData, UnitRecord};
use crate::propensity::StratumAssignment;

fn check_inputs(sate: f64, p_sel: f64, range: OutcomeRange) -> Result<()> {
    if !(p_sel > 0.0 && p_sel <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "selection probability {p_sel} outside (0, 1]"
        )));
    }
    if !sate.is_finite() {
        return Err(Error::InvalidArgument("sample effect is not finite".into()));
    }
    let width = range.width();
    if sate.abs() > width * (1.0 + 1e-12) {
        return Err(Error::InputInconsistent { sate, width });
    }
    Ok(())
}

pub fn worst_case_bounds(sate: f64, p_sel: f64, range: OutcomeRange) -> Result<BoundInterval> {
    check_inputs(sate, p_sel, range)?;
    let base = sate * p_sel;
    let q = 1.0 - p_sel;
    Ok(BoundInterval {
        lo: base + (range.lo() - range.hi()) * q,
        hi: base + (range.hi() - range.lo()) * q,
        framework: Framework::WorstCase,
    })
}

pub fn mss_bounds(sate: f64, p_sel: f64, range: OutcomeRange) -> Result<BoundInterval> {
    let wc = worst_case_bounds(sate, p_sel, range)?;
    Ok(BoundInterval {
        lo: wc.lo,
        hi: sate,
        framework: Framework::Mss,
    })
}

pub fn bound_width(b: &BoundInterval) -> f64 {
    b.width()
}

/// Percent reduction in width from `before` to `after`. Negative when
/// `after` is wider.
pub fn precision_gain(before: &BoundInterval, after: &BoundInterval) -> Result<f64> {
    let w0 = before.width();
    if !(w0 > 0.0) {
        return Err(Error::ZeroWidthBaseline);
    }
    Ok(100.0 * (w0 - after.width()) / w0)
}

/// Inputs for one stratum of a stratified bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StratumSummary {
    /// `N_j / N`.
    pub weight: f64,
    pub sate: f64,
    /// `n_j / N_j`.
    pub p_sel: f64,
    pub range: OutcomeRange,
}

/// Population-weighted average of per-stratum worst-case or MSS bounds.
pub fn stratified_bounds(strata: &[StratumSummary], mss: bool) -> Result<BoundInterval> {
    if strata.is_empty() {
        return Err(Error::InvalidArgument("no strata".into()));
    }
    let total: f64 = strata.iter().map(|s| s.weight).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "stratum weights sum to {total}, not 1"
        )));
    }
    let mut lo = 0.0;
    let mut hi = 0.0;
    for s in strata {
        let b = if mss {
            mss_bounds(s.sate, s.p_sel, s.range)?
        } else {
            worst_case_bounds(s.sate, s.p_sel, s.range)?
        };
        lo += s.weight * b.lo;
        hi += s.weight * b.hi;
    }
    let framework = if mss {
        Framework::MssStratified
    } else {
        Framework::WorstCaseStratified
    };
    Ok(BoundInterval { lo, hi, framework })
}

/// How the outcome range of each stratum is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratumRangePolicy {
    /// Min/max of the observed outcomes of the stratum's sampled units;
    /// the declared range when fewer than two outcomes are observed.
    #[default]
    Observed,
    /// The declared range in every stratum.
    Declared,
}

/// Builds per-stratum inputs from a study and a stratum assignment.
pub fn stratum_summaries(
    data: &StudyData,
    assignment: &StratumAssignment,
    policy: StratumRangePolicy,
) -> Result<Vec<StratumSummary>> {
    let n_total = data.population_size() as f64;
    let pop_counts = assignment.population_counts();
    let mut members: Vec<Vec<&UnitRecord>> = vec![Vec::new(); assignment.k];
    for (u, &l) in data.units().iter().zip(&assignment.labels) {
        if u.z {
            members[l - 1].push(u);
        }
    }
    let mut out = Vec::with_capacity(assignment.k);
    for (j, sampled) in members.iter().enumerate() {
        let stratum = j + 1;
        let sate = difference_in_means(sampled.iter().copied()).map_err(|e| match e {
            Error::MissingArm(arm) => Error::EmptyArmInStratum { stratum, arm },
            other => other,
        })?;
        let range = match policy {
            StratumRangePolicy::Declared => data.range(),
            StratumRangePolicy::Observed => observed_range(sampled).unwrap_or(data.range()),
        };
        out.push(StratumSummary {
            weight: pop_counts[j] as f64 / n_total,
            sate,
            p_sel: sampled.len() as f64 / pop_counts[j] as f64,
            range,
        });
    }
    Ok(out)
}

fn observed_range(sampled: &[&UnitRecord]) -> Option<OutcomeRange> {
    if sampled.len() < 2 {
        return None;
    }
    let ys = sampled.iter().filter_map(|u| u.y);
    let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| {
        (lo.min(y), hi.max(y))
    });
    // all-equal outcomes give a zero-width range; fall back to the declared one
    OutcomeRange::new(lo, hi).ok()
}

/// Population-weighted average of stratum effects: the upper end of the
/// stratified MSS bound, also reported as a subclassification estimate.
pub fn weighted_stratum_effect(strata: &[StratumSummary]) -> f64 {
    strata.iter().map(|s| s.weight * s.sate).sum()
}
