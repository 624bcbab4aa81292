//! Redefining the population of inference by trimming non-sampled units
//! that look unlike the sample. Sampled units are always kept.

use crate::error::{Error, Result};
use crate::model::StudyData;
use crate::propensity::{fit_propensity, CovariateSpec, PropensityModel};
use crate::stats::{mean, sample_sd};

/// Non-sampled units kept after trimming must be at least as many as the
/// sampled units.
fn check_size(data: &StudyData) -> Result<()> {
    let n = data.sample_size();
    let retained = data.population_size() - n;
    if retained < n {
        return Err(Error::SubpopulationTooSmall {
            retained,
            sampled: n,
        });
    }
    Ok(())
}

/// Keeps a non-sampled unit iff every covariate lies within `s` sample
/// standard deviations of the sample mean.
pub fn redefine_by_sd(data: &StudyData, s: f64) -> Result<StudyData> {
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "SD multiplier must be positive, got {s}"
        )));
    }
    let p = data.covariate_dim();
    let mut centers = Vec::with_capacity(p);
    let mut limits = Vec::with_capacity(p);
    for j in 0..p {
        let col: Vec<f64> = data.sampled().map(|u| u.x[j]).collect();
        let sd = sample_sd(&col);
        if !(sd > 0.0) {
            return Err(Error::ZeroVariance(j + 1));
        }
        centers.push(mean(&col));
        limits.push(s * sd);
    }
    let trimmed = data.retain_by(|_, u| {
        u.z || u
            .x
            .iter()
            .zip(centers.iter().zip(&limits))
            .all(|(x, (c, lim))| (x - c).abs() <= *lim)
    })?;
    check_size(&trimmed)?;
    Ok(trimmed)
}

/// Drops non-sampled units whose fitted score falls outside the range of the
/// sampled units' scores, then refits once on what remains.
pub fn redefine_by_pscore_range(
    data: &StudyData,
    spec: &CovariateSpec,
) -> Result<(StudyData, PropensityModel)> {
    let model = fit_propensity(data, spec)?;
    let (lo, hi) = data
        .units()
        .iter()
        .zip(&model.scores)
        .filter(|(u, _)| u.z)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &s)| {
            (lo.min(s), hi.max(s))
        });
    let trimmed = data.retain_by(|i, u| u.z || (lo..=hi).contains(&model.scores[i]))?;
    check_size(&trimmed)?;
    let refit = fit_propensity(&trimmed, spec)?;
    Ok((trimmed, refit))
}
