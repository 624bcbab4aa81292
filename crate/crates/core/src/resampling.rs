//! Percentile bootstrap for bound endpoints.
//!
//! Each replicate resamples the `n` sampled units with replacement (treatment
//! labels travel with their units) while the non-sampled population stays
//! fixed, recomputes the bound end to end, and the reported interval is the
//! 0.05 quantile of the lower ends and the 0.95 quantile of the upper ends.
//!
//! Replicate `i` draws from its own ChaCha8 stream `i` under the user seed,
//! so results do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{compute_bound, BoundSpec};
use crate::error::{Error, Result};
use crate::model::{BoundInterval, StudyData, UnitRecord};
use crate::stats::quantile;

/// Redraws allowed per replicate before the bootstrap aborts.
pub const MAX_REDRAWS: usize = 100;

pub const LOWER_LEVEL: f64 = 0.05;
pub const UPPER_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapBounds {
    pub lb_q05: f64,
    pub ub_q95: f64,
    pub replicates: usize,
    /// Resamples discarded and redrawn, summed over replicates.
    pub redraws: usize,
    pub bounds: Vec<BoundInterval>,
}

pub fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

/// Non-sampled units in their original order, followed by `n` sampled units
/// drawn with replacement.
pub fn resample(
    population: &[UnitRecord],
    sampled: &[&UnitRecord],
    rng: &mut impl Rng,
) -> Vec<UnitRecord> {
    let n = sampled.len();
    let mut units = population.to_vec();
    units.extend((0..n).map(|_| sampled[rng.random_range(0..n)].clone()));
    units
}

fn run_replicate(
    data: &StudyData,
    population: &[UnitRecord],
    sampled: &[&UnitRecord],
    spec: &BoundSpec,
    seed: u64,
    replicate: usize,
) -> Result<(BoundInterval, usize)> {
    let mut rng = replicate_rng(seed, replicate);
    for attempt in 0..MAX_REDRAWS {
        let units = resample(population, sampled, &mut rng);
        // resamples without both arms fail validation and are redrawn
        let bound = StudyData::new(units, data.range()).and_then(|d| compute_bound(&d, spec));
        if let Ok(b) = bound {
            return Ok((b, attempt));
        }
    }
    Err(Error::ReplicateFailure {
        replicate,
        attempts: MAX_REDRAWS,
    })
}

pub fn bootstrap_bounds(
    data: &StudyData,
    spec: &BoundSpec,
    reps: usize,
    seed: u64,
) -> Result<BootstrapBounds> {
    if reps == 0 {
        return Err(Error::InvalidArgument("bootstrap needs at least one replicate".into()));
    }
    let population: Vec<UnitRecord> = data.units().iter().filter(|u| !u.z).cloned().collect();
    let sampled: Vec<&UnitRecord> = data.sampled().collect();
    let results: Vec<(BoundInterval, usize)> = (0..reps)
        .into_par_iter()
        .map(|i| run_replicate(data, &population, &sampled, spec, seed, i))
        .collect::<Result<_>>()?;
    let redraws = results.iter().map(|(_, r)| r).sum();
    let bounds: Vec<BoundInterval> = results.into_iter().map(|(b, _)| b).collect();
    let los: Vec<f64> = bounds.iter().map(|b| b.lo).collect();
    let his: Vec<f64> = bounds.iter().map(|b| b.hi).collect();
    Ok(BootstrapBounds {
        lb_q05: quantile(&los, LOWER_LEVEL),
        ub_q95: quantile(&his, UPPER_LEVEL),
        replicates: reps,
        redraws,
        bounds,
    })
}
