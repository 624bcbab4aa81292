//! Synthetic populations: correlated normal covariates, logistic eligibility
//! followed by a simple random sample, a balanced treatment split, and
//! clipped potential outcomes from a two-model mixture.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use super::config::{SimConfig, SAMPLE_CLIP};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, SquareMatrix};
use crate::model::{PotentialOutcomes, UnitRecord};
use crate::stats::expit;

pub const COVARIATES: usize = 4;
const PAIR_CORRELATION: f64 = 0.5;
const BACKGROUND_CORRELATION: f64 = 0.05;
const T_DF_X5: f64 = 9.0;
const T_DF_X6: f64 = 3.0;

/// Unit-variance correlation matrix of X1..X4: corr(X1, X2) = 0.5,
/// corr(X1, X3) = corr(X2, X4) = rho, every other pair 0.05.
pub fn correlation_matrix(rho: f64) -> SquareMatrix {
    let mut c = SquareMatrix::identity(COVARIATES);
    for i in 0..COVARIATES {
        for j in 0..COVARIATES {
            if i != j {
                c[(i, j)] = BACKGROUND_CORRELATION;
            }
        }
    }
    for (i, j, v) in [(0, 1, PAIR_CORRELATION), (0, 2, rho), (1, 3, rho)] {
        c[(i, j)] = v;
        c[(j, i)] = v;
    }
    c
}

/// `count` draws from a mean-zero multivariate normal with the given
/// correlation matrix.
pub fn generate_covariates_with(
    correlation: &SquareMatrix,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<f64>>> {
    let chol = Cholesky::factor(correlation)?;
    let dim = correlation.dim();
    let mut z = vec![0.0; dim];
    Ok((0..count)
        .map(|_| {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            let mut row = vec![0.0; dim];
            chol.transform(&z, &mut row);
            row
        })
        .collect())
}

pub fn generate_covariates(config: &SimConfig, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    generate_covariates_with(&correlation_matrix(config.rho), config.population_size, rng)
}

/// Selection propensity `expit(b1·x1 + b2·x1² + b3·x2)`.
pub fn selection_probability(x: &[f64], beta: [f64; 3]) -> f64 {
    expit(beta[0] * x[0] + beta[1] * x[0] * x[0] + beta[2] * x[1])
}

/// Indices of units whose Bernoulli eligibility draw succeeds.
pub fn draw_eligible(x: &[Vec<f64>], beta: [f64; 3], rng: &mut impl Rng) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, row)| rng.random::<f64>() < selection_probability(row, beta))
        .map(|(i, _)| i)
        .collect()
}

/// Bernoulli eligibility, then `n` of the eligible units uniformly without
/// replacement. Eligibility is redrawn once if too few units qualify.
pub fn select_sample(x: &[Vec<f64>], config: &SimConfig, rng: &mut impl Rng) -> Result<Vec<bool>> {
    let beta = config.beta();
    let n = config.sample_size;
    let mut eligible = Vec::new();
    for _attempt in 0..2 {
        eligible = draw_eligible(x, beta, rng);
        if eligible.len() >= n {
            let mut z = vec![false; x.len()];
            for pick in index::sample(rng, eligible.len(), n) {
                z[eligible[pick]] = true;
            }
            return Ok(z);
        }
    }
    Err(Error::InsufficientEligible {
        eligible: eligible.len(),
        needed: n,
    })
}

/// Exactly half of the sampled units are treated.
pub fn assign_treatment(z: &[bool], rng: &mut impl Rng) -> Result<Vec<Option<bool>>> {
    let sampled: Vec<usize> = z.iter().enumerate().filter(|(_, s)| **s).map(|(i, _)| i).collect();
    if !sampled.len().is_multiple_of(2) {
        return Err(Error::OddSampleSize(sampled.len()));
    }
    let mut w: Vec<Option<bool>> = z.iter().map(|&s| s.then_some(false)).collect();
    for pick in index::sample(rng, sampled.len(), sampled.len() / 2) {
        w[sampled[pick]] = Some(true);
    }
    Ok(w)
}

/// Unclipped `(y1, y0)` from the outcome model on covariates `(a, b)`.
pub fn outcome_model(a: f64, b: f64, gamma: [f64; 2]) -> (f64, f64) {
    let y0 = gamma[0] * a + gamma[1] * b;
    let y1 = y0 + gamma[0] * a * a + gamma[1] * b * b + 1.0;
    (y1, y0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimUnit {
    /// Observed record with both (clipped) potential outcomes attached.
    pub record: UnitRecord,
    pub ignorability_violated: bool,
    pub x5: f64,
    pub x6: f64,
}

impl SimUnit {
    pub fn potential(&self) -> PotentialOutcomes {
        self.record.potential.expect("simulated units carry potential outcomes")
    }
}

/// Attaches outcomes. A `delta` share of the non-sampled units (chosen from
/// `violation_rng`) follows the alternative model on the t-distributed
/// `x5, x6`; everyone else follows the model on `x1, x2`.
///
/// `x5, x6` and the order in which non-sampled units are flagged are drawn
/// for every unit regardless of `delta`, so the flagged sets are nested in
/// `delta` and the sample never depends on it.
pub fn generate_outcomes(
    x: Vec<Vec<f64>>,
    z: &[bool],
    w: &[Option<bool>],
    config: &SimConfig,
    violation_rng: &mut impl Rng,
) -> Result<Vec<SimUnit>> {
    let gamma = config.gamma();
    let t9 = StudentT::new(T_DF_X5).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let t3 = StudentT::new(T_DF_X6).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let extra: Vec<(f64, f64)> = (0..x.len())
        .map(|_| (t9.sample(violation_rng), t3.sample(violation_rng)))
        .collect();
    let mut non_sampled: Vec<usize> = (0..x.len()).filter(|&i| !z[i]).collect();
    non_sampled.shuffle(violation_rng);
    let flagged_count = (config.delta * non_sampled.len() as f64).round() as usize;
    let mut violated = vec![false; x.len()];
    for &i in &non_sampled[..flagged_count] {
        violated[i] = true;
    }

    let pop_clip = config.study.population_clip();
    Ok(x
        .into_iter()
        .enumerate()
        .map(|(i, xi)| {
            let (x5, x6) = extra[i];
            let (y1, y0) = if violated[i] {
                outcome_model(x5, x6, gamma)
            } else {
                outcome_model(xi[0], xi[1], gamma)
            };
            let clip = if z[i] { SAMPLE_CLIP } else { pop_clip };
            let potential = PotentialOutcomes {
                y1: y1.clamp(-clip, clip),
                y0: y0.clamp(-clip, clip),
            };
            let id = i.to_string();
            let record = match w[i] {
                Some(t) => {
                    let y = if t { potential.y1 } else { potential.y0 };
                    UnitRecord::sampled(id, t, y, xi)
                }
                None => UnitRecord::unsampled(id, xi),
            }
            .with_potential(potential);
            SimUnit {
                record,
                ignorability_violated: violated[i],
                x5,
                x6,
            }
        })
        .collect())
}

/// Sample-side RNG for replicate `i`: covariates, eligibility, selection
/// and treatment.
pub fn sample_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * replicate as u64);
    rng
}

/// Violation-side RNG for replicate `i`: `x5, x6` and the flagged units.
pub fn violation_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * replicate as u64 + 1);
    rng
}

/// One full synthetic population for replicate `replicate` of `config`.
pub fn generate_replicate(config: &SimConfig, replicate: usize) -> Result<Vec<SimUnit>> {
    let mut rng = sample_rng(config.seed, replicate);
    let x = generate_covariates(config, &mut rng)?;
    let z = select_sample(&x, config, &mut rng)?;
    let w = assign_treatment(&z, &mut rng)?;
    let mut vrng = violation_rng(config.seed, replicate);
    generate_outcomes(x, &z, &w, config, &mut vrng)
}
