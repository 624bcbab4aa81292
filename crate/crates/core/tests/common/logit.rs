//! Slow but obviously correct logistic likelihood maximizer and its fixture.

use pate_bounds::{OutcomeRange, StudyData, UnitRecord};

// (z, x1, x2); selection leans on x1 but the classes overlap
pub const FIXTURE: [(bool, f64, f64); 20] = [
    (true, 1.2, 0.3),
    (true, 0.8, -0.5),
    (true, 0.1, 1.1),
    (true, 1.9, 0.4),
    (true, -0.3, 0.9),
    (true, 0.6, -1.2),
    (true, -1.1, 0.2),
    (false, -0.4, -0.7),
    (false, 0.2, 0.1),
    (false, -1.5, 1.4),
    (false, 0.9, -0.2),
    (false, -0.8, -1.6),
    (false, -2.1, 0.5),
    (false, 0.0, 0.0),
    (false, 1.4, 1.9),
    (false, -0.6, -0.3),
    (false, -1.3, -0.9),
    (false, 0.4, 0.8),
    (false, -0.2, -2.0),
    (false, -1.7, 0.6),
];

pub fn fixture() -> StudyData {
    let units = FIXTURE
        .iter()
        .enumerate()
        .map(|(i, &(z, a, b))| {
            let x = vec![a, b];
            if z {
                UnitRecord::sampled(i.to_string(), i % 2 == 0, 0.0, x)
            } else {
                UnitRecord::unsampled(i.to_string(), x)
            }
        })
        .collect();
    StudyData::new(units, OutcomeRange::new(-1.0, 1.0).unwrap()).unwrap()
}

fn rows() -> Vec<[f64; 3]> {
    FIXTURE.iter().map(|&(_, a, b)| [1.0, a, b]).collect()
}

pub fn log_likelihood(beta: &[f64; 3]) -> f64 {
    rows()
        .iter()
        .zip(FIXTURE.iter())
        .map(|(r, &(z, _, _))| {
            let eta: f64 = r.iter().zip(beta).map(|(x, b)| x * b).sum();
            // log(1 + e^eta) computed stably
            let softplus = eta.max(0.0) + (-eta.abs()).exp().ln_1p();
            if z { eta - softplus } else { -softplus }
        })
        .sum()
}

/// Partial derivative of the log-likelihood in coordinate `j`.
fn score(beta: &[f64; 3], j: usize) -> f64 {
    rows()
        .iter()
        .zip(FIXTURE.iter())
        .map(|(r, &(z, _, _))| {
            let eta: f64 = r.iter().zip(beta).map(|(x, b)| x * b).sum();
            let p = 1.0 / (1.0 + (-eta).exp());
            r[j] * (if z { 1.0 } else { 0.0 } - p)
        })
        .sum()
}

pub fn brute_force_mle() -> [f64; 3] {
    // coarse grid for a starting point
    let mut best = [0.0; 3];
    let mut best_ll = f64::NEG_INFINITY;
    let grid: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.25).collect();
    for &b0 in &grid {
        for &b1 in &grid {
            for &b2 in &grid {
                let ll = log_likelihood(&[b0, b1, b2]);
                if ll > best_ll {
                    best_ll = ll;
                    best = [b0, b1, b2];
                }
            }
        }
    }
    // cyclic coordinate ascent; each coordinate solved by bisection on its
    // score, which is decreasing because the likelihood is concave
    let mut beta = best;
    for _sweep in 0..20_000 {
        let before = beta;
        for j in 0..3 {
            let (mut lo, mut hi) = (beta[j] - 10.0, beta[j] + 10.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let mut trial = beta;
                trial[j] = mid;
                if score(&trial, j) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            beta[j] = 0.5 * (lo + hi);
        }
        let moved = before.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if moved < 1e-13 {
            break;
        }
    }
    beta
}
