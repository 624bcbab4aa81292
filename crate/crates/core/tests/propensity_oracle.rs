//! IRLS against a slow but obviously correct likelihood maximizer.

mod common;

use common::logit::{brute_force_mle, fixture, log_likelihood};
use pate_bounds::propensity::{fit_propensity, CovariateSpec, FitStatus};

#[test]
fn irls_matches_brute_force_maximizer() {
    let model = fit_propensity(&fixture(), &CovariateSpec::linear(vec![0, 1])).unwrap();
    assert_eq!(model.status, FitStatus::Converged);
    let oracle = brute_force_mle();
    for (fit, want) in model.coefficients.iter().zip(&oracle) {
        assert!((fit - want).abs() < 1e-6, "irls {fit} vs oracle {want}");
    }
    // the fitted point is a maximum of the same likelihood
    let fitted = [model.coefficients[0], model.coefficients[1], model.coefficients[2]];
    assert!(log_likelihood(&fitted) >= log_likelihood(&oracle) - 1e-10);
}

#[test]
fn scores_sum_to_sample_size_at_the_optimum() {
    // intercept score equation: sum of fitted probabilities equals n
    let model = fit_propensity(&fixture(), &CovariateSpec::linear(vec![0, 1])).unwrap();
    let total: f64 = model.scores.iter().sum();
    assert!((total - 7.0).abs() < 1e-8);
}
