//! Sampling propensity scores `s(X) = Pr(Z = 1 | X)` fitted by logistic
//! regression, and equal-size stratification on the fitted scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, SquareMatrix};
use crate::model::StudyData;
use crate::stats::{expit, quantile_sorted};

pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-8;
pub const SCORE_FLOOR: f64 = 1e-10;

/// Which covariate columns enter the selection model. Columns are
/// zero-based; `squares` appends the square of each listed column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub columns: Vec<usize>,
    #[serde(default)]
    pub squares: bool,
}

impl CovariateSpec {
    pub fn linear(columns: Vec<usize>) -> Self {
        Self {
            columns,
            squares: false,
        }
    }

    pub fn all(p: usize) -> Self {
        Self::linear((0..p).collect())
    }

    pub fn with_squares(mut self, squares: bool) -> Self {
        self.squares = squares;
        self
    }

    /// Number of design columns including the intercept.
    pub fn design_width(&self) -> usize {
        1 + self.columns.len() * if self.squares { 2 } else { 1 }
    }

    fn check(&self, p: usize) -> Result<()> {
        if let Some(&c) = self.columns.iter().find(|&&c| c >= p) {
            return Err(Error::InvalidArgument(format!(
                "covariate column {} requested but data has {p} covariates",
                c + 1
            )));
        }
        Ok(())
    }

    fn push_row(&self, x: &[f64], out: &mut Vec<f64>) {
        out.push(1.0);
        out.extend(self.columns.iter().map(|&c| x[c]));
        if self.squares {
            out.extend(self.columns.iter().map(|&c| x[c] * x[c]));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    IterationLimit,
    /// A fitted score left `[1e-10, 1 - 1e-10]`; scores were clamped.
    Separation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropensityModel {
    pub spec: CovariateSpec,
    /// Intercept first, then one coefficient per design column.
    pub coefficients: Vec<f64>,
    /// One score per unit, in data order.
    pub scores: Vec<f64>,
    pub status: FitStatus,
    pub iterations: usize,
}

impl PropensityModel {
    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }

    /// Turns a separated fit into an error; other statuses pass through.
    pub fn require_no_separation(self) -> Result<Self> {
        match self.status {
            FitStatus::Separation => Err(Error::Separation),
            _ => Ok(self),
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let mut row = Vec::with_capacity(self.coefficients.len());
        self.spec.push_row(x, &mut row);
        clamp_score(expit(dot(&row, &self.coefficients)))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn clamp_score(s: f64) -> f64 {
    s.clamp(SCORE_FLOOR, 1.0 - SCORE_FLOOR)
}

/// Dense row-major design matrix.
struct Design {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Design {
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `Xᵀ diag(w) X`.
    fn weighted_gram(&self, weights: impl Fn(usize) -> f64) -> SquareMatrix {
        let mut g = SquareMatrix::zeros(self.cols);
        for i in 0..self.rows {
            let w = weights(i);
            let r = self.row(i);
            for a in 0..self.cols {
                let wa = w * r[a];
                for b in a..self.cols {
                    g[(a, b)] += wa * r[b];
                }
            }
        }
        for a in 0..self.cols {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        g
    }
}

fn full_column_rank(design: &Design) -> bool {
    let gram = design.weighted_gram(|_| 1.0);
    let scale: Vec<f64> = (0..design.cols).map(|a| gram[(a, a)].sqrt()).collect();
    if scale.iter().any(|s| !(*s > 0.0)) {
        return false;
    }
    let mut corr = gram;
    for a in 0..design.cols {
        for b in 0..design.cols {
            corr[(a, b)] /= scale[a] * scale[b];
        }
    }
    Cholesky::factor(&corr).is_ok()
}

/// Maximum-likelihood logistic regression of `z` on the selected covariates
/// by iteratively reweighted least squares.
pub fn fit_propensity(data: &StudyData, spec: &CovariateSpec) -> Result<PropensityModel> {
    spec.check(data.covariate_dim())?;
    let cols = spec.design_width();
    let mut design = Design {
        rows: data.population_size(),
        cols,
        data: Vec::with_capacity(data.population_size() * cols),
    };
    for u in data.units() {
        spec.push_row(&u.x, &mut design.data);
    }
    let z: Vec<f64> = data
        .units()
        .iter()
        .map(|u| if u.z { 1.0 } else { 0.0 })
        .collect();
    if !full_column_rank(&design) {
        return Err(Error::RankDeficient);
    }

    let mut beta = vec![0.0; cols];
    let mut mu = vec![0.0; design.rows];
    let mut status = FitStatus::IterationLimit;
    let mut iterations = 0;
    for iter in 1..=MAX_ITERATIONS {
        iterations = iter;
        let mut separated = false;
        for (i, m) in mu.iter_mut().enumerate() {
            let s = expit(dot(design.row(i), &beta));
            if !(SCORE_FLOOR..=1.0 - SCORE_FLOOR).contains(&s) {
                separated = true;
            }
            *m = clamp_score(s);
        }
        if separated {
            status = FitStatus::Separation;
            break;
        }
        let hessian = design.weighted_gram(|i| mu[i] * (1.0 - mu[i]));
        let mut gradient = vec![0.0; cols];
        for i in 0..design.rows {
            let resid = z[i] - mu[i];
            for (g, x) in gradient.iter_mut().zip(design.row(i)) {
                *g += x * resid;
            }
        }
        let step = Cholesky::factor(&hessian)
            .map_err(|_| Error::RankDeficient)?
            .solve(&gradient);
        let mut max_change = 0.0_f64;
        for (b, d) in beta.iter_mut().zip(&step) {
            *b += d;
            max_change = max_change.max(d.abs());
        }
        if max_change < TOLERANCE {
            status = FitStatus::Converged;
            break;
        }
    }

    let scores = (0..design.rows)
        .map(|i| clamp_score(expit(dot(design.row(i), &beta))))
        .collect();
    Ok(PropensityModel {
        spec: spec.clone(),
        coefficients: beta,
        scores,
        status,
        iterations,
    })
}

/// Partition of the population into `k` strata of (near) equal size on the
/// propensity score scale.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumAssignment {
    pub k: usize,
    /// `k - 1` ascending cut points.
    pub edges: Vec<f64>,
    /// Stratum of each unit, `1..=k`, in data order.
    pub labels: Vec<usize>,
}

impl StratumAssignment {
    /// Population counts `N_j`.
    pub fn population_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &l in &self.labels {
            counts[l - 1] += 1;
        }
        counts
    }

    /// Per-stratum `(treated, control)` sampled counts.
    pub fn arm_counts(&self, data: &StudyData) -> Vec<(usize, usize)> {
        let mut counts = vec![(0, 0); self.k];
        for (u, &l) in data.units().iter().zip(&self.labels) {
            match u.w {
                Some(true) => counts[l - 1].0 += 1,
                Some(false) => counts[l - 1].1 += 1,
                None => {}
            }
        }
        counts
    }

    /// Sampled counts `n_j`.
    pub fn sample_counts(&self, data: &StudyData) -> Vec<usize> {
        self.arm_counts(data).into_iter().map(|(t, c)| t + c).collect()
    }
}

/// Cuts the population score distribution at its `j/k` quantiles. A score
/// equal to an edge belongs to the lower stratum.
pub fn assign_strata(scores: &[f64], k: usize) -> Result<StratumAssignment> {
    if k == 0 {
        return Err(Error::InvalidArgument("stratum count must be at least 1".into()));
    }
    if scores.is_empty() {
        return Err(Error::InvalidArgument("no scores to stratify".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (1..k)
        .map(|j| quantile_sorted(&sorted, j as f64 / k as f64))
        .collect();
    let labels = scores
        .iter()
        .map(|&s| 1 + edges.partition_point(|&e| e < s))
        .collect();
    Ok(StratumAssignment { k, edges, labels })
}

/// What every stratum must contain for the assignment to be usable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratumRequirement {
    /// At least one sampled unit.
    #[default]
    Sampled,
    /// At least one sampled unit in each treatment arm, so that a stratum
    /// effect is defined.
    BothArms,
}

impl StratumRequirement {
    fn satisfied(&self, assignment: &StratumAssignment, data: &StudyData) -> bool {
        assignment.arm_counts(data).iter().all(|&(t, c)| match self {
            StratumRequirement::Sampled => t + c >= 1,
            StratumRequirement::BothArms => t >= 1 && c >= 1,
        })
    }
}

/// Lowers `k` one step at a time until every stratum meets `requirement`.
/// `k = 1` always qualifies because the whole sample has both arms.
pub fn reduce_strata(
    assignment: StratumAssignment,
    scores: &[f64],
    data: &StudyData,
    requirement: StratumRequirement,
) -> Result<StratumAssignment> {
    let mut current = assignment;
    while current.k > 1 && !requirement.satisfied(&current, data) {
        current = assign_strata(scores, current.k - 1)?;
    }
    Ok(current)
}

/// Fit, stratify into `k`, and reduce until the requirement holds.
pub fn stratify(
    data: &StudyData,
    spec: &CovariateSpec,
    k: usize,
    requirement: StratumRequirement,
) -> Result<(PropensityModel, StratumAssignment)> {
    let model = fit_propensity(data, spec)?;
    let initial = assign_strata(&model.scores, k)?;
    let assignment = reduce_strata(initial, &model.scores, data, requirement)?;
    Ok((model, assignment))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{OutcomeRange, UnitRecord};
    use crate::stats::logit;

    fn range() -> OutcomeRange {
        OutcomeRange::new(-1.0, 1.0).unwrap()
    }

    #[test]
    fn intercept_only_recovers_log_odds() {
        let units: Vec<UnitRecord> = (0..2000)
            .map(|i| {
                if i < 100 {
                    UnitRecord::sampled(i.to_string(), i % 2 == 0, 0.0, vec![i as f64])
                } else {
                    UnitRecord::unsampled(i.to_string(), vec![i as f64])
                }
            })
            .collect();
        let data = StudyData::new(units, range()).unwrap();
        let m = fit_propensity(&data, &CovariateSpec::linear(vec![])).unwrap();
        assert!(m.converged());
        assert!((m.coefficients[0] - logit(0.05)).abs() < 1e-10);
        assert!((m.coefficients[0] + 2.944_438_979_166_44).abs() < 1e-10);
    }

    #[test]
    fn constant_covariate_is_rank_deficient() {
        let units = vec![
            UnitRecord::sampled("a", true, 0.0, vec![3.0, 1.0]),
            UnitRecord::sampled("b", false, 0.0, vec![3.0, -1.0]),
            UnitRecord::unsampled("c", vec![3.0, 0.5]),
            UnitRecord::unsampled("d", vec![3.0, 2.0]),
        ];
        let data = StudyData::new(units, range()).unwrap();
        assert_eq!(
            fit_propensity(&data, &CovariateSpec::linear(vec![0])).unwrap_err(),
            Error::RankDeficient
        );
        assert_eq!(
            fit_propensity(&data, &CovariateSpec::all(2)).unwrap_err(),
            Error::RankDeficient
        );
    }

    #[test]
    fn perfect_separation_is_flagged() {
        let units = vec![
            UnitRecord::sampled("a", true, 0.0, vec![5.0]),
            UnitRecord::sampled("b", false, 0.0, vec![6.0]),
            UnitRecord::unsampled("c", vec![-5.0]),
            UnitRecord::unsampled("d", vec![-6.0]),
        ];
        let data = StudyData::new(units, range()).unwrap();
        let m = fit_propensity(&data, &CovariateSpec::linear(vec![0])).unwrap();
        assert_eq!(m.status, FitStatus::Separation);
        assert!(!m.converged());
        assert!(m.scores.iter().all(|s| *s > 0.0 && *s < 1.0));
        assert_eq!(m.require_no_separation().unwrap_err(), Error::Separation);
    }

    #[test]
    fn out_of_bounds_column_rejected() {
        let units = vec![
            UnitRecord::sampled("a", true, 0.0, vec![1.0]),
            UnitRecord::sampled("b", false, 0.0, vec![2.0]),
        ];
        let data = StudyData::new(units, range()).unwrap();
        assert!(matches!(
            fit_propensity(&data, &CovariateSpec::linear(vec![1])),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn ten_equally_spaced_scores_into_five_strata() {
        let scores: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let a = assign_strata(&scores, 5).unwrap();
        assert_eq!(a.labels, vec![1, 1, 2, 2, 3, 3, 4, 4, 5, 5]);
        assert_eq!(a.population_counts(), vec![2; 5]);
        assert_eq!(a.edges.len(), 4);
    }

    #[test]
    fn single_stratum() {
        let a = assign_strata(&[0.3, 0.1, 0.9], 1).unwrap();
        assert!(a.edges.is_empty());
        assert_eq!(a.labels, vec![1, 1, 1]);
    }

    #[test]
    fn score_on_edge_goes_to_lower_stratum() {
        // median edge of {1,2,3} is exactly 2
        let a = assign_strata(&[1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(a.edges, vec![2.0]);
        assert_eq!(a.labels, vec![1, 1, 2]);
        let tied = assign_strata(&[0.5, 0.5, 0.5, 0.5], 2).unwrap();
        assert_eq!(tied.labels, vec![1, 1, 1, 1]);
    }

    fn ten_unit_fixture(sampled: &[usize]) -> (StudyData, Vec<f64>) {
        let scores: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let units = (0..10)
            .map(|i| match sampled.iter().position(|&s| s == i) {
                Some(pos) => UnitRecord::sampled(i.to_string(), pos % 2 == 0, 0.0, vec![]),
                None => UnitRecord::unsampled(i.to_string(), vec![]),
            })
            .collect();
        (StudyData::new(units, range()).unwrap(), scores)
    }

    #[test]
    fn reduce_with_adjacent_sampled_scores() {
        // sampled units at scores 0.5 and 0.6
        let (data, scores) = ten_unit_fixture(&[4, 5]);
        let start = assign_strata(&scores, 5).unwrap();
        let reduced = reduce_strata(start, &scores, &data, StratumRequirement::Sampled).unwrap();
        // k=5,4,3 leave empty strata; k=2 splits at 0.55 with one sampled unit each
        assert_eq!(reduced.k, 2);
        assert!(reduced.sample_counts(&data).iter().all(|&n| n >= 1));
        let both = reduce_strata(
            assign_strata(&scores, 5).unwrap(),
            &scores,
            &data,
            StratumRequirement::BothArms,
        )
        .unwrap();
        assert_eq!(both.k, 1);
    }

    #[test]
    fn reduce_when_sample_in_top_quintile() {
        let (data, scores) = ten_unit_fixture(&[8, 9]);
        let reduced = reduce_strata(
            assign_strata(&scores, 5).unwrap(),
            &scores,
            &data,
            StratumRequirement::Sampled,
        )
        .unwrap();
        assert!(reduced.k < 5);
        assert!(reduced.sample_counts(&data).iter().all(|&n| n >= 1));
    }

    #[test]
    fn reduce_is_noop_when_all_strata_sampled() {
        let (data, scores) = ten_unit_fixture(&[0, 2, 4, 6, 8]);
        let start = assign_strata(&scores, 5).unwrap();
        let reduced =
            reduce_strata(start.clone(), &scores, &data, StratumRequirement::Sampled).unwrap();
        assert_eq!(reduced, start);
    }
}
