//! Data model shared by every estimator, plus the sample-level estimand.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, sample_variance, Z_975};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    Treated,
    Control,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Treated => "treated",
            Arm::Control => "control",
        })
    }
}

/// Both potential outcomes of a unit. Only simulated data carries them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialOutcomes {
    pub y1: f64,
    pub y0: f64,
}

impl PotentialOutcomes {
    pub fn effect(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// One unit of the population. `w` and `y` are present exactly when the
/// unit was selected into the experiment (`z`).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitRecord {
    pub id: String,
    pub z: bool,
    pub w: Option<bool>,
    pub y: Option<f64>,
    pub x: Vec<f64>,
    pub potential: Option<PotentialOutcomes>,
}

impl UnitRecord {
    pub fn sampled(id: impl Into<String>, treated: bool, y: f64, x: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            z: true,
            w: Some(treated),
            y: Some(y),
            x,
            potential: None,
        }
    }

    pub fn unsampled(id: impl Into<String>, x: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            z: false,
            w: None,
            y: None,
            x,
            potential: None,
        }
    }

    pub fn with_potential(mut self, potential: PotentialOutcomes) -> Self {
        self.potential = Some(potential);
        self
    }

    /// Arm and outcome of a sampled unit.
    pub fn observed(&self) -> Option<(Arm, f64)> {
        match (self.z, self.w, self.y) {
            (true, Some(true), Some(y)) => Some((Arm::Treated, y)),
            (true, Some(false), Some(y)) => Some((Arm::Control, y)),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidUnit {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        match (self.z, self.w.is_some(), self.y.is_some()) {
            (true, true, true) | (false, false, false) => {}
            (true, _, _) => return bad("sampled unit needs both treatment and outcome"),
            (false, _, _) => return bad("non-sampled unit must not carry treatment or outcome"),
        }
        if let Some(y) = self.y {
            if !y.is_finite() {
                return bad("outcome is not finite");
            }
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return bad("covariate is not finite");
        }
        Ok(())
    }
}

/// Known range `[y_lo, y_hi]` of the outcome scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRange {
    lo: f64,
    hi: f64,
}

impl OutcomeRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidRange { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }
}

/// A population of units with the experimental sample flagged inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyData {
    units: Vec<UnitRecord>,
    range: OutcomeRange,
    covariate_dim: usize,
    n_sampled: usize,
}

impl StudyData {
    pub fn new(units: Vec<UnitRecord>, range: OutcomeRange) -> Result<Self> {
        let covariate_dim = units.first().map_or(0, |u| u.x.len());
        let mut n_treated = 0;
        let mut n_control = 0;
        for u in &units {
            u.validate()?;
            if u.x.len() != covariate_dim {
                return Err(Error::CovariateLength {
                    id: u.id.clone(),
                    expected: covariate_dim,
                    found: u.x.len(),
                });
            }
            if let Some((arm, y)) = u.observed() {
                if !range.contains(y) {
                    return Err(Error::OutcomeOutOfRange {
                        id: u.id.clone(),
                        y,
                        lo: range.lo(),
                        hi: range.hi(),
                    });
                }
                match arm {
                    Arm::Treated => n_treated += 1,
                    Arm::Control => n_control += 1,
                }
            }
        }
        let n_sampled = n_treated + n_control;
        if n_sampled < 2 {
            return Err(Error::TooFewSampled(n_sampled));
        }
        if n_treated == 0 {
            return Err(Error::MissingArm(Arm::Treated));
        }
        if n_control == 0 {
            return Err(Error::MissingArm(Arm::Control));
        }
        Ok(Self {
            units,
            range,
            covariate_dim,
            n_sampled,
        })
    }

    pub fn units(&self) -> &[UnitRecord] {
        &self.units
    }

    pub fn into_units(self) -> Vec<UnitRecord> {
        self.units
    }

    pub fn range(&self) -> OutcomeRange {
        self.range
    }

    /// Same units under a different declared range.
    pub fn with_range(&self, range: OutcomeRange) -> Result<Self> {
        Self::new(self.units.clone(), range)
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariate_dim
    }

    /// Population size `N`.
    pub fn population_size(&self) -> usize {
        self.units.len()
    }

    /// Sample size `n`.
    pub fn sample_size(&self) -> usize {
        self.n_sampled
    }

    /// `Pr(Z = 1) = n / N`.
    pub fn p_sel(&self) -> f64 {
        self.n_sampled as f64 / self.units.len() as f64
    }

    pub fn sampled(&self) -> impl Iterator<Item = &UnitRecord> + '_ {
        self.units.iter().filter(|u| u.z)
    }

    /// Keeps the units for which `keep(index, unit)` holds.
    pub fn retain_by(&self, mut keep: impl FnMut(usize, &UnitRecord) -> bool) -> Result<Self> {
        let units = self
            .units
            .iter()
            .enumerate()
            .filter(|(i, u)| keep(*i, u))
            .map(|(_, u)| u.clone())
            .collect();
        Self::new(units, self.range)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SateEstimate {
    pub estimate: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_treated: usize,
    pub n_control: usize,
}

fn arm_outcomes<'a>(units: impl IntoIterator<Item = &'a UnitRecord>) -> (Vec<f64>, Vec<f64>) {
    let mut treated = Vec::new();
    let mut control = Vec::new();
    for (arm, y) in units.into_iter().filter_map(UnitRecord::observed) {
        match arm {
            Arm::Treated => treated.push(y),
            Arm::Control => control.push(y),
        }
    }
    (treated, control)
}

/// Treated-minus-control difference in observed means over the sampled
/// units among `units`.
pub fn difference_in_means<'a>(units: impl IntoIterator<Item = &'a UnitRecord>) -> Result<f64> {
    let (treated, control) = arm_outcomes(units);
    if treated.is_empty() {
        return Err(Error::MissingArm(Arm::Treated));
    }
    if control.is_empty() {
        return Err(Error::MissingArm(Arm::Control));
    }
    Ok(mean(&treated) - mean(&control))
}

/// Difference in means with an unpooled two-sample standard error.
pub fn sate_from_units<'a>(units: impl IntoIterator<Item = &'a UnitRecord>) -> Result<SateEstimate> {
    let (treated, control) = arm_outcomes(units);
    for (arm, ys) in [(Arm::Treated, &treated), (Arm::Control, &control)] {
        match ys.len() {
            0 => return Err(Error::MissingArm(arm)),
            1 => return Err(Error::DegenerateArm(arm)),
            _ => {}
        }
    }
    let estimate = mean(&treated) - mean(&control);
    let se = (sample_variance(&treated) / treated.len() as f64
        + sample_variance(&control) / control.len() as f64)
        .sqrt();
    Ok(SateEstimate {
        estimate,
        se,
        ci_lo: estimate - Z_975 * se,
        ci_hi: estimate + Z_975 * se,
        n_treated: treated.len(),
        n_control: control.len(),
    })
}

pub fn estimate_sate(data: &StudyData) -> Result<SateEstimate> {
    sate_from_units(data.sampled())
}

/// Finite-population average of `y1 - y0` over every unit.
pub fn true_pate(data: &StudyData) -> Result<f64> {
    true_pate_of(data.units())
}

pub fn true_pate_of(units: &[UnitRecord]) -> Result<f64> {
    if units.is_empty() {
        return Err(Error::NotSimulated);
    }
    let mut total = 0.0;
    for u in units {
        total += u.potential.ok_or(Error::NotSimulated)?.effect();
    }
    Ok(total / units.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Framework {
    WorstCase,
    Mss,
    WorstCaseStratified,
    MssStratified,
}

impl Framework {
    pub const ALL: [Framework; 4] = [
        Framework::WorstCase,
        Framework::Mss,
        Framework::WorstCaseStratified,
        Framework::MssStratified,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Framework::WorstCase => "worst_case",
            Framework::Mss => "mss",
            Framework::WorstCaseStratified => "worst_case_stratified",
            Framework::MssStratified => "mss_stratified",
        }
    }

    pub fn is_stratified(&self) -> bool {
        matches!(self, Framework::WorstCaseStratified | Framework::MssStratified)
    }

    pub fn is_mss(&self) -> bool {
        matches!(self, Framework::Mss | Framework::MssStratified)
    }

    pub fn unstratified(&self) -> Framework {
        if self.is_mss() {
            Framework::Mss
        } else {
            Framework::WorstCase
        }
    }
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Framework {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Framework::ALL
            .into_iter()
            .find(|fw| fw.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown framework `{s}`")))
    }
}

/// Lower/upper bound on the PATE under one framework.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInterval {
    pub lo: f64,
    pub hi: f64,
    pub framework: Framework,
}

impl BoundInterval {
    pub fn new(lo: f64, hi: f64, framework: Framework) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::InvalidArgument(format!(
                "bound lower end {lo} exceeds upper end {hi}"
            )));
        }
        Ok(Self { lo, hi, framework })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn range(lo: f64, hi: f64) -> OutcomeRange {
        OutcomeRange::new(lo, hi).unwrap()
    }

    fn two_by_two(treated: [f64; 2], control: [f64; 2]) -> StudyData {
        let mut units = Vec::new();
        for (i, y) in treated.iter().enumerate() {
            units.push(UnitRecord::sampled(format!("t{i}"), true, *y, vec![0.0]));
        }
        for (i, y) in control.iter().enumerate() {
            units.push(UnitRecord::sampled(format!("c{i}"), false, *y, vec![0.0]));
        }
        units.push(UnitRecord::unsampled("p", vec![1.0]));
        StudyData::new(units, range(-5.0, 5.0)).unwrap()
    }

    #[test]
    fn sate_two_point_arms() {
        let s = estimate_sate(&two_by_two([1.0, 2.0], [0.0, 1.0])).unwrap();
        assert!((s.estimate - 1.0).abs() < 1e-15);
        assert!((s.se - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((s.ci_hi - s.ci_lo - 2.0 * Z_975 * s.se).abs() < 1e-12);
    }

    #[test]
    fn sate_constant_outcomes() {
        let s = estimate_sate(&two_by_two([0.3, 0.3], [0.3, 0.3])).unwrap();
        assert_eq!(s.estimate, 0.0);
        assert_eq!(s.se, 0.0);
    }

    #[test]
    fn sate_single_unit_arm_is_degenerate() {
        let units = vec![
            UnitRecord::sampled("a", true, 1.0, vec![]),
            UnitRecord::sampled("b", false, 0.0, vec![]),
            UnitRecord::sampled("c", false, 0.5, vec![]),
        ];
        let data = StudyData::new(units, range(0.0, 1.0)).unwrap();
        assert_eq!(estimate_sate(&data).unwrap_err(), Error::DegenerateArm(Arm::Treated));
    }

    #[test]
    fn missing_arm_rejected() {
        let units = vec![
            UnitRecord::sampled("a", true, 1.0, vec![]),
            UnitRecord::sampled("b", true, 0.0, vec![]),
        ];
        assert_eq!(
            StudyData::new(units.clone(), range(0.0, 1.0)).unwrap_err(),
            Error::MissingArm(Arm::Control)
        );
        assert_eq!(
            difference_in_means(&units).unwrap_err(),
            Error::MissingArm(Arm::Control)
        );
    }

    #[test]
    fn data_invariants_enforced() {
        assert!(OutcomeRange::new(1.0, 1.0).is_err());
        let bad_w = UnitRecord {
            w: Some(true),
            ..UnitRecord::unsampled("x", vec![])
        };
        let base = vec![
            UnitRecord::sampled("a", true, 1.0, vec![0.0]),
            UnitRecord::sampled("b", false, 0.0, vec![0.0]),
        ];
        let mut units = base.clone();
        units.push(UnitRecord { x: vec![0.0], ..bad_w });
        assert!(matches!(
            StudyData::new(units, range(0.0, 1.0)),
            Err(Error::InvalidUnit { .. })
        ));
        let mut units = base.clone();
        units.push(UnitRecord::unsampled("c", vec![0.0, 1.0]));
        assert!(matches!(
            StudyData::new(units, range(0.0, 1.0)),
            Err(Error::CovariateLength { .. })
        ));
        assert!(matches!(
            StudyData::new(base, range(0.5, 1.0)),
            Err(Error::OutcomeOutOfRange { .. })
        ));
    }

    #[test]
    fn true_pate_examples() {
        let effects = [1.0, 1.0, -1.0, -1.0];
        let mut units: Vec<UnitRecord> = effects
            .iter()
            .enumerate()
            .map(|(i, d)| {
                UnitRecord::unsampled(i.to_string(), vec![])
                    .with_potential(PotentialOutcomes { y1: *d, y0: 0.0 })
            })
            .collect();
        assert_eq!(true_pate_of(&units).unwrap(), 0.0);
        for u in &mut units {
            u.potential = Some(PotentialOutcomes { y1: 2.5, y0: 1.0 });
        }
        assert_eq!(true_pate_of(&units).unwrap(), 1.5);
        units[2].potential = None;
        assert_eq!(true_pate_of(&units).unwrap_err(), Error::NotSimulated);
    }

    #[test]
    fn framework_names_round_trip() {
        for fw in Framework::ALL {
            assert_eq!(fw.as_str().parse::<Framework>().unwrap(), fw);
        }
        assert!("bogus".parse::<Framework>().is_err());
    }
}
