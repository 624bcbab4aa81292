use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::StratumRangePolicy;
use crate::error::{Error, Result};
use crate::model::OutcomeRange;
use crate::propensity::CovariateSpec;

/// Which of the two designs to simulate. In study 1 non-sampled outcomes are
/// clipped to `[-1, 1]`, in study 2 to `[-2, 2]`; sampled outcomes are always
/// clipped to `[-2, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Study {
    One,
    Two,
}

impl Study {
    pub fn number(&self) -> u8 {
        match self {
            Study::One => 1,
            Study::Two => 2,
        }
    }

    /// Clip bound for non-sampled potential outcomes.
    pub fn population_clip(&self) -> f64 {
        match self {
            Study::One => 1.0,
            Study::Two => 2.0,
        }
    }
}

impl TryFrom<u8> for Study {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Study::One),
            2 => Ok(Study::Two),
            other => Err(format!("study must be 1 or 2, got {other}")),
        }
    }
}

impl From<Study> for u8 {
    fn from(s: Study) -> u8 {
        s.number()
    }
}

pub const SAMPLE_CLIP: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    #[default]
    Positive,
    Negative,
}

impl Alignment {
    pub fn default_beta(&self) -> [f64; 3] {
        match self {
            Alignment::Positive => [0.4, 0.4, 1.0],
            Alignment::Negative => [1.0, 0.5, 0.4],
        }
    }

    pub fn default_gamma(&self) -> [f64; 2] {
        [0.1, 1.0]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Alignment::Positive => "positive",
            Alignment::Negative => "negative",
        }
    }
}

/// Covariates used by the stratification propensity model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum CovariateCombo {
    #[default]
    #[serde(rename = "x1_x2")]
    X1X2,
    #[serde(rename = "x3_x4")]
    X3X4,
    #[serde(rename = "x1_x3")]
    X1X3,
    #[serde(rename = "x2_x4")]
    X2X4,
    #[serde(rename = "x1_x2_x3_x4")]
    All,
}

impl CovariateCombo {
    pub const ALL: [CovariateCombo; 5] = [
        CovariateCombo::X1X2,
        CovariateCombo::X3X4,
        CovariateCombo::X1X3,
        CovariateCombo::X2X4,
        CovariateCombo::All,
    ];

    /// Zero-based covariate columns.
    pub fn columns(&self) -> Vec<usize> {
        match self {
            CovariateCombo::X1X2 => vec![0, 1],
            CovariateCombo::X3X4 => vec![2, 3],
            CovariateCombo::X1X3 => vec![0, 2],
            CovariateCombo::X2X4 => vec![1, 3],
            CovariateCombo::All => vec![0, 1, 2, 3],
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CovariateCombo::X1X2 => "x1_x2",
            CovariateCombo::X3X4 => "x3_x4",
            CovariateCombo::X1X3 => "x1_x3",
            CovariateCombo::X2X4 => "x2_x4",
            CovariateCombo::All => "x1_x2_x3_x4",
        }
    }
}

/// Population of inference: the full population or an SD-trimmed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PopulationDef {
    Full,
    /// Non-sampled units within `s` sample SDs on all four covariates.
    Sd(u8),
}

impl PopulationDef {
    pub const STANDARD: [PopulationDef; 4] = [
        PopulationDef::Full,
        PopulationDef::Sd(3),
        PopulationDef::Sd(2),
        PopulationDef::Sd(1),
    ];
}

impl fmt::Display for PopulationDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PopulationDef::Full => f.write_str("P"),
            PopulationDef::Sd(s) => write!(f, "P{s}"),
        }
    }
}

impl FromStr for PopulationDef {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "P" => Ok(PopulationDef::Full),
            _ => s
                .strip_prefix('P')
                .and_then(|rest| rest.parse::<u8>().ok())
                .filter(|&v| v > 0)
                .map(PopulationDef::Sd)
                .ok_or_else(|| format!("population must be P or P<s> with s >= 1, got `{s}`")),
        }
    }
}

impl TryFrom<String> for PopulationDef {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<PopulationDef> for String {
    fn from(p: PopulationDef) -> String {
        p.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeKeyword {
    SampleObserved,
}

/// Outcome range handed to the estimators: a fixed interval, or the
/// min/max of the observed sample outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeclaredRange {
    Fixed([f64; 2]),
    Keyword(RangeKeyword),
}

impl Default for DeclaredRange {
    fn default() -> Self {
        DeclaredRange::Fixed([-SAMPLE_CLIP, SAMPLE_CLIP])
    }
}

fn default_population_size() -> usize {
    2000
}
fn default_sample_size() -> usize {
    100
}
fn default_rho() -> f64 {
    0.25
}
fn default_k() -> usize {
    5
}
fn default_reps() -> usize {
    100
}
fn default_seed() -> u64 {
    1
}
fn default_populations() -> Vec<PopulationDef> {
    PopulationDef::STANDARD.to_vec()
}

/// One simulation cell. Field names double as the JSON config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub study: Study,
    #[serde(rename = "N", default = "default_population_size")]
    pub population_size: usize,
    #[serde(rename = "n", default = "default_sample_size")]
    pub sample_size: usize,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub alignment: Alignment,
    #[serde(default)]
    pub beta: Option<[f64; 3]>,
    #[serde(default)]
    pub gamma: Option<[f64; 2]>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub covariate_combo: CovariateCombo,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub declared_range: DeclaredRange,
    #[serde(default)]
    pub propensity_squares: bool,
    #[serde(default)]
    pub stratum_ranges: StratumRangePolicy,
    #[serde(default = "default_populations")]
    pub populations: Vec<PopulationDef>,
}

impl SimConfig {
    pub fn new(study: Study) -> Self {
        Self {
            study,
            population_size: default_population_size(),
            sample_size: default_sample_size(),
            rho: default_rho(),
            delta: 0.0,
            alignment: Alignment::Positive,
            beta: None,
            gamma: None,
            k: default_k(),
            covariate_combo: CovariateCombo::X1X2,
            reps: default_reps(),
            seed: default_seed(),
            declared_range: DeclaredRange::default(),
            propensity_squares: false,
            stratum_ranges: StratumRangePolicy::Observed,
            populations: default_populations(),
        }
    }

    pub fn beta(&self) -> [f64; 3] {
        self.beta.unwrap_or_else(|| self.alignment.default_beta())
    }

    pub fn gamma(&self) -> [f64; 2] {
        self.gamma.unwrap_or_else(|| self.alignment.default_gamma())
    }

    pub fn covariate_spec(&self) -> CovariateSpec {
        CovariateSpec::linear(self.covariate_combo.columns()).with_squares(self.propensity_squares)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.sample_size == 0 || self.sample_size >= self.population_size {
            return bad(format!(
                "need 0 < n < N, got n = {} and N = {}",
                self.sample_size, self.population_size
            ));
        }
        if !self.sample_size.is_multiple_of(2) {
            return Err(Error::OddSampleSize(self.sample_size));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return bad(format!("delta must lie in [0, 1], got {}", self.delta));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (-1, 1), got {}", self.rho));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.populations.is_empty() {
            return bad("at least one population is required".into());
        }
        if let DeclaredRange::Fixed([lo, hi]) = self.declared_range {
            let r = OutcomeRange::new(lo, hi)?;
            if r.lo() > -SAMPLE_CLIP || r.hi() < SAMPLE_CLIP {
                return bad(format!(
                    "declared range [{lo}, {hi}] must contain the sample outcome range [-2, 2]"
                ));
            }
        }
        Ok(())
    }
}
