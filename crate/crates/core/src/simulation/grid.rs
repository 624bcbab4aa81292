//! Grids of cells. A grid document has the same keys as a single cell, but
//! the swept parameters may be given as lists; the grid is their product.

use serde::{Deserialize, Serialize};

use super::config::{Alignment, CovariateCombo, DeclaredRange, PopulationDef, SimConfig, Study};
use crate::bounds::StratumRangePolicy;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(vs) => vs.clone(),
        }
    }
}

fn one<T>(v: T) -> OneOrMany<T> {
    OneOrMany::One(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub study: OneOrMany<Study>,
    #[serde(rename = "N", default = "grid_population_size")]
    pub population_size: usize,
    #[serde(rename = "n", default = "grid_sample_size")]
    pub sample_size: usize,
    #[serde(default = "grid_rho")]
    pub rho: OneOrMany<f64>,
    #[serde(default = "grid_delta")]
    pub delta: OneOrMany<f64>,
    #[serde(default = "grid_alignment")]
    pub alignment: OneOrMany<Alignment>,
    #[serde(default)]
    pub beta: Option<[f64; 3]>,
    #[serde(default)]
    pub gamma: Option<[f64; 2]>,
    #[serde(default = "grid_k")]
    pub k: OneOrMany<usize>,
    #[serde(default = "grid_combo")]
    pub covariate_combo: OneOrMany<CovariateCombo>,
    #[serde(default = "grid_reps")]
    pub reps: usize,
    #[serde(default = "grid_seed")]
    pub seed: u64,
    #[serde(default)]
    pub declared_range: DeclaredRange,
    #[serde(default)]
    pub propensity_squares: bool,
    #[serde(default)]
    pub stratum_ranges: StratumRangePolicy,
    #[serde(default = "grid_populations")]
    pub populations: Vec<PopulationDef>,
}

fn defaults() -> SimConfig {
    SimConfig::new(Study::One)
}
fn grid_population_size() -> usize {
    defaults().population_size
}
fn grid_sample_size() -> usize {
    defaults().sample_size
}
fn grid_rho() -> OneOrMany<f64> {
    one(defaults().rho)
}
fn grid_delta() -> OneOrMany<f64> {
    one(0.0)
}
fn grid_alignment() -> OneOrMany<Alignment> {
    one(Alignment::Positive)
}
fn grid_k() -> OneOrMany<usize> {
    one(defaults().k)
}
fn grid_combo() -> OneOrMany<CovariateCombo> {
    one(CovariateCombo::X1X2)
}
fn grid_reps() -> usize {
    defaults().reps
}
fn grid_seed() -> u64 {
    defaults().seed
}
fn grid_populations() -> Vec<PopulationDef> {
    PopulationDef::STANDARD.to_vec()
}

impl GridConfig {
    /// Cells in row-major order over study, alignment, delta, rho, combo, k.
    /// Every cell is validated.
    pub fn expand(&self) -> Result<Vec<SimConfig>> {
        let mut cells = Vec::new();
        for study in self.study.values() {
            for alignment in self.alignment.values() {
                for delta in self.delta.values() {
                    for rho in self.rho.values() {
                        for combo in self.covariate_combo.values() {
                            for k in self.k.values() {
                                let cell = SimConfig {
                                    study,
                                    population_size: self.population_size,
                                    sample_size: self.sample_size,
                                    rho,
                                    delta,
                                    alignment,
                                    beta: self.beta,
                                    gamma: self.gamma,
                                    k,
                                    covariate_combo: combo,
                                    reps: self.reps,
                                    seed: self.seed,
                                    declared_range: self.declared_range,
                                    propensity_squares: self.propensity_squares,
                                    stratum_ranges: self.stratum_ranges,
                                    populations: self.populations.clone(),
                                };
                                cell.validate()?;
                                cells.push(cell);
                            }
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_document() {
        let g: GridConfig = serde_json::from_str(r#"{"study": 2, "delta": 0.4}"#).unwrap();
        let cells = g.expand().unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].study, Study::Two);
        assert_eq!(cells[0].delta, 0.4);
        let direct: SimConfig = serde_json::from_str(r#"{"study": 2, "delta": 0.4}"#).unwrap();
        assert_eq!(cells[0], direct);
    }

    #[test]
    fn full_study_one_grid() {
        let g: GridConfig = serde_json::from_str(
            r#"{"study": 1, "delta": [0, 0.2, 0.4, 0.6, 0.8, 1],
                "rho": [0.25, 0.5, 0.7],
                "covariate_combo": ["x1_x2", "x3_x4", "x1_x3", "x2_x4", "x1_x2_x3_x4"]}"#,
        )
        .unwrap();
        let cells = g.expand().unwrap();
        assert_eq!(cells.len(), 90);
        assert_eq!(cells.len() * g.populations.len(), 360);
    }

    #[test]
    fn invalid_cell_and_unknown_key() {
        let g: GridConfig = serde_json::from_str(r#"{"study": 1, "delta": [0.5, 2]}"#).unwrap();
        assert!(g.expand().is_err());
        assert!(serde_json::from_str::<GridConfig>(r#"{"study": 1, "detla": 0}"#).is_err());
    }
}
