//! Declarative run configuration. One TOML file covers the dictionary, the
//! fixed-K fit, the selection sweep and the simulation design; command-line
//! flags override individual fields.

use std::path::Path;

use serde::{Deserialize, Serialize};

use seglasso::dictionary::{BasisKind, BasisSpec, Target};
use seglasso::fit::{FitConfig, Sigma0};
use seglasso::sim::SimConfig;

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub dictionary: DictionarySection,
    pub fit: FitSection,
    pub selection: SelectionSection,
    pub simulation: SimConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DictionarySection {
    pub basis: Vec<BasisEntry>,
}

/// One dictionary block. `kind` selects the family; the other fields apply
/// where meaningful.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BasisEntry {
    pub kind: BasisKindName,
    #[serde(default = "default_target")]
    pub target: TargetName,
    pub resolution: Option<u32>,
    pub length: Option<f64>,
    pub j_max: Option<usize>,
    pub min_period: Option<f64>,
    pub degrees: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BasisKindName {
    Haar,
    FourierFixed,
    FourierGrid,
    Monomials,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TargetName {
    Time,
    Covariate,
}

fn default_target() -> TargetName {
    TargetName::Time
}

impl BasisEntry {
    pub fn to_spec(&self) -> Result<BasisSpec<f64>, CliError> {
        let need = |opt: Option<f64>, field: &str| {
            opt.ok_or_else(|| {
                CliError::input(format!("dictionary basis '{:?}' needs '{field}'", self.kind))
            })
        };
        let kind = match self.kind {
            BasisKindName::Haar => BasisKind::Haar {
                resolution: self.resolution.ok_or_else(|| {
                    CliError::input("dictionary basis 'haar' needs 'resolution'".into())
                })?,
                length: need(self.length, "length")?,
            },
            BasisKindName::FourierFixed => BasisKind::FourierFixed {
                j_max: self.j_max.ok_or_else(|| {
                    CliError::input("dictionary basis 'fourier_fixed' needs 'j_max'".into())
                })?,
                length: need(self.length, "length")?,
            },
            BasisKindName::FourierGrid => BasisKind::FourierGrid {
                min_period: need(self.min_period, "min_period")?,
            },
            BasisKindName::Monomials => BasisKind::Monomials {
                degrees: self.degrees.clone().ok_or_else(|| {
                    CliError::input("dictionary basis 'monomials' needs 'degrees'".into())
                })?,
            },
        };
        let target = match self.target {
            TargetName::Time => Target::Time,
            TargetName::Covariate => Target::Covariate,
        };
        Ok(BasisSpec { kind, target })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub k: Option<usize>,
    pub gamma: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    /// "robust" or a number used as plugin σ₀.
    pub sigma0: Sigma0Field,
    pub k_max_per_series: Option<usize>,
    pub lasso_tol: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        let d = FitConfig::<f64>::new(1);
        Self {
            k: None,
            gamma: d.gamma,
            epsilon: d.epsilon,
            max_iterations: d.max_iterations,
            sigma0: Sigma0Field::Named("robust".into()),
            k_max_per_series: None,
            lasso_tol: d.lasso_tol,
        }
    }
}

/// Either the literal string "robust" or a plugin σ₀ value.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Sigma0Field {
    Plugin(f64),
    Named(String),
}

impl FitSection {
    pub fn to_fit_config(&self, k_total: usize) -> Result<FitConfig<f64>, CliError> {
        let mut cfg = FitConfig::new(k_total);
        cfg.gamma = self.gamma;
        cfg.epsilon = self.epsilon;
        cfg.max_iterations = self.max_iterations;
        cfg.sigma0 = match &self.sigma0 {
            Sigma0Field::Named(s) if s == "robust" => Sigma0::Robust,
            Sigma0Field::Named(s) => {
                return Err(CliError::input(format!(
                    "sigma0 must be 'robust' or a number, got '{s}'"
                )))
            }
            Sigma0Field::Plugin(v) => Sigma0::Plugin(*v),
        };
        cfg.k_max_per_series = self.k_max_per_series;
        cfg.lasso_tol = self.lasso_tol;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn dictionary_specs(&self) -> Result<Vec<BasisSpec<f64>>, CliError> {
        if self.dictionary.basis.is_empty() {
            return Err(CliError::input(
                "config declares no dictionary basis; add [[dictionary.basis]] blocks".into(),
            ));
        }
        self.dictionary.basis.iter().map(BasisEntry::to_spec).collect()
    }
}

/// The grid file for `benchmark`: a list of simulation cells.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridFile {
    pub cell: Vec<SimConfig>,
}

impl GridFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let grid: GridFile =
            toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        if grid.cell.is_empty() {
            return Err(CliError::input(format!(
                "{}: grid declares no [[cell]] blocks",
                path.display()
            )));
        }
        Ok(grid)
    }
}
