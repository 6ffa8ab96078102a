//! Experiment configuration, read from a JSON file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::eigensolver::SolverOptions;
use crate::energy::FracParams;
use crate::error::{Error, Result};
use crate::geometry::{GridDomain, Shape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Node count; intervals only.
    #[serde(default)]
    pub n: Option<usize>,
    /// Lattice spacing; required in 2D, alternative to `n` in 1D.
    #[serde(default)]
    pub h: Option<f64>,
    /// Width of the exterior lattice collar in 2D. Defaults to the diameter.
    #[serde(default)]
    pub collar_width: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fractional {
    pub r: f64,
    pub s: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Fields,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Fields, Format::Json]
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            directory: default_dir(),
            formats: all_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: Shape,
    pub grid: GridSpec,
    pub fractional: Fractional,
    /// Exponents p, strictly increasing.
    pub sweep: Vec<f64>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn params(&self, p: f64) -> Result<FracParams> {
        let f = &self.fractional;
        FracParams::new(f.r, f.s, p, f.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        if self.sweep.is_empty() {
            return Err(Error::Config("sweep must list at least one p".into()));
        }
        if self.sweep.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(format!("sweep values must be strictly increasing: {:?}", self.sweep)));
        }
        let dim = self.domain.dim();
        for &p in &self.sweep {
            let params = self.params(p).map_err(cfg_err)?;
            params.check_exponents().map_err(cfg_err)?;
            params.check_limit_regime(dim).map_err(cfg_err)?;
        }
        self.solver.validate().map_err(cfg_err)?;
        match (&self.domain, self.grid.n, self.grid.h) {
            (Shape::Interval { .. }, None, None) => Err(Error::Config("interval grid needs n or h".into())),
            (Shape::Interval { .. }, Some(_), Some(_)) => Err(Error::Config("give either n or h, not both".into())),
            (Shape::Disk { .. } | Shape::Box { .. }, _, None) => Err(Error::Config("2D grids need h".into())),
            _ => Ok(()),
        }
    }

    pub fn build_domain(&self) -> Result<Arc<GridDomain>> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        let collar = self.grid.collar_width.unwrap_or_else(|| self.domain.diameter());
        let d = match self.domain {
            Shape::Interval { a, b } => {
                let n = match (self.grid.n, self.grid.h) {
                    (Some(n), _) => n,
                    (None, Some(h)) => ((b - a) / h).round() as usize,
                    (None, None) => unreachable!("rejected by validate"),
                };
                GridDomain::build_interval(a, b, n)
            }
            Shape::Disk { center, radius } => GridDomain::build_disk(center, radius, self.grid.h.unwrap_or(0.0), collar),
            Shape::Box { lo, hi } => GridDomain::build_box(lo, hi, self.grid.h.unwrap_or(0.0), collar),
        }
        .map_err(cfg_err)?;
        Ok(Arc::new(d))
    }
}
