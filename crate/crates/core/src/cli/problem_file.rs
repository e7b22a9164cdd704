//! TOML problem files for the hybrid equation and the truncated series.
//!
//! A hybrid file looks like
//!
//! ```toml
//! horizon = 1.0
//! x0 = "1"
//! f1 = "x"
//! G1 = "0.1*eta"
//! tau = [0.5]
//! sigma = ["t/2"]
//! h = 0.25            # optional; defaults to the smallest gap between fixed times
//! exact = "exp(t)"    # optional reference solution (left limits)
//!
//! [lipschitz]         # optional; keys L1 L21 L22 LG1 LG21 LG22 LG31 LG32 Lg1 Lg2 Lg3
//! L1 = 1.0
//!
//! [quadrature]
//! nodes_per_segment = 256   # trapezoid panels per segment
//!
//! [solver]
//! mu = 2.0            # optional
//! tol = 1e-10
//! kmax = 200
//! ```
//!
//! A series file replaces the kernels with `y0`, `kernels = ["f1", "f2", ...]`
//! and a `lipschitz` array with one constant per order.

use crate::hybrid_operator::{HybridProblem, OperatorError, ProblemBuilder};
use crate::kernel_lang::{KernelExpr, LipschitzSet, ParseError};
use crate::piecewise::DEFAULT_PANELS;
use crate::series::{SeriesError, SeriesProblem};
use crate::solvers::{SolverOptions, DEFAULT_KMAX, DEFAULT_TOL};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid problem file: {0}")]
    Toml(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("exact solution: {0}")]
    Exact(ParseError),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    pub nodes_per_segment: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub mu: Option<f64>,
    pub tol: Option<f64>,
    pub kmax: Option<usize>,
}

impl SolverSection {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            mu: self.mu,
            tol: self.tol.unwrap_or(DEFAULT_TOL),
            kmax: self.kmax.unwrap_or(DEFAULT_KMAX),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub horizon: f64,
    pub x0: Option<String>,
    pub f1: Option<String>,
    pub f2: Option<String>,
    #[serde(rename = "G1")]
    pub g1: Option<String>,
    #[serde(rename = "G2")]
    pub g2: Option<String>,
    #[serde(rename = "G3")]
    pub g3: Option<String>,
    pub g: Option<String>,
    #[serde(default)]
    pub tau: Vec<f64>,
    #[serde(default)]
    pub sigma: Vec<String>,
    pub h: Option<f64>,
    pub exact: Option<String>,
    pub lipschitz: Option<LipschitzSet>,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub solver: SolverSection,
}

fn read(path: &Path) -> Result<String, FileError> {
    std::fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_exact(src: &Option<String>) -> Result<Option<KernelExpr>, FileError> {
    src.as_deref()
        .map(|s| KernelExpr::parse(s, &["t"]).map_err(FileError::Exact))
        .transpose()
}

impl ProblemFile {
    pub fn from_toml_str(src: &str) -> Result<Self, FileError> {
        toml::from_str(src).map_err(|e| FileError::Toml(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, FileError> {
        Self::from_toml_str(&read(path)?)
    }

    pub fn panels(&self) -> usize {
        self.quadrature.nodes_per_segment.unwrap_or(DEFAULT_PANELS)
    }

    pub fn solver_options(&self) -> SolverOptions {
        self.solver.options()
    }

    pub fn exact(&self) -> Result<Option<KernelExpr>, FileError> {
        parse_exact(&self.exact)
    }

    /// Build the problem, overriding the panel count when `panels` is given.
    pub fn build(&self, panels: Option<usize>) -> Result<HybridProblem, FileError> {
        let mut b = ProblemBuilder::new(self.horizon).panels(panels.unwrap_or_else(|| self.panels()));
        for (name, src) in [
            ("x0", &self.x0),
            ("f1", &self.f1),
            ("f2", &self.f2),
            ("G1", &self.g1),
            ("G2", &self.g2),
            ("G3", &self.g3),
            ("g", &self.g),
        ] {
            if let Some(src) = src {
                b = b.kernel(name, src);
            }
        }
        let sigma: Vec<&str> = self.sigma.iter().map(String::as_str).collect();
        b = b.tau(&self.tau).sigma(&sigma);
        if let Some(h) = self.h {
            b = b.h(h);
        }
        if let Some(lip) = &self.lipschitz {
            b = b.lipschitz(lip.clone());
        }
        Ok(b.build()?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesFile {
    pub horizon: f64,
    pub y0: String,
    pub kernels: Vec<String>,
    #[serde(default)]
    pub lipschitz: Vec<f64>,
    #[serde(default)]
    pub allow_high_order: bool,
    pub exact: Option<String>,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub solver: SolverSection,
}

impl SeriesFile {
    pub fn from_toml_str(src: &str) -> Result<Self, FileError> {
        toml::from_str(src).map_err(|e| FileError::Toml(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, FileError> {
        Self::from_toml_str(&read(path)?)
    }

    pub fn solver_options(&self) -> SolverOptions {
        self.solver.options()
    }

    pub fn exact(&self) -> Result<Option<KernelExpr>, FileError> {
        parse_exact(&self.exact)
    }

    pub fn build(&self, allow_high_order: bool) -> Result<SeriesProblem, FileError> {
        let kernels: Vec<&str> = self.kernels.iter().map(String::as_str).collect();
        Ok(SeriesProblem::new(
            self.horizon,
            &self.y0,
            &kernels,
            self.lipschitz.clone(),
            self.quadrature.nodes_per_segment.unwrap_or(DEFAULT_PANELS),
            allow_high_order || self.allow_high_order,
        )?)
    }
}
