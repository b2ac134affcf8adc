//! Surrogate regressors for the parameter-to-robustness map.

pub mod gp;
pub mod linalg;
pub mod mlp;
pub mod poly;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

pub use gp::{GpSurrogate, Kernel};
pub use mlp::{Mlp, MlpConfig, MlpSurrogate};
pub use poly::PolySurrogate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressError {
    #[error("invalid dataset: {0}")]
    InvalidData(String),
    #[error("degenerate design matrix: {0}")]
    DegenerateData(String),
    #[error("training diverged: {0}")]
    NonFinite(String),
    #[error("kernel matrix is not positive definite")]
    SingularKernel,
    #[error("invalid regressor configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown regressor {0:?} (expected one of: poly1, poly2, mlp, gp)")]
    UnknownRegressor(String),
}

/// Parameter vectors paired with their robustness values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    thetas: Vec<Vec<f64>>,
    rhos: Vec<f64>,
}

impl Dataset {
    pub fn new(thetas: Vec<Vec<f64>>, rhos: Vec<f64>) -> Result<Self, RegressError> {
        if thetas.len() != rhos.len() {
            return Err(RegressError::InvalidData(format!(
                "{} parameter vectors but {} targets",
                thetas.len(),
                rhos.len()
            )));
        }
        if thetas.is_empty() {
            return Err(RegressError::InvalidData("no samples".into()));
        }
        let k = thetas[0].len();
        if let Some(i) = thetas.iter().position(|t| t.len() != k) {
            return Err(RegressError::InvalidData(format!("sample {i} has dimension {}, expected {k}", thetas[i].len())));
        }
        if let Some(i) = rhos.iter().position(|r| !r.is_finite()) {
            return Err(RegressError::InvalidData(format!("target {i} is {}", rhos[i])));
        }
        if let Some(i) = thetas.iter().position(|t| t.iter().any(|x| !x.is_finite())) {
            return Err(RegressError::InvalidData(format!("sample {i} has a non-finite coordinate")));
        }
        Ok(Self { thetas, rhos })
    }

    pub fn len(&self) -> usize {
        self.rhos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhos.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.thetas.first().map_or(0, Vec::len)
    }

    pub fn thetas(&self) -> &[Vec<f64>] {
        &self.thetas
    }

    pub fn rhos(&self) -> &[f64] {
        &self.rhos
    }

    /// Rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            thetas: idx.iter().map(|&i| self.thetas[i].clone()).collect(),
            rhos: idx.iter().map(|&i| self.rhos[i]).collect(),
        }
    }
}

/// A fitted map from parameters to predicted robustness.
pub trait Surrogate: Send + Sync {
    fn predict(&self, theta: &[f64]) -> f64;
}

/// A surrogate that also reports its predictive standard deviation.
pub trait Posterior: Surrogate {
    fn stddev(&self, theta: &[f64]) -> f64;
}

/// Regression algorithm selectable by name.
#[derive(Debug, Clone, PartialEq)]
pub enum Regressor {
    Poly { degree: u32 },
    Mlp(MlpConfig),
    Gp(Kernel),
}

impl Regressor {
    pub fn fit(&self, data: &Dataset, seed: u64) -> Result<FittedSurrogate, RegressError> {
        Ok(match self {
            Regressor::Poly { degree } => FittedSurrogate::Poly(poly::fit(data, *degree)?),
            Regressor::Mlp(cfg) => FittedSurrogate::Mlp(mlp::fit(data, cfg, seed)?),
            Regressor::Gp(kernel) => FittedSurrogate::Gp(gp::fit(data, kernel)?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regressor::Poly { degree: 1 } => "poly1",
            Regressor::Poly { .. } => "poly2",
            Regressor::Mlp(_) => "mlp",
            Regressor::Gp(_) => "gp",
        }
    }
}

impl fmt::Display for Regressor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regressor {
    type Err = RegressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "poly1" => Ok(Regressor::Poly { degree: 1 }),
            "poly2" => Ok(Regressor::Poly { degree: 2 }),
            "mlp" => Ok(Regressor::Mlp(MlpConfig::default())),
            "gp" => Ok(Regressor::Gp(Kernel::default())),
            other => Err(RegressError::UnknownRegressor(other.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
pub enum FittedSurrogate {
    Poly(PolySurrogate),
    Mlp(MlpSurrogate),
    Gp(GpSurrogate),
}

/// Short description of a fitted surrogate for reports.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SurrogateSummary {
    pub kind: &'static str,
    pub train_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monomials: Option<Vec<String>>,
}

impl FittedSurrogate {
    pub fn as_posterior(&self) -> Option<&GpSurrogate> {
        match self {
            FittedSurrogate::Gp(gp) => Some(gp),
            _ => None,
        }
    }

    pub fn summary(&self) -> SurrogateSummary {
        match self {
            FittedSurrogate::Poly(p) => SurrogateSummary {
                kind: if p.degree() == 1 { "poly1" } else { "poly2" },
                train_size: p.train_size(),
                coefficients: Some(p.coefficients().to_vec()),
                monomials: Some(p.monomial_names()),
            },
            FittedSurrogate::Mlp(m) => SurrogateSummary {
                kind: "mlp",
                train_size: m.train_size(),
                coefficients: None,
                monomials: None,
            },
            FittedSurrogate::Gp(g) => SurrogateSummary {
                kind: "gp",
                train_size: g.train_size(),
                coefficients: Some(g.weights().to_vec()),
                monomials: None,
            },
        }
    }
}

impl Surrogate for FittedSurrogate {
    fn predict(&self, theta: &[f64]) -> f64 {
        match self {
            FittedSurrogate::Poly(p) => p.predict(theta),
            FittedSurrogate::Mlp(m) => m.predict(theta),
            FittedSurrogate::Gp(g) => g.predict(theta),
        }
    }
}

impl<S: Surrogate + ?Sized> Surrogate for &S {
    fn predict(&self, theta: &[f64]) -> f64 {
        (**self).predict(theta)
    }
}
