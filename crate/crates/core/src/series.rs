//! Time-series containers: scalar series for the AR/MA/Gaussian models and a
//! planar series for the two-species predator-prey path.

use crate::error::{Error, Result};

/// Ordered scalar observations y_1..y_T.
#[derive(Debug, Clone, PartialEq)]
pub struct Series(Vec<f64>);

impl Series {
    pub fn new(values: Vec<f64>) -> Self {
        Series(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Guard for operations that need lags or regressions up to order `need`.
    pub fn require_len(&self, need: usize) -> Result<()> {
        if self.len() < need {
            return Err(Error::SeriesTooShort { need, got: self.len() });
        }
        Ok(())
    }

    /// CSV with header `t,x1`; t is the 1-based observation index.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x1\n");
        for (i, v) in self.0.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, v));
        }
        out
    }
}

/// Bivariate path observed on a fixed time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarSeries {
    pub times: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
}

impl PlanarSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with header `t,x1,x2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x1,x2\n");
        for i in 0..self.len() {
            out.push_str(&format!("{},{},{}\n", self.times[i], self.x1[i], self.x2[i]));
        }
        out
    }
}

/// Output of a model simulation: scalar series or planar path.
#[derive(Debug, Clone)]
pub enum SimOutput {
    Scalar(Series),
    Planar(PlanarSeries),
}

impl SimOutput {
    pub fn as_scalar(&self) -> Option<&Series> {
        match self {
            SimOutput::Scalar(s) => Some(s),
            SimOutput::Planar(_) => None,
        }
    }

    pub fn as_planar(&self) -> Option<&PlanarSeries> {
        match self {
            SimOutput::Planar(p) => Some(p),
            SimOutput::Scalar(_) => None,
        }
    }
}
