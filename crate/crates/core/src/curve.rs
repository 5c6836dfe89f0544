//! Sampled decay curves shared by the Monte Carlo, the fitters and the CLI.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveMetadata {
    pub sequence: String,
    pub temperature: Option<f64>,
    pub config_hash: Option<String>,
}

/// Amplitude versus time (seconds). `stderr` is zero where unknown.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub abscissa: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub stderr: Vec<f64>,
    pub metadata: CurveMetadata,
}

impl DecayCurve {
    pub fn new(abscissa: Vec<f64>, amplitude: Vec<f64>, stderr: Option<Vec<f64>>) -> Result<Self> {
        let n = abscissa.len();
        let stderr = stderr.unwrap_or_else(|| vec![0.0; n]);
        let c = DecayCurve { abscissa, amplitude, stderr, metadata: CurveMetadata::default() };
        c.validate()?;
        Ok(c)
    }

    pub fn from_fn(abscissa: &[f64], f: impl Fn(f64) -> f64) -> Self {
        DecayCurve {
            abscissa: abscissa.to_vec(),
            amplitude: abscissa.iter().map(|&t| f(t)).collect(),
            stderr: vec![0.0; abscissa.len()],
            metadata: CurveMetadata::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.abscissa.len();
        if self.amplitude.len() != n || self.stderr.len() != n {
            return Err(Error::InvalidInput(format!(
                "curve lengths differ: {} abscissa, {} amplitude, {} stderr",
                n,
                self.amplitude.len(),
                self.stderr.len()
            )));
        }
        if self.abscissa.iter().chain(&self.amplitude).chain(&self.stderr).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("curve contains non-finite values".into()));
        }
        if self.stderr.iter().any(|s| *s < 0.0) {
            return Err(Error::InvalidInput("negative standard error".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.abscissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissa.is_empty()
    }

    /// Weights 1/σ when every point carries a positive standard error.
    pub fn weights(&self) -> Option<Vec<f64>> {
        if !self.stderr.is_empty() && self.stderr.iter().all(|s| *s > 0.0) {
            Some(self.stderr.iter().map(|s| 1.0 / s).collect())
        } else {
            None
        }
    }
}
