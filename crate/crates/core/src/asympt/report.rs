use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Prediction, Regime};
use crate::error::Result;
use crate::tensor::ComplexityInterval;

/// One `(d, ε)` comparison of a bracketed `ln n` with the predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub d: u64,
    pub eps: f64,
    pub ln_n_lower: f64,
    pub ln_n_upper: f64,
    pub predicted: f64,
    /// Bracket midpoint minus prediction.
    pub residual: f64,
    /// `residual / b_d`.
    pub normalized: f64,
}

impl ReportRow {
    pub fn new(interval: &ComplexityInterval, p: &Prediction) -> Self {
        let residual = interval.ln_mid() - p.ln_n;
        ReportRow {
            d: p.d,
            eps: p.eps,
            ln_n_lower: interval.ln_lower,
            ln_n_upper: interval.ln_upper,
            predicted: p.ln_n,
            residual,
            normalized: residual / p.b_d,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AsymptReport {
    pub regime: Option<Regime>,
    pub residuals: BTreeMap<String, f64>,
    pub rows: Vec<ReportRow>,
}

impl AsymptReport {
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Writes `d,eps,ln_n_lower,ln_n_upper,predicted,residual,normalized`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for row in &self.rows {
            wr.serialize(row)?;
        }
        wr.flush()?;
        Ok(())
    }
}
