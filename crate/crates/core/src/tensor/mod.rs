//! Complexity of tensor products: exact search, closed forms and convolution brackets.

mod binomial;
mod grid;
mod heap;

pub use binomial::binomial_degree_complexity;
pub use grid::{bracket_complexity, complexity_bounds, convolve_g, lambda_quantile, GriddedCdf, QuantileInterval};
pub use heap::{enumeration_oracle, exact_complexity, OracleCount};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::MarginalSpectrum;

/// Cumulative mass within this distance of the target counts as reaching it.
pub const TIE_TOL: f64 = 1e-12;

/// Refuse to certify anything once the discarded mass reaches this level.
pub const MAX_DEFECT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub enum Marginals {
    /// Explicit list of `d` marginals.
    Product(Vec<MarginalSpectrum>),
    /// `d`-fold tensor degree of one marginal.
    Degree { spectrum: MarginalSpectrum, d: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorProblem {
    pub marginals: Marginals,
    pub total_defect: f64,
}

impl TensorProblem {
    pub fn product(marginals: Vec<MarginalSpectrum>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidParameter("d must be at least 1".into()));
        }
        for m in &marginals {
            m.validate()?;
        }
        let log_keep: f64 = marginals.iter().map(|m| (-m.tail_bound).ln_1p()).sum();
        Self::checked(Marginals::Product(marginals), -log_keep.exp_m1())
    }

    pub fn degree(spectrum: MarginalSpectrum, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("d must be at least 1".into()));
        }
        spectrum.validate()?;
        let defect = -(d as f64 * (-spectrum.tail_bound).ln_1p()).exp_m1();
        Self::checked(Marginals::Degree { spectrum, d }, defect)
    }

    fn checked(marginals: Marginals, total_defect: f64) -> Result<Self> {
        if !(total_defect < MAX_DEFECT) {
            return Err(Error::DefectTooLarge(total_defect));
        }
        Ok(TensorProblem { marginals, total_defect: total_defect.max(0.0) })
    }

    pub fn d(&self) -> usize {
        match &self.marginals {
            Marginals::Product(v) => v.len(),
            Marginals::Degree { d, .. } => *d,
        }
    }

    pub fn marginal(&self, j: usize) -> &MarginalSpectrum {
        match &self.marginals {
            Marginals::Product(v) => &v[j],
            Marginals::Degree { spectrum, .. } => spectrum,
        }
    }
}

/// A count that may exceed machine integers; `ln` is always set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Count {
    pub ln: f64,
    pub exact: Option<u128>,
}

impl Count {
    pub fn exact(n: u128) -> Self {
        Count { ln: (n as f64).ln(), exact: Some(n) }
    }

    /// Count known only through its logarithm; small values are rounded to an integer
    /// in the requested direction.
    pub fn from_ln(ln: f64, round_up: bool) -> Self {
        if ln < 50.0 {
            let v = ln.exp();
            let n = if round_up {
                (v * (1.0 - 1e-12)).ceil().max(1.0)
            } else {
                (v * (1.0 + 1e-12)).floor().max(1.0)
            };
            Count::exact(n as u128)
        } else {
            Count { ln, exact: None }
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self.exact {
            Some(n) => n as f64,
            None => self.ln.exp(),
        }
    }
}

impl std::fmt::Display for Count {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.exact {
            Some(n) => write!(f, "{n}"),
            None => write!(f, "exp({:.6})", self.ln),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Enumeration,
    Binomial,
    Flat,
    ConvolutionBounds,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Enumeration => "Enumeration",
            Method::Binomial => "Binomial",
            Method::Flat => "Flat",
            Method::ConvolutionBounds => "ConvolutionBounds",
        };
        f.write_str(s)
    }
}

/// Bracket on `n(ε)` and on `ln n(ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityInterval {
    pub n_lower: Count,
    pub n_upper: Count,
    pub ln_lower: f64,
    pub ln_upper: f64,
    pub method: Method,
}

impl ComplexityInterval {
    pub fn exact(n: Count, method: Method) -> Self {
        ComplexityInterval { n_lower: n, n_upper: n, ln_lower: n.ln, ln_upper: n.ln, method }
    }

    pub fn is_exact(&self) -> bool {
        self.n_lower == self.n_upper
    }

    pub fn ln_width(&self) -> f64 {
        self.ln_upper - self.ln_lower
    }

    pub fn ln_mid(&self) -> f64 {
        0.5 * (self.ln_lower + self.ln_upper)
    }

    /// Whether an exact count lies inside, compared in log space for huge values.
    pub fn contains(&self, n: &Count) -> bool {
        match (n.exact, self.n_lower.exact, self.n_upper.exact) {
            (Some(v), Some(lo), Some(hi)) => lo <= v && v <= hi,
            _ => self.ln_lower <= n.ln * (1.0 + 1e-12) + 1e-12 && n.ln <= self.ln_upper * (1.0 + 1e-12) + 1e-12,
        }
    }
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidEps(eps))
    }
}

/// Distinct atoms of a marginal as `(ln weight, multiplicity, mass)`, heaviest first.
pub(crate) fn grouped_atoms(spec: &MarginalSpectrum) -> Vec<(f64, u64, f64)> {
    crate::spectra::u_distribution(spec).atoms.iter().map(|a| (-a.position, a.multiplicity, a.mass)).collect()
}
