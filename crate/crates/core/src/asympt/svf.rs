use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::integrate;

/// A slowly varying function with the lower cutoff `x0` used by [`l_tilde`].
#[derive(Clone)]
pub enum SvfHandle {
    Constant { c: f64, x0: f64 },
    /// `c (ln x)^p`, defined for `x > 1`.
    LogPower { c: f64, p: f64, x0: f64 },
    Custom { f: Arc<dyn Fn(f64) -> f64 + Send + Sync>, x0: f64, name: String },
}

impl fmt::Debug for SvfHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SvfHandle::Constant { c, x0 } => write!(f, "Constant({c}, x0={x0})"),
            SvfHandle::LogPower { c, p, x0 } => write!(f, "LogPower({c}·ln^{p}, x0={x0})"),
            SvfHandle::Custom { name, x0, .. } => write!(f, "Custom({name}, x0={x0})"),
        }
    }
}

impl SvfHandle {
    pub fn constant(c: f64) -> Self {
        SvfHandle::Constant { c, x0: 1.0 }
    }

    pub fn log_power(c: f64, p: f64) -> Self {
        SvfHandle::LogPower { c, p, x0: std::f64::consts::E }
    }

    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(name: &str, x0: f64, f: F) -> Self {
        SvfHandle::Custom { f: Arc::new(f), x0, name: name.to_string() }
    }

    pub fn with_x0(mut self, new_x0: f64) -> Self {
        match &mut self {
            SvfHandle::Constant { x0, .. } | SvfHandle::LogPower { x0, .. } | SvfHandle::Custom { x0, .. } => *x0 = new_x0,
        }
        self
    }

    pub fn x0(&self) -> f64 {
        match self {
            SvfHandle::Constant { x0, .. } | SvfHandle::LogPower { x0, .. } | SvfHandle::Custom { x0, .. } => *x0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SvfHandle::Constant { c, .. } => *c,
            SvfHandle::LogPower { c, p, .. } => c * x.ln().powf(*p),
            SvfHandle::Custom { f, .. } => f(x),
        }
    }

    /// `x ↦ φ(x)^k`.
    pub fn pow(&self, k: f64) -> SvfHandle {
        match self {
            SvfHandle::Constant { c, x0 } => SvfHandle::Constant { c: c.powf(k), x0: *x0 },
            SvfHandle::LogPower { c, p, x0 } => SvfHandle::LogPower { c: c.powf(k), p: p * k, x0: *x0 },
            SvfHandle::Custom { f, x0, name } => {
                let f = f.clone();
                SvfHandle::Custom { f: Arc::new(move |x| f(x).powf(k)), x0: *x0, name: format!("({name})^{k}") }
            }
        }
    }

    /// `x ↦ ℓ̃(x)` as a new handle (each evaluation runs a quadrature).
    pub fn l_tilde_handle(&self) -> SvfHandle {
        let inner = self.clone();
        let x0 = self.x0();
        let name = format!("ltilde({self:?})");
        SvfHandle::custom(&name, x0, move |x| l_tilde(&inner, x).map(|l| l.value).unwrap_or(f64::NAN))
    }
}

/// `ℓ̃(x)` and the ratio `ℓ̃(x)/φ(x)`, which grows without bound for a genuine SVF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LTilde {
    pub value: f64,
    pub ratio_to_phi: f64,
}

/// `ℓ̃(x) = ∫_{x0}^x φ(t)/t dt`, integrated in `v = ln t`.
pub fn l_tilde(svf: &SvfHandle, x: f64) -> Result<LTilde> {
    let x0 = svf.x0();
    let phi_x = svf.eval(x);
    if x <= x0 {
        return Ok(LTilde { value: 0.0, ratio_to_phi: 0.0 });
    }
    match *svf {
        SvfHandle::Constant { c, .. } => {
            let v = c * (x / x0).ln();
            return Ok(LTilde { value: v, ratio_to_phi: v / c });
        }
        SvfHandle::LogPower { c, p, .. } if p != -1.0 && x0 > 1.0 => {
            let v = c * (x.ln().powf(p + 1.0) - x0.ln().powf(p + 1.0)) / (p + 1.0);
            return Ok(LTilde { value: v, ratio_to_phi: v / phi_x });
        }
        _ => {}
    }
    let (a, b) = (x0.ln(), x.ln());
    let mut bad = false;
    let q = integrate(
        |v: f64| {
            let y = svf.eval(v.exp());
            if !y.is_finite() || y < 0.0 {
                bad = true;
                return 0.0;
            }
            y
        },
        a,
        b,
        1e-12 * (b - a) * phi_x.abs().max(1e-300),
        4000,
    );
    if bad || !q.converged {
        return Err(Error::IntegrableSingularity);
    }
    Ok(LTilde { value: q.value, ratio_to_phi: q.value / phi_x })
}

/// De Bruijn conjugate value with the residuals of its two defining identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeBruijn {
    pub value: f64,
    /// `|φ^#(x)·φ(x·φ^#(x)) − 1|`; zero up to `tol` at the fixed point.
    pub fixed_point_residual: f64,
    /// `|φ(x)·φ^#(x·φ(x)) − 1|`; vanishes only as `x → ∞`.
    pub conjugate_residual: f64,
    pub iterations: usize,
}

const DE_BRUIJN_MAX_ITER: usize = 500;

fn de_bruijn_fixed_point(svf: &SvfHandle, x: f64, tol: f64) -> Result<(f64, usize)> {
    let mut y = 1.0 / svf.eval(x);
    for it in 1..=DE_BRUIJN_MAX_ITER {
        let next = 1.0 / svf.eval(x * y);
        if !next.is_finite() || next <= 0.0 {
            return Err(Error::NoConvergence(it));
        }
        let change = ((next - y) / next).abs();
        y = next;
        if change < tol {
            return Ok((y, it));
        }
    }
    Err(Error::NoConvergence(DE_BRUIJN_MAX_ITER))
}

/// `φ^#(x)` by the iteration `y ← 1/φ(x·y)` from `y₀ = 1/φ(x)`.
pub fn de_bruijn_numeric(svf: &SvfHandle, x: f64, tol: f64) -> Result<DeBruijn> {
    if !(x > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("de Bruijn at x={x}, tol={tol}")));
    }
    let (y, iterations) = de_bruijn_fixed_point(svf, x, tol)?;
    let fixed_point_residual = (y * svf.eval(x * y) - 1.0).abs();
    let conjugate_residual = match de_bruijn_fixed_point(svf, x * svf.eval(x), tol) {
        Ok((z, _)) => (svf.eval(x) * z - 1.0).abs(),
        Err(_) => f64::NAN,
    };
    Ok(DeBruijn { value: y, fixed_point_residual, conjugate_residual, iterations })
}
