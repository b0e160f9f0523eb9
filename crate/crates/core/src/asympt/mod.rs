//! Regime classification, log-complexity predictors `a_d + q(ε) b_d` and
//! finite-d diagnostics for the limit criteria.

mod criteria;
mod report;
mod svf;

use serde::{Deserialize, Serialize};

pub use criteria::{
    boundedness_diagnostic, check_conditions_abc, darling_psi, euler_tractability_diagnostic, slow_var_check, AbcReport,
    AbcRow, BoundednessReport, GrowthTag, SlowVarReport, TractabilityReport, TractabilityRow, TractabilityVerdict,
};
pub use report::{AsymptReport, ReportRow};
pub use svf::{de_bruijn_numeric, l_tilde, DeBruijn, LTilde, SvfHandle};

use crate::dist::{dickman_quantile, normal_quantile, stable_quantile, DickmanLaw, StableLaw};
use crate::error::{Error, Result};
use crate::numeric::EULER_GAMMA;
use crate::spectra::{spectrum_stats, tail_mass_mid, truncated_moment, MarginalSpectrum};
use crate::tensor::check_eps;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum RegimeTag {
    Flat,
    Normal2Mom,
    NormalSv,
    Stable { alpha: f64 },
    SlowVar,
    DickmanProduct { beta: f64 },
}

/// Least-squares fit `ln T(x) = ln c − α ln x + p ln ln x`, i.e. `T(x) = x^{−α} φ(x)`
/// with `φ(x) = c (ln x)^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvfFit {
    pub alpha: f64,
    pub c: f64,
    pub log_power: f64,
    pub window: (f64, f64),
    /// Lower cutoff for `ℓ̃`: start of the available `x`-range.
    pub x0: f64,
    /// Root-mean-square residual of `ln T`.
    pub residual: f64,
    pub points: usize,
}

impl SvfFit {
    pub fn handle(&self) -> SvfHandle {
        SvfHandle::LogPower { c: self.c, p: self.log_power, x0: self.x0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    pub entropy: Option<f64>,
    pub deviation: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub svf: Option<SvfFit>,
}

impl Regime {
    fn bare(tag: RegimeTag) -> Self {
        Regime { tag, entropy: None, deviation: None, alpha: None, beta: None, svf: None }
    }

    /// Flat spectrum with `E = ln l`.
    pub fn flat(entropy: f64) -> Self {
        Regime { entropy: Some(entropy), deviation: Some(0.0), ..Self::bare(RegimeTag::Flat) }
    }

    pub fn normal_2mom(entropy: f64, deviation: f64) -> Result<Self> {
        if !(deviation > 0.0) || !entropy.is_finite() {
            return Err(Error::InvalidParameter(format!("normal regime needs sigma > 0, got {deviation}")));
        }
        Ok(Regime { entropy: Some(entropy), deviation: Some(deviation), ..Self::bare(RegimeTag::Normal2Mom) })
    }

    pub fn dickman_product(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("dickman beta = {beta}")));
        }
        Ok(Regime { beta: Some(beta), ..Self::bare(RegimeTag::DickmanProduct { beta }) })
    }

    /// Checks that the parameters required by the tag are present.
    pub fn validate(&self) -> Result<()> {
        let missing = |what: &str| Err(Error::InvalidParameter(format!("{:?} regime lacks {what}", self.tag)));
        match self.tag {
            RegimeTag::Flat if self.entropy.is_none() => missing("entropy"),
            RegimeTag::Normal2Mom if !(self.deviation.unwrap_or(0.0) > 0.0) || self.entropy.is_none() => {
                missing("sigma > 0 and entropy")
            }
            RegimeTag::NormalSv if self.svf.is_none() || self.entropy.is_none() => missing("fitted SVF and entropy"),
            RegimeTag::Stable { alpha } if self.svf.is_none() || (alpha > 1.0 + ALPHA_ONE_BAND && self.entropy.is_none()) => {
                missing("fitted SVF (and entropy for alpha > 1)")
            }
            RegimeTag::SlowVar if self.svf.is_none() => missing("fitted SVF"),
            RegimeTag::DickmanProduct { beta } if !(beta > 0.0) => missing("beta > 0"),
            _ => Ok(()),
        }
    }
}

/// Cutoffs for routing a tail fit. The limit trichotomy has no finite-data
/// boundary, so these are declared and reported alongside the residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    /// `|α − 2|` below this routes to the normal-SVF regime.
    pub normal_sv_band: f64,
    /// `α` below this routes to the slowly varying regime.
    pub slow_var_max: f64,
    /// Fits with `α` above this are rejected.
    pub alpha_max: f64,
    /// Largest accepted RMS residual of `ln T`.
    pub max_residual: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        RegimeThresholds { normal_sv_band: 0.1, slow_var_max: 0.05, alpha_max: 2.1, max_residual: 0.05 }
    }
}

/// Predictions treat `|α − 1|` below this as the `α = 1` case.
pub const ALPHA_ONE_BAND: f64 = 0.05;

/// Largest `x` probed when the spectrum carries an analytic tail.
const FIT_X_CAP: f64 = 1e8;
const FIT_POINTS: usize = 48;

/// Default window: middle two quartiles of `ln x` over the available range
/// `[max(e, −ln λ̄₁), x_end]`, where `x_end` is `−ln` of the last explicit weight, or
/// [`FIT_X_CAP`] when a tail model extends the spectrum.
pub fn default_fit_window(spec: &MarginalSpectrum) -> (f64, f64) {
    let (lo, hi) = available_range(spec);
    let (a, b) = (lo.ln(), hi.ln());
    ((a + 0.25 * (b - a)).exp(), (a + 0.75 * (b - a)).exp())
}

fn available_range(spec: &MarginalSpectrum) -> (f64, f64) {
    let lo = (-spec.weights[0].ln()).max(std::f64::consts::E);
    let hi = if spec.tail_model.is_some() { FIT_X_CAP } else { -spec.weights.last().unwrap().ln() };
    (lo, hi.max(lo))
}

/// Fits `T(x) = x^{−α} c (ln x)^p` on a log-spaced grid over `window`.
pub fn fit_tail(spec: &MarginalSpectrum, window: Option<(f64, f64)>) -> Result<SvfFit> {
    let window = window.unwrap_or_else(|| default_fit_window(spec));
    let (lo, hi) = window;
    if !(lo > 1.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("fit window ({lo}, {hi}) must satisfy 1 < lo < hi")));
    }
    let mut rows = Vec::with_capacity(FIT_POINTS);
    for i in 0..FIT_POINTS {
        let lx = lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (FIT_POINTS - 1) as f64;
        let t = tail_mass_mid(spec, lx.exp());
        if t > 0.0 && t.is_finite() {
            rows.push(([1.0, lx, lx.ln()], t.ln()));
        }
    }
    if rows.len() < 8 {
        return Err(Error::InconclusiveFit(f64::INFINITY));
    }
    let coef = least_squares(&rows);
    let rss: f64 = rows.iter().map(|(x, y)| (y - (coef[0] * x[0] + coef[1] * x[1] + coef[2] * x[2])).powi(2)).sum();
    Ok(SvfFit {
        alpha: -coef[1],
        c: coef[0].exp(),
        log_power: coef[2],
        window,
        x0: available_range(spec).0,
        residual: (rss / rows.len() as f64).sqrt(),
        points: rows.len(),
    })
}

/// Solves the 3×3 normal equations with centred regressors.
fn least_squares(rows: &[([f64; 3], f64)]) -> [f64; 3] {
    let n = rows.len() as f64;
    let m1 = rows.iter().map(|r| r.0[1]).sum::<f64>() / n;
    let m2 = rows.iter().map(|r| r.0[2]).sum::<f64>() / n;
    let my = rows.iter().map(|r| r.1).sum::<f64>() / n;
    let (mut s11, mut s12, mut s22, mut s1y, mut s2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in rows {
        let (a, b, c) = (x[1] - m1, x[2] - m2, y - my);
        s11 += a * a;
        s12 += a * b;
        s22 += b * b;
        s1y += a * c;
        s2y += b * c;
    }
    let det = s11 * s22 - s12 * s12;
    let (b1, b2) = if det.abs() > 1e-12 * s11 * s22 { ((s1y * s22 - s2y * s12) / det, (s2y * s11 - s1y * s12) / det) } else { (s1y / s11, 0.0) };
    [my - b1 * m1 - b2 * m2, b1, b2]
}

/// Routes a degree marginal: `σ = 0` gives `Flat`, a finite second log-moment
/// gives `Normal2Mom`, otherwise the tail fit decides.
pub fn classify_degree_regime(spec: &MarginalSpectrum, fit_window: Option<(f64, f64)>) -> Result<Regime> {
    classify_degree_regime_with(spec, fit_window, &RegimeThresholds::default())
}

pub fn classify_degree_regime_with(spec: &MarginalSpectrum, fit_window: Option<(f64, f64)>, th: &RegimeThresholds) -> Result<Regime> {
    spec.validate()?;
    let stats = spectrum_stats(spec);
    if stats.deviation == 0.0 {
        return Ok(Regime::flat(stats.entropy));
    }
    if stats.second_log_moment_finite && stats.deviation.is_finite() {
        return Regime::normal_2mom(stats.entropy, stats.deviation);
    }
    let fit = fit_tail(spec, fit_window)?;
    if fit.residual > th.max_residual || fit.alpha > th.alpha_max || !fit.alpha.is_finite() {
        return Err(Error::InconclusiveFit(fit.residual));
    }
    let entropy = stats.entropy.is_finite().then_some(stats.entropy);
    let tag = if (fit.alpha - 2.0).abs() < th.normal_sv_band {
        RegimeTag::NormalSv
    } else if fit.alpha < th.slow_var_max {
        RegimeTag::SlowVar
    } else {
        RegimeTag::Stable { alpha: fit.alpha }
    };
    let regime = Regime { tag, entropy, deviation: None, alpha: Some(fit.alpha), beta: None, svf: Some(fit) };
    regime.validate()?;
    Ok(regime)
}

/// Laws and data a prediction may need.
#[derive(Debug, Clone, Default)]
pub struct LawContext {
    pub dickman: Option<DickmanLaw>,
    /// Marginal spectrum, required by the `α = 1` centering.
    pub spectrum: Option<MarginalSpectrum>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// `ln n ≈ a_d + q b_d`.
    Ln,
    /// `ln ln n ≈ a_d + q b_d`.
    LnLn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub d: u64,
    pub eps: f64,
    pub a_d: f64,
    pub b_d: f64,
    pub q: f64,
    pub scale: Scale,
    pub ln_n: f64,
    pub regime: Regime,
    pub notes: Vec<String>,
}

impl Prediction {
    /// `ln ln n` when it is finite, useful in the slowly varying regime.
    pub fn ln_ln_n(&self) -> f64 {
        match self.scale {
            Scale::Ln => self.ln_n.ln(),
            Scale::LnLn => self.a_d + self.q * self.b_d,
        }
    }
}

fn stable_alpha(alpha: f64) -> f64 {
    if (alpha - 1.0).abs() < ALPHA_ONE_BAND {
        1.0
    } else {
        alpha
    }
}

/// `q(ε)` of the regime: `G^{−1}(1−ε²)` for the limit law `G`, `ln(1−ε²)` for flat
/// spectra and `|ln(1−ε²)|^{−1/s}` for the doubly logarithmic predictor.
pub fn quantile_q(regime: &Regime, eps: f64, ctx: &LawContext) -> Result<f64> {
    check_eps(eps)?;
    let level = 1.0 - eps * eps;
    match regime.tag {
        RegimeTag::Flat => Ok(level.ln()),
        RegimeTag::Normal2Mom | RegimeTag::NormalSv => normal_quantile(level),
        RegimeTag::Stable { alpha } => stable_quantile(&StableLaw::standard(stable_alpha(alpha), 1.0)?, level),
        RegimeTag::DickmanProduct { beta } => {
            let law = ctx.dickman.as_ref().ok_or(Error::MissingLaw("Dickman law"))?;
            if (law.beta - beta).abs() > 1e-12 {
                return Err(Error::MissingLaw("Dickman law with the regime's beta"));
            }
            dickman_quantile(law, level)
        }
        RegimeTag::SlowVar => {
            let s = slow_var_exponent(regime)?;
            Ok((-level.ln()).powf(-1.0 / s))
        }
    }
}

fn slow_var_exponent(regime: &Regime) -> Result<f64> {
    let fit = regime.svf.ok_or(Error::MissingLaw("fitted SVF"))?;
    if !(fit.log_power < 0.0) {
        return Err(Error::UnsupportedRegime(format!("slowly varying predictor needs c(ln x)^(-s) with s > 0, got power {}", fit.log_power)));
    }
    Ok(-fit.log_power)
}

/// `a*_d = d Σ |ln λ̄| λ̄ 1(λ̄ > e^{−b_d}) + (1 − γ_E) b_d`.
pub fn a_star_alpha1(spec: &MarginalSpectrum, d: u64, b_d: f64) -> f64 {
    d as f64 * truncated_moment(spec, 1, b_d, None) + (1.0 - EULER_GAMMA) * b_d
}

const DE_BRUIJN_TOL: f64 = 1e-12;

/// Evaluates the regime's predictor at `(d, ε)`.
pub fn predict_log_complexity(regime: &Regime, d: u64, eps: f64, ctx: &LawContext) -> Result<Prediction> {
    regime.validate()?;
    if d == 0 {
        return Err(Error::InvalidParameter("d must be at least 1".into()));
    }
    let q = quantile_q(regime, eps, ctx)?;
    let df = d as f64;
    let mut notes = Vec::new();
    let (a_d, b_d, scale) = match regime.tag {
        RegimeTag::Flat => {
            notes.push("closed form d ln l + ln(1-eps^2)".into());
            (df * regime.entropy.unwrap(), 1.0, Scale::Ln)
        }
        RegimeTag::Normal2Mom => (df * regime.entropy.unwrap(), regime.deviation.unwrap() * df.sqrt(), Scale::Ln),
        RegimeTag::NormalSv => {
            // b_d = √d φ₂(d), φ₂(d) = √2 (ℓ̃^{−1/2})^#(√d)
            let psi = regime.svf.unwrap().handle().l_tilde_handle().pow(-0.5);
            let conj = de_bruijn_numeric(&psi, df.sqrt(), DE_BRUIJN_TOL)?;
            notes.push(format!("de Bruijn residual {:.3e}", conj.fixed_point_residual));
            (df * regime.entropy.unwrap(), df.sqrt() * std::f64::consts::SQRT_2 * conj.value, Scale::Ln)
        }
        RegimeTag::Stable { alpha } => {
            let alpha = stable_alpha(alpha);
            // b_d = d^{1/α} φ_α(d), φ_α(d) = (φ^{−1/α})^#(d^{1/α})
            let x = df.powf(1.0 / alpha);
            let psi = regime.svf.unwrap().handle().pow(-1.0 / alpha);
            let conj = de_bruijn_numeric(&psi, x, DE_BRUIJN_TOL)?;
            let b = x * conj.value;
            let a = if alpha == 1.0 {
                notes.push("alpha treated as 1".into());
                let spec = ctx.spectrum.as_ref().ok_or(Error::MissingLaw("marginal spectrum for a*_d"))?;
                a_star_alpha1(spec, d, b)
            } else if alpha > 1.0 {
                df * regime.entropy.ok_or(Error::MissingLaw("finite entropy"))?
            } else {
                0.0
            };
            (a, b, Scale::Ln)
        }
        RegimeTag::DickmanProduct { .. } => (0.0, df.ln().max(1.0), Scale::Ln),
        RegimeTag::SlowVar => {
            // d φ(ln n) → |ln(1−ε²)| with φ = c (ln x)^{−s}
            let fit = regime.svf.unwrap();
            let s = slow_var_exponent(regime)?;
            notes.push("double-log predictor".into());
            (0.0, (fit.c * df).powf(1.0 / s), Scale::LnLn)
        }
    };
    let lin = a_d + q * b_d;
    let ln_n = match scale {
        Scale::Ln => lin,
        Scale::LnLn => lin.exp(),
    };
    Ok(Prediction { d, eps, a_d, b_d, q, scale, ln_n, regime: regime.clone(), notes })
}
