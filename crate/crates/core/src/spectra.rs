//! Marginal eigenvalue sequences: construction, normalization, summaries.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, integrate, integrate_to_inf, NeumaierSum};

/// Relative tolerance under which two normalized weights count as one eigenvalue
/// of higher multiplicity.
pub const MULTIPLICITY_RTOL: f64 = 1e-12;

/// Floating-point slack allowed on `sum(weights) ≤ 1`.
pub const SUM_SLACK: f64 = 1e-14;

/// Closed-form shape of the discarded indices `k > K`.
///
/// All methods work in `u = ln k` so that indices far beyond `2^53`
/// (reached by heavy-tailed shapes) stay representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum TailModel {
    /// `ω (2k−1)^{−s}`.
    Euler { s: f64, omega: f64 },
    /// `β k^{−p} (ln k)^{−1−r}`.
    RegVar { beta: f64, p: f64, r: f64 },
    /// `β / (k ln k (ln ln k)^{1+s})`.
    LogLog { beta: f64, s: f64 },
}

impl TailModel {
    /// `−ln f(e^u)`.
    pub fn neg_ln_weight(&self, u: f64) -> f64 {
        match *self {
            TailModel::Euler { s, omega } => -omega.ln() + s * ln_2k_minus_1(u),
            TailModel::RegVar { beta, p, r } => -beta.ln() + p * u + (1.0 + r) * u.ln(),
            TailModel::LogLog { beta, s } => -beta.ln() + u + u.ln() + (1.0 + s) * u.ln().ln(),
        }
    }

    pub fn weight(&self, k: f64) -> f64 {
        (-self.neg_ln_weight(k.ln())).exp()
    }

    /// Real `u = ln k` at which `−ln f(k) = y`; the shape is increasing in `u`.
    pub fn ln_index_at(&self, y: f64) -> f64 {
        if let TailModel::Euler { s, omega } = *self {
            let l = (y + omega.ln()) / s;
            return l - std::f64::consts::LN_2 + (-l).exp().ln_1p();
        }
        let mut lo = self.min_u();
        let mut hi = lo.max(1.0);
        while self.neg_ln_weight(hi) < y {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return f64::INFINITY;
            }
        }
        if self.neg_ln_weight(lo) >= y {
            return lo;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.neg_ln_weight(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Smallest `u` on which the shape is defined and decreasing.
    fn min_u(&self) -> f64 {
        match self {
            TailModel::Euler { .. } => 0.0,
            TailModel::RegVar { .. } => 3f64.ln(),
            TailModel::LogLog { .. } => 16f64.ln(),
        }
    }

    /// `∫_{e^u}^∞ f(t) dt`.
    pub fn integral_from(&self, u: f64) -> f64 {
        match *self {
            TailModel::Euler { s, omega } => omega * ((1.0 - s) * ln_2k_minus_1(u)).exp() / (2.0 * (s - 1.0)),
            TailModel::RegVar { beta, p, r } => {
                if p == 1.0 {
                    beta / (r * u.powf(r))
                } else {
                    let f = |v: f64| beta * ((1.0 - p) * v - (1.0 + r) * v.ln()).exp();
                    let scale = f(u) / (p - 1.0);
                    integrate_to_inf(f, u, 1e-13 * scale.max(1e-300), 400).value
                }
            }
            TailModel::LogLog { beta, s } => beta / (s * u.ln().powf(s)),
        }
    }

    /// `∫_{e^{u1}}^{e^{u2}} f(t) dt` for `u1 ≤ u2`.
    pub fn integral_between(&self, u1: f64, u2: f64) -> f64 {
        if u2 <= u1 {
            return 0.0;
        }
        if let TailModel::RegVar { beta, p, r } = *self {
            if p != 1.0 {
                let f = |v: f64| beta * ((1.0 - p) * v - (1.0 + r) * v.ln()).exp();
                let scale = f(u1) * (u2 - u1);
                return integrate(f, u1, u2, 1e-13 * scale.max(1e-300), 400).value;
            }
        }
        if u2.is_infinite() {
            return self.integral_from(u1);
        }
        (self.integral_from(u1) - self.integral_from(u2)).max(0.0)
    }

    /// Bounds on `Σ_{k=a+1}^{b} f(k)` for integer-valued `ln`-indices
    /// `ua = ln a`, `ub = ln b` (`b` may be infinite). Uses `∫_{k}^{k+1} f ≤ f(k) ≤ ∫_{k−1}^{k} f`;
    /// indices beyond 2^52 are treated as continuous.
    pub fn sum_bounds(&self, ua: f64, ub: f64) -> (f64, f64) {
        if ub <= ua {
            return (0.0, 0.0);
        }
        const BIG: f64 = 4.5e15;
        let (a, b) = (ua.exp(), ub.exp());
        if b < BIG {
            let (a, b) = (a.floor(), b.floor());
            if b <= a {
                return (0.0, 0.0);
            }
            let lo = self.integral_between((a + 1.0).ln(), (b + 1.0).ln());
            let hi = self.integral_between(a.ln(), b.ln());
            (lo, hi)
        } else if a < BIG {
            let a = a.floor();
            let lo = self.integral_between((a + 1.0).ln(), ub);
            let hi = self.integral_between(a.ln(), ub);
            (lo, hi)
        } else {
            let v = self.integral_between(ua, ub);
            (v * (1.0 - 1e-12), v * (1.0 + 1e-12))
        }
    }

    /// `∫ |ln f|^p f dt` over `t ∈ [e^{u1}, e^{u2}]`, evaluated in `u`.
    pub fn log_moment_between(&self, p: i32, u1: f64, u2: f64) -> f64 {
        if u2 <= u1 {
            return 0.0;
        }
        let g = |u: f64| {
            let y = self.neg_ln_weight(u);
            y.powi(p) * (u - y).exp()
        };
        let scale = g(u1).max(1e-300);
        if u2.is_infinite() {
            integrate_to_inf(g, u1, 1e-13 * scale, 2000).value
        } else {
            integrate(g, u1, u2, 1e-13 * scale * (u2 - u1).max(1.0), 2000).value
        }
    }

    /// Whether `Σ |ln f(k)|^p f(k)` converges.
    pub fn log_moment_finite(&self, p: i32) -> bool {
        match *self {
            TailModel::Euler { .. } => true,
            TailModel::RegVar { p: pw, r, .. } => pw > 1.0 || r > p as f64,
            TailModel::LogLog { .. } => false,
        }
    }
}

/// `ln(2e^u − 1)` without overflow.
fn ln_2k_minus_1(u: f64) -> f64 {
    u + (2.0 - (-u).exp()).ln()
}

/// Sorted, normalized eigenvalue sequence with a certified bound on the discarded mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSpectrum {
    pub label: String,
    pub weights: Vec<f64>,
    pub tail_bound: f64,
    #[serde(default = "one")]
    pub trace: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_model: Option<TailModel>,
}

fn one() -> f64 {
    1.0
}

/// Entropy and deviation of `|ln λ̄|` under the eigenvalue distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumStats {
    pub entropy: f64,
    pub deviation: f64,
    pub second_log_moment_finite: bool,
    /// Estimated contribution of the discarded indices to `Σ |ln λ̄|² λ̄`.
    pub second_moment_residual: f64,
}

/// Atom of the law of `U = |ln λ̄|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: f64,
    pub mass: f64,
    pub multiplicity: u64,
}

/// Law of `U_j`: atoms in increasing position plus a defect located in `[defect_from, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicDistribution {
    pub atoms: Vec<Atom>,
    pub defect: f64,
    pub defect_from: f64,
}

impl AtomicDistribution {
    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.mass))
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.position * a.mass))
    }
}

impl MarginalSpectrum {
    /// Checks positivity, monotonicity and mass closure.
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        if w.is_empty() {
            return Err(Error::EmptySpectrum);
        }
        for (i, &x) in w.iter().enumerate() {
            if !(x > 0.0) || !x.is_finite() {
                return Err(if x < 0.0 {
                    Error::NegativeEigenvalue(x)
                } else {
                    Error::InvalidParameter(format!("weight {i} is {x}"))
                });
            }
            if i > 0 && x > w[i - 1] {
                return Err(Error::InvalidParameter(format!("weights not sorted at index {i}")));
            }
        }
        if !(self.tail_bound >= 0.0) {
            return Err(Error::InvalidParameter("negative tail bound".into()));
        }
        let s = self.sum();
        if s > 1.0 + SUM_SLACK {
            return Err(Error::InvalidParameter(format!("weights sum to {s} > 1")));
        }
        let closure = s + self.tail_bound;
        if !(closure >= 1.0 - SUM_SLACK && closure <= 1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!("sum + tail = {closure}")));
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// The two-atom spectrum `(a, 1−a)`.
    pub fn two_atom(a: f64) -> Result<Self> {
        if !(a > 0.5 && a < 1.0) {
            return Err(Error::InvalidAtom(a));
        }
        let mut s = Self::from_normalized(vec![a, 1.0 - a], 0.0, format!("two_atom({a})"))?;
        s.tail_model = None;
        Ok(s)
    }

    /// `l` equal weights `1/l`.
    pub fn flat(l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::EmptySpectrum);
        }
        Self::from_normalized(vec![1.0 / l as f64; l], 0.0, format!("flat({l})"))
    }

    /// Wraps already-normalized weights, absorbing rounding into the tail bound.
    pub fn from_normalized(weights: Vec<f64>, tail_bound: f64, label: String) -> Result<Self> {
        let s = compensated_sum(weights.iter().copied());
        let tail_bound = tail_bound.max(1.0 - s).max(0.0);
        let spec = MarginalSpectrum { label, weights, tail_bound, trace: 1.0, tail_model: None };
        spec.validate()?;
        Ok(spec)
    }

    /// Index (0-based) of the first weight strictly below `e^{−x}`.
    fn first_below(&self, x: f64) -> usize {
        let thr = (-x).exp();
        self.weights.partition_point(|&w| w >= thr)
    }
}

/// Euler integrated process eigenvalues `ω_r (2k−1)^{−(2r+2)}`, `k ≤ K`.
pub fn euler_spectrum(r: f64, k: usize) -> Result<MarginalSpectrum> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("r = {r}")));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    let s = 2.0 * r + 2.0;
    let head: Vec<f64> = (1..=k).map(|i| ((2 * i - 1) as f64).powf(-s)).collect();
    let head_sum = compensated_sum(head.iter().copied());
    let rem = odd_power_remainder(s, k);
    let omega = 1.0 / (head_sum + rem);
    let weights: Vec<f64> = head.iter().map(|&x| x * omega).collect();
    let sum = compensated_sum(weights.iter().copied());
    let tail = (rem * omega).max(1.0 - sum).max(0.0);
    let integral_bound = omega * ((2 * k - 1) as f64).powf(1.0 - s) / (2.0 * (s - 1.0));
    debug_assert!(rem * omega <= integral_bound * (1.0 + 1e-12));
    let spec = MarginalSpectrum {
        label: format!("euler(r={r},K={k})"),
        weights,
        tail_bound: tail,
        trace: 1.0,
        tail_model: Some(TailModel::Euler { s, omega }),
    };
    spec.validate()?;
    Ok(spec)
}

/// Smoothness index with `3^{−2r_j−2} = min(1/9, β/((j+1)(ln(j+1))^p))`, `j ≥ 1`.
pub fn euler_family_r(beta: f64, p: f64, j: usize) -> f64 {
    let x = (j + 1) as f64;
    let t = (beta / (x * x.ln().powf(p))).min(1.0 / 9.0);
    ((-t.ln()) / 3f64.ln() - 2.0) / 2.0
}

/// First `d` marginals of the Euler product family with `r_j` from [`euler_family_r`].
/// Each marginal is truncated once its discarded mass is below `tail_tol`, or at `k_max`.
pub fn euler_family(beta: f64, p: f64, d: usize, tail_tol: f64, k_max: usize) -> Result<Vec<MarginalSpectrum>> {
    if !(beta > 0.0) || !(tail_tol > 0.0) || k_max == 0 {
        return Err(Error::InvalidParameter(format!("euler family beta={beta}, tail_tol={tail_tol}")));
    }
    (1..=d)
        .map(|j| {
            let r = euler_family_r(beta, p, j);
            let s = 2.0 * r + 2.0;
            // ω ≤ 1, so this K over-covers the requested tolerance.
            let odd = (2.0 * (s - 1.0) * tail_tol).powf(-1.0 / (s - 1.0));
            let k = ((odd - 1.0) / 2.0).ceil().clamp(1.0, k_max as f64) as usize;
            let mut spec = euler_spectrum(r, k)?;
            spec.label = format!("euler(j={j},r={r:.6},K={k})");
            Ok(spec)
        })
        .collect()
}

/// `Σ_{k>K} (2k−1)^{−s}` by Euler–Maclaurin from a start index of at least 20.
fn odd_power_remainder(s: f64, k: usize) -> f64 {
    let m = (k + 1).max(20);
    let mut acc = NeumaierSum::new();
    for i in (k + 1)..m {
        acc.add(((2 * i - 1) as f64).powf(-s));
    }
    let t = (2 * m - 1) as f64;
    acc.add(t.powf(1.0 - s) / (2.0 * (s - 1.0)));
    acc.add(0.5 * t.powf(-s));
    // −Σ B_{2j}/(2j)! f^{(2j−1)}(m),  f^{(n)} = (−2)^n (s)_n t^{−s−n}
    const B: [f64; 4] = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0];
    let mut fact = 1.0;
    for (j, b) in B.iter().enumerate() {
        let n = 2 * j + 1;
        let rising: f64 = (0..n).map(|i| s + i as f64).product();
        fact *= ((2 * j + 1) * (2 * j + 2)) as f64;
        let deriv = -(2f64.powi(n as i32)) * rising * t.powf(-s - n as f64);
        acc.add(-b / fact * deriv);
    }
    acc.value()
}

fn shaped_spectrum(model: TailModel, k0: usize, k: usize, label: String) -> Result<MarginalSpectrum> {
    if k < k0 {
        return Err(Error::InvalidParameter(format!("K must be at least {k0}")));
    }
    let shape: Vec<f64> = (k0..=k).map(|i| model.weight(i as f64)).collect();
    if shape.windows(2).any(|w| w[1] > w[0]) || shape.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("tail shape is not decreasing from k0".into()));
    }
    let midpoint_ok = match model {
        TailModel::RegVar { r, .. } => r > -1.0,
        _ => true,
    };
    let from = if midpoint_ok { k as f64 + 0.5 } else { k as f64 };
    let tail = model.integral_from(from.ln());
    let shape_sum = compensated_sum(shape.iter().copied());
    let head_mass = 1.0 - shape_sum - tail;
    let head_each = head_mass / (k0 - 1) as f64;
    if !(head_mass > 0.0) || head_each < shape[0] {
        return Err(Error::InfeasibleBeta { head_mass });
    }
    let mut weights = vec![head_each; k0 - 1];
    weights.extend(shape);
    let sum = compensated_sum(weights.iter().copied());
    let spec = MarginalSpectrum {
        label,
        weights,
        tail_bound: tail.max(1.0 - sum).max(0.0),
        trace: 1.0,
        tail_model: Some(model),
    };
    spec.validate()?;
    Ok(spec)
}

/// Regularly varying tail `β/(k^p (ln k)^{1+r})` for `k ≥ 3`, uniform head.
pub fn regvar_spectrum(beta: f64, p: f64, r: f64, k: usize) -> Result<MarginalSpectrum> {
    if !(beta > 0.0) || !(p > 1.0 || (p == 1.0 && r > 0.0)) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("regvar(beta={beta}, p={p}, r={r})")));
    }
    shaped_spectrum(TailModel::RegVar { beta, p, r }, 3, k, format!("regvar(beta={beta},p={p},r={r},K={k})"))
}

/// Doubly logarithmic tail `β/(k ln k (ln ln k)^{1+s})` for `k ≥ 16`, uniform head.
pub fn loglog_spectrum(beta: f64, s: f64, k: usize) -> Result<MarginalSpectrum> {
    if !(beta > 0.0 && s > 0.0) {
        return Err(Error::InvalidParameter(format!("loglog(beta={beta}, s={s})")));
    }
    shaped_spectrum(TailModel::LogLog { beta, s }, 16, k, format!("loglog(beta={beta},s={s},K={k})"))
}

/// Sorts raw eigenvalues and divides by `Σ raw + tail_bound_raw`. Zero eigenvalues are dropped.
pub fn normalize(raw: &[f64], tail_bound_raw: f64) -> Result<MarginalSpectrum> {
    if let Some(&x) = raw.iter().find(|x| **x < 0.0) {
        return Err(Error::NegativeEigenvalue(x));
    }
    if raw.iter().any(|x| !x.is_finite()) || !(tail_bound_raw >= 0.0) || !tail_bound_raw.is_finite() {
        return Err(Error::InvalidParameter("non-finite eigenvalue or tail".into()));
    }
    let mut w: Vec<f64> = raw.iter().copied().filter(|&x| x > 0.0).collect();
    if w.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    w.sort_by(|a, b| b.total_cmp(a));
    let total = compensated_sum(w.iter().copied()) + tail_bound_raw;
    let weights: Vec<f64> = w.iter().map(|x| x / total).collect();
    let mut spec = MarginalSpectrum::from_normalized(weights, tail_bound_raw / total, "data".into())?;
    spec.trace = total;
    Ok(spec)
}

fn all_equal(w: &[f64]) -> bool {
    let first = w[0];
    w.iter().all(|&x| (x - first).abs() <= MULTIPLICITY_RTOL * first)
}

/// Entropy `E = Σ |ln λ̄| λ̄` and deviation `σ`, including the modeled tail when present.
pub fn spectrum_stats(spec: &MarginalSpectrum) -> SpectrumStats {
    let w = &spec.weights;
    if all_equal(w) && spec.tail_bound < 1e-12 {
        let e = compensated_sum(w.iter().map(|&x| -x.ln() * x));
        return SpectrumStats { entropy: e, deviation: 0.0, second_log_moment_finite: true, second_moment_residual: 0.0 };
    }
    let mut m1: NeumaierSum = w.iter().map(|&x| -x.ln() * x).collect();
    let mut m2: NeumaierSum = w.iter().map(|&x| x.ln() * x.ln() * x).collect();
    let (finite1, finite2, residual) = match spec.tail_model {
        Some(model) => {
            let u0 = (w.len() as f64 + 0.5).ln();
            let f1 = model.log_moment_finite(1);
            let f2 = model.log_moment_finite(2);
            if f1 {
                m1.add(model.log_moment_between(1, u0, f64::INFINITY));
            }
            let res = if f2 { model.log_moment_between(2, u0, f64::INFINITY) } else { f64::INFINITY };
            if f2 {
                m2.add(res);
            }
            (f1, f2, res)
        }
        None => {
            // Lower estimate: discarded mass sits just below the last explicit weight.
            let last = *w.last().unwrap();
            (true, true, spec.tail_bound * last.ln() * last.ln())
        }
    };
    let e = if finite1 { m1.value() } else { f64::INFINITY };
    let dev = if finite2 && finite1 { (m2.value() - e * e).max(0.0).sqrt() } else { f64::INFINITY };
    SpectrumStats { entropy: e, deviation: dev, second_log_moment_finite: finite2, second_moment_residual: residual }
}

/// Bracket on `T(x) = Σ λ̄_k 1(λ̄_k < e^{−x})`.
pub fn tail_mass(spec: &MarginalSpectrum, x: f64) -> (f64, f64) {
    let i = spec.first_below(x);
    let computed = compensated_sum(spec.weights[i..].iter().copied());
    match spec.tail_model {
        Some(model) => {
            let (lo, hi) = model_tail_mass(spec, &model, x);
            (computed + lo, computed + hi.min(spec.tail_bound))
        }
        None => (computed, computed + spec.tail_bound),
    }
}

/// Midpoint of the `tail_mass` bracket.
pub fn tail_mass_mid(spec: &MarginalSpectrum, x: f64) -> f64 {
    let (lo, hi) = tail_mass(spec, x);
    0.5 * (lo + hi)
}

/// Bounds on `Σ_{k>K, f(k)<e^{−x}} f(k)` for the modeled tail.
fn model_tail_mass(spec: &MarginalSpectrum, model: &TailModel, x: f64) -> (f64, f64) {
    let kk = spec.weights.len() as f64;
    let ux = model.ln_index_at(x);
    // indices k > max(K, k_x) have f(k) < e^{−x}; f(k_x) = e^{−x} exactly is excluded.
    let start = if ux.exp() < 4.5e15 { ux.exp().floor().max(kk).ln() } else { ux.max(kk.ln()) };
    let (lo, hi) = model.sum_bounds(start, f64::INFINITY);
    (lo, hi)
}

/// `M_{p,N}(x) = Σ_{k≤N} |ln λ̄_k|^p λ̄_k 1(λ̄_k ≥ e^{−x})`; `n = None` means `N = ∞`.
/// Indices beyond the explicit weights contribute through the tail model (midpoint integral).
pub fn truncated_moment(spec: &MarginalSpectrum, p: i32, x: f64, n: Option<usize>) -> f64 {
    let i = spec.first_below(x);
    let upto = n.map_or(i, |n| n.min(i));
    let mut acc: NeumaierSum = spec.weights[..upto].iter().map(|&w| (-w.ln()).powi(p) * w).collect();
    if let Some(model) = spec.tail_model {
        let k = spec.weights.len();
        if i == k && n.map_or(true, |n| n > k) {
            let ux = model.ln_index_at(x);
            let mut ulim = if ux.exp() < 4.5e15 { (ux.exp().floor() + 0.5).ln() } else { ux };
            if let Some(n) = n {
                ulim = ulim.min((n as f64 + 0.5).ln());
            }
            let u0 = (k as f64 + 0.5).ln();
            if ulim > u0 {
                acc.add(model.log_moment_between(p, u0, ulim));
            }
        }
    }
    acc.value()
}

/// Law of `U = |ln λ̄|` with multiplicity-aggregated atoms.
pub fn u_distribution(spec: &MarginalSpectrum) -> AtomicDistribution {
    let mut atoms: Vec<Atom> = Vec::new();
    let mut i = 0;
    let w = &spec.weights;
    while i < w.len() {
        let rep = w[i];
        let mut j = i;
        let mut mass = NeumaierSum::new();
        while j < w.len() && (rep - w[j]).abs() <= MULTIPLICITY_RTOL * rep {
            mass.add(w[j]);
            j += 1;
        }
        atoms.push(Atom { position: -rep.ln(), mass: mass.value(), multiplicity: (j - i) as u64 });
        i = j;
    }
    let defect_from = -w.last().unwrap().ln();
    AtomicDistribution { atoms, defect: spec.tail_bound, defect_from }
}

impl MarginalSpectrum {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: MarginalSpectrum = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let mut s = String::new();
        std::fs::File::open(path)?.read_to_string(&mut s)?;
        Self::from_json(&s)
    }

    /// CSV with header `k,lambda_bar`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["k", "lambda_bar"])?;
        for (i, x) in self.weights.iter().enumerate() {
            wr.write_record([(i + 1).to_string(), format!("{x:e}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads `k,lambda_bar` rows and renormalizes them (no tail).
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut raw = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let v: f64 = rec
                .get(1)
                .ok_or_else(|| Error::Parse("missing lambda_bar column".into()))?
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("{e}")))?;
            raw.push(v);
        }
        normalize(&raw, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn euler_wiener_weights() {
        let s = euler_spectrum(0.0, 1000).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        assert!(close(s.weights[0], 8.0 / pi2, 1e-15));
        assert!(close(s.weights[1], s.weights[0] / 9.0, 1e-16));
        assert!(close(s.weights[1], 0.090063, 1e-6));
        // remainder of Σ(2k−1)^{−2} beyond 1000 is about 1/(4·1000)
        assert!(close(s.tail_bound, 8.0 / pi2 / 4000.0, 1e-7));
    }

    #[test]
    fn euler_large_r_concentrates() {
        let s = euler_spectrum(40.0, 10).unwrap();
        assert!(close(s.weights[0], 1.0, 1e-15));
        assert!(s.tail_bound < 1e-30);
    }

    #[test]
    fn euler_ratios_exact() {
        let s = euler_spectrum(1.0, 50).unwrap();
        for k in 1..=50usize {
            let ratio = s.weights[k - 1] / s.weights[0];
            let expect = ((2 * k - 1) as f64).powi(-4);
            assert!(((ratio - expect) / expect).abs() < 1e-14);
        }
    }

    #[test]
    fn small_k_closure() {
        for r in [0.0, 0.5, 3.0] {
            let s = euler_spectrum(r, 1).unwrap();
            let c = s.sum() + s.tail_bound;
            assert!((1.0..=1.0 + 1e-12).contains(&c), "{c}");
        }
    }

    #[test]
    fn normalize_examples() {
        let s = normalize(&[2.0, 1.0, 1.0], 0.0).unwrap();
        assert_eq!(s.weights, vec![0.5, 0.25, 0.25]);
        assert_eq!(s.trace, 4.0);
        assert_eq!(normalize(&[5.0], 0.0).unwrap().weights, vec![1.0]);
        let flat = normalize(&[1.0; 4], 0.0).unwrap();
        assert_eq!(spectrum_stats(&flat).deviation, 0.0);
        assert_eq!(normalize(&[], 0.0), Err(Error::EmptySpectrum));
        assert!(matches!(normalize(&[1.0, -0.5], 0.0), Err(Error::NegativeEigenvalue(_))));
    }

    #[test]
    fn stats_examples() {
        let s = spectrum_stats(&normalize(&[0.5, 0.5], 0.0).unwrap());
        assert!(close(s.entropy, 2f64.ln(), 1e-15));
        assert_eq!(s.deviation, 0.0);
        let s = spectrum_stats(&normalize(&[0.7, 0.3], 0.0).unwrap());
        assert!(close(s.entropy, 0.610864, 1e-6));
        assert!(close(s.deviation, 0.388280, 1e-6));
        let s = spectrum_stats(&normalize(&[1.0], 0.0).unwrap());
        assert_eq!((s.entropy, s.deviation), (0.0, 0.0));
    }

    #[test]
    fn tail_mass_examples() {
        let s = normalize(&[0.7, 0.3], 0.0).unwrap();
        // every weight is below e^0 = 1, so T(0) = P(U > 0) = 1
        assert_eq!(tail_mass(&s, 0.0), (1.0, 1.0));
        assert_eq!(tail_mass(&s, 0.5), (0.3, 0.3));
    }

    #[test]
    fn truncated_moment_examples() {
        let s = normalize(&[0.5, 0.5], 0.0).unwrap();
        assert!(close(truncated_moment(&s, 1, 1.0, None), 2f64.ln(), 1e-15));
        let s = normalize(&[0.7, 0.3], 0.0).unwrap();
        // only 0.7 clears e^{-0.5}; 0.7·(ln 0.7)² = 0.0890519…
        let oracle = 0.7 * 0.7f64.ln() * 0.7f64.ln();
        assert!(close(truncated_moment(&s, 2, 0.5, None), oracle, 1e-15));
        assert!(close(oracle, 0.0890519, 1e-7));
        assert_eq!(truncated_moment(&s, 1, 0.0, None), 0.0);
    }

    #[test]
    fn u_distribution_examples() {
        let u = u_distribution(&normalize(&[0.5, 0.5], 0.0).unwrap());
        assert_eq!(u.atoms.len(), 1);
        assert!(close(u.atoms[0].position, 2f64.ln(), 1e-15));
        assert!(close(u.atoms[0].mass, 1.0, 1e-15));
        assert_eq!(u.atoms[0].multiplicity, 2);
        let u = u_distribution(&normalize(&[1.0], 0.0).unwrap());
        assert_eq!(u.atoms[0].position, 0.0);
        let u = u_distribution(&normalize(&[0.7, 0.3], 0.0).unwrap());
        assert!(close(u.atoms[0].position, 0.356675, 1e-6));
        assert!(close(u.atoms[1].position, 1.203973, 1e-6));
    }

    #[test]
    fn regvar_and_loglog_feasibility() {
        let s = regvar_spectrum(0.1, 2.0, 0.0, 10_000).unwrap();
        let c = s.sum() + s.tail_bound;
        assert!((1.0..=1.0 + 1e-12).contains(&c));
        assert!(matches!(regvar_spectrum(10.0, 1.0, 0.5, 100), Err(Error::InfeasibleBeta { .. })));
        assert!(loglog_spectrum(0.05, 1.0, 1_000_000).is_ok());
        assert!(matches!(loglog_spectrum(100.0, 1.0, 100), Err(Error::InfeasibleBeta { .. })));
    }

    #[test]
    fn json_and_csv_round_trip() {
        let s = euler_spectrum(1.0, 20).unwrap();
        let back = MarginalSpectrum::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        let t = normalize(&[3.0, 2.0, 1.0], 0.0).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k,lambda_bar\n"));
        let back = MarginalSpectrum::read_csv(&buf[..]).unwrap();
        for (a, b) in back.weights.iter().zip(&t.weights) {
            assert!(close(*a, *b, 1e-15));
        }
    }
}
