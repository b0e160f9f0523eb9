use serde::{Deserialize, Serialize};

use super::svf::SvfHandle;
use crate::dist::LevyTriplet;
use crate::error::Result;
use crate::numeric::{integrate_to_inf, ln_plus, NeumaierSum};
use crate::spectra::{tail_mass_mid, truncated_moment, MarginalSpectrum};
use crate::tensor::check_eps;

/// Label attached to every finite-d criterion report.
pub const EVIDENCE_LABEL: &str = "diagnostic evidence at finite d";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbcRow {
    pub point: f64,
    pub lhs: f64,
    pub rhs: f64,
}

/// Finite-d evaluation of the limit conditions (A), (B), (C) against a target triplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbcReport {
    pub d: usize,
    pub a_d: f64,
    pub b_d: f64,
    pub n: Option<usize>,
    pub rows_a: Vec<AbcRow>,
    pub rows_b: Vec<AbcRow>,
    /// (C) at each `τ` against `σ² + ∫_{0<|x|<τ} x² dL`, whose `τ → 0` limit is `σ²`.
    pub rows_c: Vec<AbcRow>,
    pub residual_a: f64,
    pub residual_b: f64,
    pub residual_c: f64,
    /// `|(C) − σ²|` at the smallest `τ` of the grid.
    pub c_at_smallest_tau: f64,
    /// `Σ_j Σ_{k>N} λ̄`: finite-d proxy for the summability required of `N`.
    pub mass_beyond_n: f64,
    pub label: String,
}

/// Weights `λ̄_k`, `k ≤ n`, including modeled indices past the explicit ones.
fn head_weights(spec: &MarginalSpectrum, n: usize) -> Vec<f64> {
    let k = spec.weights.len();
    let mut w: Vec<f64> = spec.weights[..n.min(k)].to_vec();
    if let Some(model) = spec.tail_model {
        w.extend((k + 1..=n.min(k + 1_000_000)).map(|i| model.weight(i as f64)));
    }
    w
}

/// `(M_{1,N}(x), M_{2,N}(x))` for one marginal.
fn moments(spec: &MarginalSpectrum, x: f64, n: Option<usize>) -> (f64, f64) {
    match n {
        None => (truncated_moment(spec, 1, x, None), truncated_moment(spec, 2, x, None)),
        Some(n) => {
            let (mut m1, mut m2) = (NeumaierSum::new(), NeumaierSum::new());
            let thr = (-x).exp();
            for w in head_weights(spec, n) {
                if w >= thr {
                    let l = -w.ln();
                    m1.add(l * w);
                    m2.add(l * l * w);
                }
            }
            (m1.value(), m2.value())
        }
    }
}

fn small_mass(spec: &MarginalSpectrum, x: f64, n: Option<usize>) -> f64 {
    match n {
        None => tail_mass_mid(spec, x),
        Some(n) => {
            let thr = (-x).exp();
            head_weights(spec, n).into_iter().filter(|&w| w < thr).sum()
        }
    }
}

/// Evaluates (A) on `x_grid` and (B), (C) on `tau_grid` for the marginals at hand
/// (`d = marginals.len()`), reporting the largest absolute residual of each.
pub fn check_conditions_abc(
    marginals: &[MarginalSpectrum],
    a_d: f64,
    b_d: f64,
    target: &LevyTriplet,
    n: Option<usize>,
    tau_grid: &[f64],
    x_grid: &[f64],
) -> AbcReport {
    let rows_a: Vec<AbcRow> = x_grid
        .iter()
        .map(|&x| {
            let lhs: NeumaierSum = marginals.iter().map(|m| small_mass(m, x * b_d, n)).collect();
            AbcRow { point: x, lhs: lhs.value(), rhs: -target.levy_l.eval(x) }
        })
        .collect();
    let mut rows_b = Vec::with_capacity(tau_grid.len());
    let mut rows_c = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let (mut s1, mut var) = (NeumaierSum::new(), NeumaierSum::new());
        for m in marginals {
            let (m1, m2) = moments(m, tau * b_d, n);
            s1.add(m1);
            var.add(m2 - m1 * m1);
        }
        rows_b.push(AbcRow { point: tau, lhs: (s1.value() - a_d) / b_d, rhs: target.centering_rhs(tau) });
        rows_c.push(AbcRow { point: tau, lhs: var.value() / (b_d * b_d), rhs: target.truncated_variance(tau) });
    }
    let worst = |rows: &[AbcRow]| rows.iter().map(|r| (r.lhs - r.rhs).abs()).fold(0.0, f64::max);
    let c_at_smallest_tau = tau_grid
        .iter()
        .zip(&rows_c)
        .min_by(|a, b| a.0.total_cmp(b.0))
        .map_or(0.0, |(_, r)| (r.lhs - target.sigma2).abs());
    let mass_beyond_n = match n {
        None => 0.0,
        Some(n) => marginals.iter().map(|m| (1.0 - head_weights(m, n).iter().sum::<f64>()).max(0.0)).sum(),
    };
    AbcReport {
        d: marginals.len(),
        a_d,
        b_d,
        n,
        residual_a: worst(&rows_a),
        residual_b: worst(&rows_b),
        residual_c: worst(&rows_c),
        rows_a,
        rows_b,
        rows_c,
        c_at_smallest_tau,
        mass_beyond_n,
        label: EVIDENCE_LABEL.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthTag {
    Converging,
    DivergingLog,
    DivergingLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub d: usize,
    /// `Σ_{j≤d} Σ_{k≥2} λ_k/λ_1`.
    pub partial_sum: f64,
    /// Partial sums at `d, d/10, d/100, …`, ascending.
    pub checkpoints: Vec<(usize, f64)>,
    /// Fitted `γ` in `Δ_m ∼ m^{−γ}` for the per-decade increments `Δ_m`.
    pub decay_exponent: Option<f64>,
    pub growth: GrowthTag,
    pub label: String,
}

/// Partial sums of `Σ_{k≥2} λ_k/λ_1 = 1/λ̄_1 − 1` with a growth tag:
/// a last-decade ratio of at least 5 is linear, per-decade increments decaying like
/// `m^{−γ}` with `γ ≤ 1.5` are logarithmic, anything faster converges.
pub fn boundedness_diagnostic(marginals: &[MarginalSpectrum]) -> BoundednessReport {
    let d = marginals.len();
    let mut cum = Vec::with_capacity(d);
    let mut acc = NeumaierSum::new();
    for m in marginals {
        let l1 = m.weights[0];
        acc.add((1.0 - l1) / l1);
        cum.push(acc.value());
    }
    let mut points = Vec::new();
    let mut c = d;
    while c >= 1 {
        points.push((c, cum[c - 1]));
        c /= 10;
    }
    points.reverse();
    let partial_sum = cum.last().copied().unwrap_or(0.0);
    let mut decay_exponent = None;
    let growth = if points.len() >= 2 && points[points.len() - 2].1 > 0.0 && partial_sum / points[points.len() - 2].1 >= 5.0 {
        GrowthTag::DivergingLinear
    } else {
        let incs: Vec<(f64, f64)> = points
            .windows(2)
            .map(|w| ((w[1].0 as f64).log10(), w[1].1 - w[0].1))
            .filter(|&(m, _)| m >= 1.0)
            .collect();
        let recent: Vec<(f64, f64)> = incs.iter().rev().take(4).rev().copied().collect();
        if recent.len() < 2 || recent.last().unwrap().1 <= 1e-12 * partial_sum {
            GrowthTag::Converging
        } else if recent.iter().any(|&(_, v)| v <= 0.0) {
            GrowthTag::Converging
        } else {
            let xs: Vec<f64> = recent.iter().map(|&(m, _)| m.ln()).collect();
            let ys: Vec<f64> = recent.iter().map(|&(_, v)| v.ln()).collect();
            let n = xs.len() as f64;
            let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            let gamma = -sxy / sxx;
            decay_exponent = Some(gamma);
            if gamma <= 1.5 {
                GrowthTag::DivergingLog
            } else {
                GrowthTag::Converging
            }
        }
    };
    BoundednessReport { d, partial_sum, checkpoints: points, decay_exponent, growth, label: EVIDENCE_LABEL.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TractabilityVerdict {
    Intractable,
    Weak,
    QuasiPolynomial,
    StrongPolynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractabilityRow {
    pub d: usize,
    pub r: f64,
    /// `(1/ln₊d) Σ_{j≤d} (r_j+1) 3^{−2r_j−2}`.
    pub qpt_statistic: f64,
    /// `Σ_{j≤d} 3^{−2τ(r_j+1)}` per `τ` of the grid.
    pub spt_sums: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractabilityReport {
    pub d_max: usize,
    pub tau_grid: Vec<f64>,
    pub rows: Vec<TractabilityRow>,
    /// `r_{d_max} − r_{⌈d_max/10⌉}`.
    pub r_growth: f64,
    pub qpt_sup: f64,
    /// `qpt(d_max)/qpt(d_max/10)`.
    pub qpt_last_decade_ratio: f64,
    /// Per `τ`: whether the last decade added less than `1e−6` of the sum.
    pub spt_settled: Vec<bool>,
    pub verdict: TractabilityVerdict,
    pub label: String,
}

/// Finite-d statistics of the Euler tractability criteria for the smoothness rule
/// `j ↦ r_j`, evaluated on the decades up to `d_max`.
pub fn euler_tractability_diagnostic<F: Fn(usize) -> f64>(r_rule: F, d_max: usize, tau_grid: &[f64]) -> TractabilityReport {
    let ln3 = 3f64.ln();
    let mut qsum = NeumaierSum::new();
    let mut ssum: Vec<NeumaierSum> = vec![NeumaierSum::new(); tau_grid.len()];
    let mut rows = Vec::new();
    let mut qpt_sup: f64 = 0.0;
    let mut next = 1;
    for j in 1..=d_max {
        let r = r_rule(j);
        qsum.add((r + 1.0) * (-(2.0 * r + 2.0) * ln3).exp());
        for (s, &tau) in ssum.iter_mut().zip(tau_grid) {
            s.add((-2.0 * tau * (r + 1.0) * ln3).exp());
        }
        let stat = qsum.value() / ln_plus(j as f64);
        qpt_sup = qpt_sup.max(stat);
        if j == next || j == d_max {
            rows.push(TractabilityRow { d: j, r, qpt_statistic: stat, spt_sums: ssum.iter().map(|s| s.value()).collect() });
            next *= 10;
        }
    }
    let last = rows.last().cloned().unwrap_or(TractabilityRow { d: 0, r: 0.0, qpt_statistic: 0.0, spt_sums: vec![0.0; tau_grid.len()] });
    let prev = if rows.len() >= 2 { rows[rows.len() - 2].clone() } else { last.clone() };
    let r_growth = r_rule(d_max) - r_rule(d_max.div_ceil(10).max(1));
    let qpt_last_decade_ratio = if prev.qpt_statistic > 0.0 { last.qpt_statistic / prev.qpt_statistic } else { 1.0 };
    let spt_settled: Vec<bool> = last.spt_sums.iter().zip(&prev.spt_sums).map(|(a, b)| rows.len() >= 2 && a - b <= 1e-6 * a).collect();
    let wt = r_growth > 0.0;
    let verdict = if wt && spt_settled.iter().any(|&s| s) {
        TractabilityVerdict::StrongPolynomial
    } else if wt && qpt_last_decade_ratio <= 1.1 {
        TractabilityVerdict::QuasiPolynomial
    } else if wt {
        TractabilityVerdict::Weak
    } else {
        TractabilityVerdict::Intractable
    };
    TractabilityReport {
        d_max,
        tau_grid: tau_grid.to_vec(),
        rows,
        r_growth,
        qpt_sup,
        qpt_last_decade_ratio,
        spt_settled,
        verdict,
        label: EVIDENCE_LABEL.into(),
    }
}

/// Darling's `ψ(y) = 1 − Σ λ̄_k^{1+1/y}`, summed as `Σ λ̄_k (1 − λ̄_k^{1/y})`.
/// A modeled tail enters through its midpoint integral; without a model the
/// discarded mass is placed at the last explicit weight, which bounds `ψ` from below.
pub fn darling_psi(spec: &MarginalSpectrum, y: f64) -> f64 {
    let mut acc: NeumaierSum = spec.weights.iter().map(|&w| -w * (w.ln() / y).exp_m1()).collect();
    match spec.tail_model {
        Some(model) => {
            let u0 = (spec.weights.len() as f64 + 0.5).ln();
            let total = model.integral_from(u0);
            let g = |u: f64| (u - (1.0 + 1.0 / y) * model.neg_ln_weight(u)).exp();
            let powered = integrate_to_inf(g, u0, 1e-14 * total.max(1e-300), 2000).value;
            acc.add((total - powered).max(0.0));
        }
        None => {
            let last = *spec.weights.last().unwrap();
            acc.add(-spec.tail_bound * (last.ln() / y).exp_m1());
        }
    }
    acc.value()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowVarReport {
    pub d: u64,
    pub eps: f64,
    /// `−ln(1−ε²)`.
    pub target: f64,
    /// `d φ(ln n)` over the `ln n` bracket, ordered low to high.
    pub d_phi: (f64, f64),
    /// `d_phi − target`.
    pub residual: (f64, f64),
    /// `(y, ψ(y), φ(y), ψ(y)/φ(y))`.
    pub psi_rows: Vec<(f64, f64, f64, f64)>,
    pub label: String,
}

/// Compares `d φ(ln n)` over a bracket for `ln n` against `−ln(1−ε²)` and tabulates
/// `ψ/φ` at `psi_points` when the spectrum is supplied.
pub fn slow_var_check(
    svf: &SvfHandle,
    spec: Option<&MarginalSpectrum>,
    d: u64,
    eps: f64,
    ln_n: (f64, f64),
    psi_points: &[f64],
) -> Result<SlowVarReport> {
    check_eps(eps)?;
    let target = -(-eps * eps).ln_1p();
    let (u, v) = (d as f64 * svf.eval(ln_n.0), d as f64 * svf.eval(ln_n.1));
    let d_phi = (u.min(v), u.max(v));
    let psi_rows = match spec {
        Some(s) => psi_points
            .iter()
            .map(|&y| {
                let psi = darling_psi(s, y);
                let phi = svf.eval(y);
                (y, psi, phi, psi / phi)
            })
            .collect(),
        None => Vec::new(),
    };
    Ok(SlowVarReport {
        d,
        eps,
        target,
        d_phi,
        residual: (d_phi.0 - target, d_phi.1 - target),
        psi_rows,
        label: EVIDENCE_LABEL.into(),
    })
}
