use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{check_eps, ComplexityInterval, Count, Marginals, Method, TensorProblem, TIE_TOL};
use crate::error::{Error, Result};
use crate::numeric::{log_add, NeumaierSum};
use crate::spectra::{u_distribution, MarginalSpectrum};

/// Atoms closer than this fraction of a step to a grid point are snapped to it,
/// with the distance carried as slack.
const SNAP_RTOL: f64 = 1e-9;
const MAX_CELLS: usize = 20_000_000;
/// Indices above this are counted as a continuum.
const BIG_INDEX: f64 = 4.5e15;
/// Mass per problem that may be lumped at the far end of the marginals.
const LUMP_TOTAL: f64 = 1e-12;

/// Distribution function of `Σ U_j` on the grid `g_i = origin + i·step` (nats),
/// held as certified lower and upper envelopes together with envelopes of the
/// eigenvalue counting function.
///
/// Certified statements, with `s = slack`:
/// `G(g_i + s) ≥ lower[i]`, `G(g_i − s) ≤ upper[i]`,
/// `#{λ̄ ≥ e^{−(g_i+s)}} ≥ exp(ln_count_lower[i])` is not claimed; instead
/// `#{λ̄ ≥ e^{−y}} ≥ exp(ln_count_lower[i])` for `y ≥ g_i + s` and
/// `#{λ̄ ≥ e^{−y}} ≤ exp(ln_count_upper[i])` for `y ≤ g_i − s` (when `counts_upper_valid`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriddedCdf {
    pub origin: f64,
    pub step: f64,
    pub a_d: f64,
    pub b_d: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub ln_count_lower: Vec<f64>,
    pub ln_count_upper: Vec<f64>,
    pub counts_upper_valid: bool,
    /// Mass of the lower envelope pushed beyond the last grid point.
    pub dropped_lower: f64,
    pub dropped_upper: f64,
    pub slack: f64,
    pub folds: usize,
    /// Largest relative mass-conservation error over all folds.
    pub max_fold_error: f64,
}

impl GriddedCdf {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn g(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.step
    }

    /// Normalized coordinate `(g_i − a_d)/b_d`.
    pub fn x(&self, i: usize) -> f64 {
        (self.g(i) - self.a_d) / self.b_d
    }

    /// Mass certified to lie above the grid.
    pub fn defect_right(&self) -> f64 {
        self.dropped_lower
    }

    /// Certified `[lo, hi]` bracket on `G(y)`.
    pub fn bounds_at(&self, y: f64) -> (f64, f64) {
        let n = self.len();
        let lo_idx = ((y - self.slack - self.origin) / self.step).floor();
        let lo = if lo_idx < 0.0 { 0.0 } else { self.lower[(lo_idx as usize).min(n - 1)] };
        let hi_idx = ((y + self.slack - self.origin) / self.step).ceil();
        let hi = if hi_idx < 0.0 {
            0.0
        } else if hi_idx as usize >= n {
            1.0
        } else {
            self.upper[hi_idx as usize]
        };
        (lo, hi)
    }

    /// Writes `x,cdf_lo,cdf_hi` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "cdf_lo", "cdf_hi"])?;
        for i in 0..self.len() {
            wr.write_record([format!("{:.10e}", self.x(i)), format!("{:.15e}", self.lower[i]), format!("{:.15e}", self.upper[i])])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Cells of one marginal after outward snapping: `(cell, mass, tilted count)`.
#[derive(Debug, Clone, Default)]
struct Binned {
    cells: Vec<(usize, f64, f64)>,
    /// Mass of this marginal placed beyond the grid.
    outside: f64,
}

struct MarginalBins {
    lo: Binned,
    hi: Binned,
    slack: f64,
    counts_upper_valid: bool,
}

fn snap(p: f64, step: f64) -> (i64, i64, f64) {
    let r = p / step;
    let n = r.round();
    if (r - n).abs() <= SNAP_RTOL {
        (n as i64, n as i64, (p - n * step).abs() + 4.0 * f64::EPSILON * p.abs())
    } else {
        (r.ceil() as i64, r.floor() as i64, 0.0)
    }
}

/// Snaps the law of `U − H` (H = head position) onto `n` cells of width `step`.
///
/// The farthest atoms and the discarded tail are lumped once their combined mass is at
/// most `lump`: the lower envelope drops them, the upper envelope moves them to the cell
/// of the first lumped position together with every index they hold inside the grid.
fn bin_marginal(spec: &MarginalSpectrum, step: f64, n: usize, lump: f64) -> MarginalBins {
    let u = u_distribution(spec);
    let head = u.atoms[0].position;
    let mut lo = Binned::default();
    let mut hi = Binned::default();
    let mut slack: f64 = 0.0;
    let mut counts_upper_valid = true;

    let mut keep = u.atoms.len();
    let mut lumped = spec.tail_bound;
    let tail_lumped = lumped <= lump;
    if tail_lumped {
        while keep > 1 && lumped + u.atoms[keep - 1].mass <= lump {
            keep -= 1;
            lumped += u.atoms[keep].mass;
        }
    }

    for a in &u.atoms[..keep] {
        let p = a.position - head;
        let (c_lo, c_hi, s) = snap(p, step);
        slack = slack.max(s);
        for (bins, c) in [(&mut lo, c_lo), (&mut hi, c_hi)] {
            let c = c.max(0) as usize;
            if c < n {
                let t = a.mass * (p - c as f64 * step).exp();
                bins.cells.push((c, a.mass, t));
            } else {
                bins.outside += a.mass;
            }
        }
    }

    let y_end = head + (n - 1) as f64 * step;
    if tail_lumped && lumped > 0.0 {
        let from = if keep < u.atoms.len() {
            u.atoms[keep].position
        } else {
            match spec.tail_model {
                Some(m) => m.neg_ln_weight(((spec.weights.len() + 1) as f64).ln()),
                None => u.defect_from,
            }
        };
        let mut ln_count = f64::NEG_INFINITY;
        for a in u.atoms[keep..].iter().filter(|a| a.position <= y_end) {
            ln_count = log_add(ln_count, (a.multiplicity as f64).ln());
        }
        if spec.tail_bound > 0.0 {
            match spec.tail_model {
                Some(m) => {
                    let u_k = (spec.weights.len() as f64).ln();
                    let ub = floor_index_ln(m.ln_index_at(y_end));
                    if ub > u_k {
                        ln_count = log_add(ln_count, ln_diff(u_k, ub));
                    }
                }
                None => counts_upper_valid = false,
            }
        }
        lo.outside += lumped;
        let c = ((from - head) / step).floor().max(0.0);
        if c < n as f64 {
            hi.cells.push((c as usize, lumped, (ln_count - head - c * step).exp()));
        } else {
            hi.outside += lumped;
        }
    } else if spec.tail_bound > 0.0 {
        match spec.tail_model {
            Some(model) => bin_tail(spec, &model, head, step, n, &mut lo, &mut hi),
            None => {
                // Unknown discarded indices: the lower envelope drops them, the upper
                // envelope places them at the last explicit position.
                lo.outside += spec.tail_bound;
                let (_, c_hi, _) = snap(u.defect_from - head, step);
                let c = c_hi.max(0) as usize;
                if c < n {
                    hi.cells.push((c, spec.tail_bound, 0.0));
                } else {
                    hi.outside += spec.tail_bound;
                }
                counts_upper_valid = false;
            }
        }
    }
    for b in [&mut lo, &mut hi] {
        b.cells.sort_by_key(|c| c.0);
        let mut merged: Vec<(usize, f64, f64)> = Vec::with_capacity(b.cells.len());
        for &(c, m, t) in &b.cells {
            match merged.last_mut() {
                Some(last) if last.0 == c => {
                    last.1 += m;
                    last.2 += t;
                }
                _ => merged.push((c, m, t)),
            }
        }
        b.cells = merged;
    }
    MarginalBins { lo, hi, slack, counts_upper_valid }
}

/// Integer boundary `⌊k⌋` for `k = e^u`, kept as `ln` once beyond exact range.
fn floor_index_ln(u: f64) -> f64 {
    let k = u.exp();
    if k < BIG_INDEX {
        k.floor().max(1.0).ln()
    } else {
        u
    }
}

/// `ln(e^{ub} − e^{ua})` for `ua < ub`.
fn ln_diff(ua: f64, ub: f64) -> f64 {
    ub + (-(ua - ub).exp()).ln_1p()
}

/// Bins indices `k > K` of a modeled tail. Indices with position in
/// `(H+(c−1)·step, H+c·step]` go to cell `c` (lower envelope) and `c−1` (upper).
/// Cumulative masses use `∫_{K+1}^{b+1} f ≤ Σ_{K<k≤b} f ≤ ∫_K^b f`, so each envelope
/// moves mass only in its conservative direction and keeps the total equal to the tail.
fn bin_tail(
    spec: &MarginalSpectrum,
    model: &crate::spectra::TailModel,
    head: f64,
    step: f64,
    n: usize,
    lo: &mut Binned,
    hi: &mut Binned,
) {
    let tail = spec.tail_bound;
    let kk = spec.weights.len() as f64;
    let u_k = kk.ln();
    let u_k1 = (kk + 1.0).ln();
    let first_pos = model.neg_ln_weight(u_k1) - head;
    let mut c = (first_pos / step).ceil().max(1.0) as usize;
    let cum_lo = |ub: f64| model.integral_between(u_k1, ub_plus_one(ub)).min(tail);
    let cum_hi = |ub: f64| model.integral_between(u_k, ub).min(tail);
    let mut prev_ub = u_k;
    let (mut prev_lo, mut prev_hi) = (0.0, 0.0);
    while c <= n {
        let ub = floor_index_ln(model.ln_index_at(head + c as f64 * step)).max(u_k);
        if ub > prev_ub {
            let ln_count = ln_diff(prev_ub, ub);
            let (l, h) = (cum_lo(ub), cum_hi(ub));
            let tilt = ln_count - head;
            if c < n {
                lo.cells.push((c, (l - prev_lo).max(0.0), (tilt - c as f64 * step).exp()));
                prev_lo = l;
            }
            hi.cells.push((c - 1, (h - prev_hi).max(0.0), (tilt - (c - 1) as f64 * step).exp()));
            prev_hi = h;
            prev_ub = ub;
        }
        c += 1;
    }
    lo.outside += tail - prev_lo;
    hi.outside += tail - prev_hi;
}

/// `ln(e^u + 1)` for an integer-valued index, continuous beyond exact range.
fn ub_plus_one(u: f64) -> f64 {
    let k = u.exp();
    if k < BIG_INDEX {
        (k + 1.0).ln()
    } else {
        u
    }
}

/// Mass and tilted-count arrays of one envelope plus mass already pushed off-grid.
#[derive(Clone)]
struct Env {
    mass: Vec<f64>,
    tcount: Vec<f64>,
    outside: f64,
}

impl Env {
    fn delta(n: usize) -> Self {
        let mut mass = vec![0.0; n];
        let mut tcount = vec![0.0; n];
        mass[0] = 1.0;
        tcount[0] = 1.0;
        Env { mass, tcount, outside: 0.0 }
    }

    fn from_bins(b: &Binned, n: usize) -> Self {
        let mut e = Env { mass: vec![0.0; n], tcount: vec![0.0; n], outside: b.outside };
        for &(c, m, t) in &b.cells {
            e.mass[c] += m;
            e.tcount[c] += t;
        }
        e
    }

    fn inside(&self) -> f64 {
        self.mass.iter().copied().collect::<NeumaierSum>().value()
    }

    fn support(&self) -> usize {
        self.mass.iter().rposition(|&m| m != 0.0).map_or(0, |i| i + 1)
    }
}

/// Suffix sums `s[i] = Σ_{j≥i} v[j]`, with `s[len] = 0`.
fn suffix(v: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; v.len() + 1];
    let mut acc = NeumaierSum::new();
    for i in (0..v.len()).rev() {
        acc.add(v[i]);
        s[i] = acc.value();
    }
    s
}

/// Truncated convolution of two envelopes; returns the result and the relative
/// conservation error of this fold.
fn convolve(a: &Env, b_cells: &[(usize, f64, f64)], b_outside: f64, n: usize) -> (Env, f64) {
    let mut mass = vec![0.0; n];
    let mut tcount = vec![0.0; n];
    let used = a.support();
    let a_suffix = suffix(&a.mass[..used]);
    let mut dropped = NeumaierSum::new();
    for &(c, w, t) in b_cells {
        if c >= n {
            continue;
        }
        let lim = used.min(n - c);
        let (dst_m, dst_t) = (&mut mass[c..c + lim], &mut tcount[c..c + lim]);
        for i in 0..lim {
            dst_m[i] += a.mass[i] * w;
            dst_t[i] += a.tcount[i] * t;
        }
        dropped.add(a_suffix[lim] * w);
    }
    let a_in = a_suffix[0];
    let b_in: f64 = b_cells.iter().map(|c| c.1).collect::<NeumaierSum>().value();
    let outside = dropped.value() + a_in * b_outside + a.outside * (b_in + b_outside);
    let out = Env { mass, tcount, outside };
    let expected = (a_in + a.outside) * (b_in + b_outside);
    let err = ((out.inside() + out.outside) - expected).abs() / expected.max(1e-300);
    (out, err)
}

fn dense_cells(e: &Env) -> Vec<(usize, f64, f64)> {
    (0..e.mass.len()).filter(|&i| e.mass[i] != 0.0 || e.tcount[i] != 0.0).map(|i| (i, e.mass[i], e.tcount[i])).collect()
}

/// Law of `Σ_j U_j` on a grid of `step·b_d` nats reaching `a_d + x_max·b_d`.
///
/// Positions are shifted by the head atoms; the degree case aligns the step to the
/// heaviest non-head atom and folds by repeated squaring.
pub fn convolve_g(problem: &TensorProblem, a_d: f64, b_d: f64, step: f64, x_max: f64) -> Result<GriddedCdf> {
    if !(step > 0.0 && b_d > 0.0) || !x_max.is_finite() || !a_d.is_finite() {
        return Err(Error::InvalidParameter("grid needs step > 0, b_d > 0 and finite bounds".into()));
    }
    let d = problem.d();
    let mut step_y = step * b_d;
    let heads: Vec<f64> = (0..d).map(|j| -problem.marginal(j).weights[0].ln()).collect();
    let origin = match &problem.marginals {
        Marginals::Degree { spectrum, .. } => {
            let u = u_distribution(spectrum);
            if let Some(a) = u.atoms.iter().skip(1).max_by(|x, y| x.mass.total_cmp(&y.mass)) {
                let delta = a.position - u.atoms[0].position;
                step_y = delta / (delta / step_y).ceil();
            }
            d as f64 * heads[0]
        }
        Marginals::Product(_) => heads.iter().copied().collect::<NeumaierSum>().value(),
    };
    let y_max = a_d + x_max * b_d;
    if y_max < origin {
        return Err(Error::GridOverflow(1.0));
    }
    let cells = ((y_max - origin) / step_y).floor() + 1.0;
    if cells > MAX_CELLS as f64 {
        return Err(Error::InvalidParameter(format!("grid of {cells} cells is too large")));
    }
    let n = cells as usize;

    let mut folds = 0usize;
    let mut max_err: f64 = 0.0;
    let mut slack = 0.0;
    let mut counts_upper_valid = true;
    let (lo, hi) = match &problem.marginals {
        Marginals::Degree { spectrum, d } => {
            let bins = bin_marginal(spectrum, step_y, n, LUMP_TOTAL / *d as f64);
            slack = bins.slack * *d as f64;
            counts_upper_valid = bins.counts_upper_valid;
            let mut out = Vec::new();
            for b in [&bins.lo, &bins.hi] {
                let mut base = Env::from_bins(b, n);
                let mut acc: Option<Env> = None;
                let mut k = *d;
                loop {
                    if k & 1 == 1 {
                        acc = Some(match acc {
                            None => base.clone(),
                            Some(r) => {
                                let (e, err) = convolve(&r, &dense_cells(&base), base.outside, n);
                                folds += 1;
                                max_err = max_err.max(err);
                                e
                            }
                        });
                    }
                    k >>= 1;
                    if k == 0 {
                        break;
                    }
                    let (sq, err) = convolve(&base, &dense_cells(&base), base.outside, n);
                    folds += 1;
                    max_err = max_err.max(err);
                    base = sq;
                }
                out.push(acc.unwrap());
            }
            let hi = out.pop().unwrap();
            (out.pop().unwrap(), hi)
        }
        Marginals::Product(list) => {
            let mut lo = Env::delta(n);
            let mut hi = Env::delta(n);
            for spec in list {
                let bins = bin_marginal(spec, step_y, n, LUMP_TOTAL / list.len() as f64);
                slack += bins.slack;
                counts_upper_valid &= bins.counts_upper_valid;
                let (l, e1) = convolve(&lo, &bins.lo.cells, bins.lo.outside, n);
                let (h, e2) = convolve(&hi, &bins.hi.cells, bins.hi.outside, n);
                lo = l;
                hi = h;
                folds += 1;
                max_err = max_err.max(e1).max(e2);
            }
            (lo, hi)
        }
    };
    if 2.0 * slack >= step_y {
        return Err(Error::InvalidParameter("snapping slack exceeds half a grid step".into()));
    }
    let cumulate = |v: &[f64]| {
        let mut acc = NeumaierSum::new();
        v.iter()
            .map(|&m| {
                acc.add(m);
                acc.value().min(1.0)
            })
            .collect::<Vec<f64>>()
    };
    let ln_cum_counts = |t: &[f64]| {
        let mut acc = f64::NEG_INFINITY;
        t.iter()
            .enumerate()
            .map(|(i, &x)| {
                if x > 0.0 {
                    acc = log_add(acc, x.ln() + origin + i as f64 * step_y);
                }
                acc
            })
            .collect::<Vec<f64>>()
    };
    let g = GriddedCdf {
        origin,
        step: step_y,
        a_d,
        b_d,
        lower: cumulate(&lo.mass),
        upper: cumulate(&hi.mass),
        ln_count_lower: ln_cum_counts(&lo.tcount),
        ln_count_upper: ln_cum_counts(&hi.tcount),
        counts_upper_valid,
        dropped_lower: lo.outside,
        dropped_upper: hi.outside,
        slack,
        folds,
        max_fold_error: max_err,
    };
    if *g.lower.last().unwrap() < 0.5 {
        return Err(Error::GridOverflow(g.dropped_lower));
    }
    Ok(g)
}

/// Bracket on `|ln λ̄(ε)| = inf{y : G(y) ≥ 1−ε²}` in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileInterval {
    pub lo: f64,
    pub hi: f64,
}

impl QuantileInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

struct Crossing {
    /// First index with `lower ≥ T`.
    up: usize,
    /// Last index with `upper < T`.
    down: Option<usize>,
}

fn crossing(g: &GriddedCdf, t: f64) -> Result<Crossing> {
    let up = g.lower.partition_point(|&v| v < t);
    if up == g.len() {
        return Err(Error::QuantileOutsideGrid);
    }
    let k = g.upper.partition_point(|&v| v < t);
    Ok(Crossing { up, down: k.checked_sub(1) })
}

pub fn lambda_quantile(g: &GriddedCdf, eps: f64) -> Result<QuantileInterval> {
    check_eps(eps)?;
    let c = crossing(g, 1.0 - eps * eps - TIE_TOL)?;
    let lo = match c.down {
        Some(i) => g.g(i) - g.slack,
        None => g.origin - g.slack,
    };
    Ok(QuantileInterval { lo, hi: g.g(c.up) + g.slack })
}

fn interval_from_ln(ln_lower: f64, ln_upper: f64) -> ComplexityInterval {
    let n_lower = Count::from_ln(ln_lower.max(0.0), true);
    let n_upper = Count::from_ln(ln_upper.max(0.0), false);
    let ln_lower = if n_lower.exact.is_some() { n_lower.ln } else { ln_lower.max(0.0) };
    let ln_upper = if n_upper.exact.is_some() { n_upper.ln } else { ln_upper };
    ComplexityInterval { n_lower, n_upper, ln_lower, ln_upper, method: Method::ConvolutionBounds }
}

/// Two-sided bound from `n(ε₁) ≤ 1/λ̄(ε₁)` and `n(ε₁) ≥ (ε₂²−ε₁²)/λ̄(ε₂)`.
pub fn complexity_bounds(q1: QuantileInterval, q2: QuantileInterval, eps1: f64, eps2: f64) -> Result<ComplexityInterval> {
    check_eps(eps1)?;
    check_eps(eps2)?;
    if !(eps1 < eps2) {
        return Err(Error::BadEpsilonOrder(eps1, eps2));
    }
    let ln_lower = q2.lo + (eps2 * eps2 - eps1 * eps1).ln();
    Ok(interval_from_ln(ln_lower, q1.hi))
}

/// Intersection of [`complexity_bounds`] (maximized over `eps2_grid`) with the
/// bracket read from the counting envelopes.
///
/// Upper: with `y = g_up + s` the first certified crossing, `n ≤ C(y)` and
/// `n ≤ C(y') + ⌈(T − G(y'))·e^{y}⌉` for `y' = g_{up−1} + s`.
/// Lower: with `y = g_down − s` where `G(y) < T`, every remaining eigenvalue is below
/// `e^{−y}`, so `n ≥ C(y) + (T − G(y))·e^{y}`.
pub fn bracket_complexity(g: &GriddedCdf, eps: f64, eps2_grid: &[f64]) -> Result<ComplexityInterval> {
    check_eps(eps)?;
    let t = 1.0 - eps * eps - TIE_TOL;
    let q1 = lambda_quantile(g, eps)?;
    let mut ln_lower: f64 = 0.0;
    for &e2 in eps2_grid.iter().filter(|&&e2| e2 > eps && e2 < 1.0) {
        if let Ok(q2) = lambda_quantile(g, e2) {
            ln_lower = ln_lower.max(complexity_bounds(q1, q2, eps, e2)?.ln_lower);
        }
    }
    let mut ln_upper = q1.hi;
    let c = crossing(g, t)?;
    if g.counts_upper_valid {
        ln_upper = ln_upper.min(g.ln_count_upper[c.up]);
        if c.up > 0 {
            let prev = c.up - 1;
            let gap = (t - g.lower[prev]).max(0.0);
            let partial = log_add(gap.ln() + g.g(c.up) + g.slack, 0.0);
            ln_upper = ln_upper.min(log_add(g.ln_count_upper[prev], partial));
        }
    }
    if let Some(i) = c.down {
        let idx = if g.slack > 0.0 { i.checked_sub(1) } else { Some(i) };
        let counted = idx.map_or(f64::NEG_INFINITY, |k| g.ln_count_lower[k]);
        let gap = t - g.upper[i];
        let ln_rest = if gap > 0.0 { gap.ln() + g.g(i) - g.slack } else { f64::NEG_INFINITY };
        ln_lower = ln_lower.max(log_add(counted, ln_rest));
    }
    Ok(interval_from_ln(ln_lower, ln_upper.max(ln_lower)))
}
