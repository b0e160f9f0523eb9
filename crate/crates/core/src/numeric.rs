//! Small numerical kernels shared by the modules: compensated sums,
//! log-space helpers, adaptive Gauss–Kronrod quadrature and bracketing root search.

use std::collections::BinaryHeap;

/// Euler–Mascheroni constant to 30 significant digits.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082;

/// `max(1, ln x)`.
pub fn ln_plus(x: f64) -> f64 {
    if x > std::f64::consts::E {
        x.ln()
    } else {
        1.0
    }
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().collect::<NeumaierSum>().value()
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ e^{x_i}`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_infinite() {
        return m;
    }
    m + compensated_sum(xs.iter().map(|x| (x - m).exp())).ln()
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * GK_WK[7];
    let mut gauss = fc * GK_WG[3];
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx) + f(c + dx);
        kron += GK_WK[i] * s;
        if i % 2 == 1 {
            gauss += GK_WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Adaptive Gauss–Kronrod (7/15) on `[a, b]` with absolute tolerance `tol`.
/// Intervals are bisected by largest error until the total estimate is below
/// `tol` or `max_intervals` is reached.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_intervals: usize) -> Quad {
    integrate_pts(f, &[a, b], tol, max_intervals)
}

struct Part {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Part {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err).is_eq()
    }
}
impl Eq for Part {}
impl PartialOrd for Part {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Part {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// [`integrate`] over consecutive breakpoints `pts` (at least two, increasing).
pub fn integrate_pts<F: FnMut(f64) -> f64>(mut f: F, pts: &[f64], tol: f64, max_intervals: usize) -> Quad {
    let mut heap = BinaryHeap::new();
    let mut total_err = 0.0;
    for w in pts.windows(2) {
        if w[1] > w[0] {
            let (value, err) = gk15(&mut f, w[0], w[1]);
            total_err += err;
            heap.push(Part { lo: w[0], hi: w[1], value, err });
        }
    }
    let finish = |heap: BinaryHeap<Part>, converged: bool| {
        let parts = heap.into_vec();
        let error = if converged { parts.iter().map(|p| p.err).sum() } else { f64::INFINITY };
        let value = compensated_sum(parts.iter().map(|p| p.value));
        Quad { value, error, converged }
    };
    let mut splits = 0usize;
    loop {
        if splits % 1024 == 0 {
            total_err = heap.iter().map(|p| p.err).sum();
        }
        if total_err <= tol {
            return finish(heap, true);
        }
        if heap.len() >= max_intervals {
            let err: f64 = heap.iter().map(|p| p.err).sum();
            let mut q = finish(heap, false);
            q.error = err;
            return q;
        }
        let Some(p) = heap.pop() else { return finish(heap, true) };
        let mid = 0.5 * (p.lo + p.hi);
        if mid <= p.lo || mid >= p.hi {
            // Interval no longer divisible in floating point.
            heap.push(p);
            return finish(heap, false);
        }
        let (v1, e1) = gk15(&mut f, p.lo, mid);
        let (v2, e2) = gk15(&mut f, mid, p.hi);
        total_err += e1 + e2 - p.err;
        heap.push(Part { lo: p.lo, hi: mid, value: v1, err: e1 });
        heap.push(Part { lo: mid, hi: p.hi, value: v2, err: e2 });
        splits += 1;
    }
}

/// `∫_a^∞ f` through the substitution `t = a + u/(1-u)`.
pub fn integrate_to_inf<F: FnMut(f64) -> f64>(mut f: F, a: f64, tol: f64, max_intervals: usize) -> Quad {
    integrate(
        |u| {
            if u >= 1.0 {
                return 0.0;
            }
            let w = 1.0 - u;
            let v = f(a + u / w) / (w * w);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
        max_intervals,
    )
}

/// Bisection for the smallest `x` in `[lo, hi]` with `pred(x)` true, assuming
/// `pred` is monotone (false then true). Stops when the bracket is below `tol`.
pub fn bisect_first<P: FnMut(f64) -> bool>(mut pred: P, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancellation() {
        let s = compensated_sum([1.0, 1e100, 1.0, -1e100]);
        assert_eq!(s, 2.0);
    }

    #[test]
    fn log_add_matches_direct() {
        let v = log_add(2f64.ln(), 3f64.ln());
        assert!((v - 5f64.ln()).abs() < 1e-15);
        assert_eq!(log_add(f64::NEG_INFINITY, 1.0), 1.0);
    }

    #[test]
    fn quadrature_polynomial_and_singular() {
        let q = integrate(|x| x * x, 0.0, 3.0, 1e-13, 100);
        assert!((q.value - 9.0).abs() < 1e-12);
        let q = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-9, 2000);
        assert!((q.value - 2.0).abs() < 1e-8, "{}", q.value);
        let q = integrate_to_inf(|x| (-x).exp(), 0.0, 1e-12, 200);
        assert!((q.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn bisection_finds_threshold() {
        let x = bisect_first(|x| x * x >= 2.0, 0.0, 2.0, 1e-14);
        assert!((x - 2f64.sqrt()).abs() < 1e-13);
    }
}
