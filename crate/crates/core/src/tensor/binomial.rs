use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use super::{check_eps, ComplexityInterval, Count, Method, TIE_TOL};
use crate::error::{Error, Result};
use crate::numeric::{log_add, NeumaierSum};

/// Natural log of a big integer from its leading 64 bits.
fn big_ln(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().unwrap() as f64).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap() as f64;
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Exact `n(ε)` for the `d`-th degree of `(a, 1−a)`.
///
/// Level `m` holds `C(d,m)` eigenvalues `a^{d−m}(1−a)^m`; levels are scanned in
/// decreasing weight and the crossing level contributes a partial count.
pub fn binomial_degree_complexity(a: f64, d: usize, eps: f64) -> Result<ComplexityInterval> {
    if !(a > 0.5 && a < 1.0) {
        return Err(Error::InvalidAtom(a));
    }
    check_eps(eps)?;
    if d == 0 {
        return Err(Error::InvalidParameter("d must be at least 1".into()));
    }
    let target = 1.0 - eps * eps - TIE_TOL;
    let (la, lb) = (a.ln(), (1.0 - a).ln());
    let mut binom = BigUint::one();
    let mut full = BigUint::zero();
    let mut cum = NeumaierSum::new();
    for m in 0..=d {
        let ln_c = big_ln(&binom);
        let ln_w = (d - m) as f64 * la + m as f64 * lb;
        let mass = (ln_c + ln_w).exp();
        let before = cum.value();
        if before + mass >= target || m == d {
            let need = (target - before).max(0.0);
            let ratio = need * (-ln_w).exp();
            let n = if ratio.is_finite() && ratio < 4.0e15 {
                let j = BigUint::from(ratio.ceil().max(1.0) as u64).min(binom.clone());
                let total = &full + j;
                match total.to_u128() {
                    Some(v) => Count::exact(v),
                    None => Count { ln: big_ln(&total), exact: None },
                }
            } else {
                Count { ln: log_add(big_ln(&full), need.ln() - ln_w), exact: None }
            };
            return Ok(ComplexityInterval::exact(n, Method::Binomial));
        }
        cum.add(mass);
        full += &binom;
        binom = binom * BigUint::from(d - m) / BigUint::from(m + 1);
    }
    unreachable!("the last level always reaches the target")
}
