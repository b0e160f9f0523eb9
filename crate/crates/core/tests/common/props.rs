use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use tensorcx::*;

pub const EPS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Raw weights for one marginal; about a third are snapped to small integers so
/// that ties and multiplicities occur.
pub fn raw_marginal(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(0.01f64..1.0, 1..=max_len), any::<bool>(), any::<bool>()).prop_map(|(v, a, b)| {
        if a && b {
            v.into_iter().map(|x| (x * 4.0).ceil()).collect()
        } else {
            v
        }
    })
}

pub fn problem(max_d: usize, max_len: usize) -> impl Strategy<Value = TensorProblem> {
    prop::collection::vec(raw_marginal(max_len), 1..=max_d).prop_map(|ms| {
        TensorProblem::product(ms.iter().map(|w| normalize(w, 0.0).unwrap()).collect()).unwrap()
    })
}

fn exact(p: &TensorProblem, eps: f64) -> std::result::Result<ComplexityInterval, TestCaseError> {
    exact_complexity(p, eps, 10_000_000).map_err(|e| TestCaseError::fail(e.to_string()))
}

pub fn oracle_equivalence(p: &TensorProblem, eps: f64) -> std::result::Result<(), TestCaseError> {
    let got = exact(p, eps)?;
    let want = enumeration_oracle(p, eps).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(got.n_lower.exact, Some(want.lower as u128));
    prop_assert_eq!(got.n_upper.exact, Some(want.upper as u128));
    Ok(())
}

pub fn monotone_in_eps(p: &TensorProblem) -> std::result::Result<(), TestCaseError> {
    let mut prev = u128::MAX;
    for eps in EPS {
        let n = exact(p, eps)?.n_upper.exact.unwrap();
        prop_assert!(n <= prev, "n rose to {} at eps={}", n, eps);
        prev = n;
    }
    Ok(())
}

pub fn monotone_in_marginals(p: &TensorProblem, extra: &[f64], eps: f64) -> std::result::Result<(), TestCaseError> {
    let extra = normalize(extra, 0.0).unwrap();
    let mut ms: Vec<MarginalSpectrum> = (0..p.d()).map(|j| p.marginal(j).clone()).collect();
    ms.push(extra);
    let q = TensorProblem::product(ms).unwrap();
    prop_assert!(exact(&q, eps)?.n_upper.exact >= exact(p, eps)?.n_upper.exact);
    Ok(())
}

/// Fold conservation, envelope order and mass closure of one grid; returns the fold error.
pub fn conservation(p: &TensorProblem, step: f64) -> std::result::Result<f64, TestCaseError> {
    let g = match convolve_g(p, 0.0, 1.0, step, 40.0) {
        Ok(g) => g,
        Err(Error::GridOverflow(_)) => return Ok(0.0),
        Err(e) => return Err(TestCaseError::fail(e.to_string())),
    };
    prop_assert!(g.max_fold_error < 1e-9, "fold error {}", g.max_fold_error);
    for i in 0..g.len() {
        prop_assert!(g.lower[i] <= g.upper[i] + 1e-12);
    }
    let closure = g.lower.last().unwrap() + g.defect_right();
    prop_assert!(closure <= 1.0 + 1e-9 && closure >= 1.0 - p.total_defect - 1e-9, "closure {}", closure);
    Ok(g.max_fold_error)
}

pub fn sandwich(p: &TensorProblem, eps: f64, step: f64) -> std::result::Result<(), TestCaseError> {
    let g = match convolve_g(p, 0.0, 1.0, step, 40.0) {
        Ok(g) => g,
        Err(Error::GridOverflow(_)) => return Ok(()),
        Err(e) => return Err(TestCaseError::fail(e.to_string())),
    };
    let grid: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
    let br = bracket_complexity(&g, eps, &grid).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let n = exact(p, eps)?.n_upper;
    prop_assert!(br.contains(&n), "{:?} misses {:?}", br, n);
    Ok(())
}

/// `ε = tenths/10`; the ceiling is taken in integers.
pub fn flat_closed_form(l: usize, d: usize, tenths: u32) -> std::result::Result<(), TestCaseError> {
    let p = TensorProblem::degree(MarginalSpectrum::flat(l).unwrap(), d).unwrap();
    let num = (100 - (tenths * tenths) as u128) * (l as u128).pow(d as u32);
    let want = num.div_ceil(100);
    prop_assert_eq!(exact(&p, tenths as f64 / 10.0)?.n_upper.exact, Some(want));
    Ok(())
}

pub fn normalize_closes_mass(raw: &[f64]) -> std::result::Result<(), TestCaseError> {
    let s = normalize(raw, 0.0).unwrap();
    let total = s.sum() + s.tail_bound;
    prop_assert!((total - 1.0).abs() < 1e-12, "total {}", total);
    prop_assert!(s.weights.windows(2).all(|w| w[1] <= w[0]));
    Ok(())
}

pub fn normal_round_trip(u: f64) -> std::result::Result<(), TestCaseError> {
    let x = normal_quantile(u).unwrap();
    prop_assert!((normal_cdf(x) - u).abs() < 1e-12);
    Ok(())
}

pub fn dickman_round_trip(law: &DickmanLaw, u: f64) -> std::result::Result<(), TestCaseError> {
    let q = dickman_quantile(law, u).unwrap();
    prop_assert!((dickman_cdf(law, q) - u).abs() < 1e-8);
    Ok(())
}
