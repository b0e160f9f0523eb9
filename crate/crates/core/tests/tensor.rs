use tensorcx::*;

fn two_atom(a: f64, d: usize) -> TensorProblem {
    TensorProblem::degree(MarginalSpectrum::two_atom(a).unwrap(), d).unwrap()
}

fn exact_n(p: &TensorProblem, eps: f64) -> u128 {
    let r = exact_complexity(p, eps, 10_000_000).unwrap();
    assert!(r.is_exact());
    r.n_upper.exact.unwrap()
}

#[test]
fn worked_examples() {
    let flat3 = TensorProblem::degree(MarginalSpectrum::flat(3).unwrap(), 2).unwrap();
    assert_eq!(exact_n(&flat3, 0.5), 7);
    assert_eq!(exact_n(&two_atom(0.7, 2), 0.6), 2);
    assert_eq!(exact_n(&two_atom(0.9, 3), 0.3), 4);
    assert_eq!(enumeration_oracle(&two_atom(0.9, 3), 0.3).unwrap(), OracleCount { lower: 4, upper: 4 });
    let flat2 = TensorProblem::degree(MarginalSpectrum::flat(2).unwrap(), 10).unwrap();
    assert_eq!(exact_n(&flat2, 0.99), 21);
    assert_eq!(enumeration_oracle(&flat2, 0.99).unwrap().upper, 21);
    let one = TensorProblem::degree(normalize(&[1.0], 0.0).unwrap(), 40).unwrap();
    assert_eq!(exact_n(&one, 0.5), 1);
}

#[test]
fn binomial_agrees_with_search() {
    for d in [1usize, 2, 5, 12, 20] {
        for eps in [0.1, 0.3, 0.6, 0.9] {
            let b = binomial_degree_complexity(0.7, d, eps).unwrap();
            assert_eq!(b.method, Method::Binomial);
            assert_eq!(b.n_lower, b.n_upper);
            assert_eq!(b.n_upper.exact.unwrap(), exact_n(&two_atom(0.7, d), eps), "d={d} eps={eps}");
        }
    }
    assert_eq!(binomial_degree_complexity(0.4, 3, 0.5).unwrap_err(), Error::InvalidAtom(0.4));
}

#[test]
fn binomial_clt_band() {
    let st = spectrum_stats(&MarginalSpectrum::two_atom(0.7).unwrap());
    let d = 10_000f64;
    let b = binomial_degree_complexity(0.7, 10_000, 0.5).unwrap();
    let half = 5.0 * st.deviation * d.sqrt();
    assert!((b.ln_lower - st.entropy * d).abs() < half);
}

#[test]
fn monotone_in_eps_and_in_marginals() {
    let base = vec![normalize(&[0.6, 0.3, 0.1], 0.0).unwrap(), normalize(&[0.5, 0.5], 0.0).unwrap()];
    let p = TensorProblem::product(base.clone()).unwrap();
    let ns: Vec<u128> = (1..10).map(|i| exact_n(&p, i as f64 / 10.0)).collect();
    assert!(ns.windows(2).all(|w| w[1] <= w[0]));
    let mut more = base;
    more.push(normalize(&[0.8, 0.2], 0.0).unwrap());
    let q = TensorProblem::product(more).unwrap();
    for eps in [0.2, 0.5, 0.8] {
        assert!(exact_n(&q, eps) >= exact_n(&p, eps));
    }
}

#[test]
fn cap_and_eps_errors() {
    let p = two_atom(0.6, 30);
    assert!(matches!(exact_complexity(&p, 0.1, 10), Err(Error::CapExceeded(10))));
    assert!(exact_complexity(&p, 0.0, 10).is_err());
    assert!(exact_complexity(&p, 1.0, 10).is_err());
    let big = TensorProblem::degree(MarginalSpectrum::flat(8).unwrap(), 9).unwrap();
    assert!(matches!(enumeration_oracle(&big, 0.5), Err(Error::TooLarge(_))));
}

#[test]
fn grid_brackets_contain_exact_values() {
    let eps2: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    for d in [20usize, 60] {
        let p = two_atom(0.7, d);
        let g = convolve_g(&p, 0.0, (d as f64).sqrt(), 0.005, 4.0 * (d as f64).sqrt()).unwrap();
        assert!(g.max_fold_error < 1e-9);
        for eps in [0.3, 0.5, 0.7] {
            let exact = binomial_degree_complexity(0.7, d, eps).unwrap();
            let br = bracket_complexity(&g, eps, &eps2).unwrap();
            assert!(br.contains(&exact.n_upper), "d={d} eps={eps}: {br:?} vs {exact:?}");
        }
    }
}

#[test]
fn product_with_tails_is_bracketed() {
    let marg: Vec<_> = (0..4).map(|j| euler_spectrum(1.0 + j as f64, 6).unwrap()).collect();
    let p = TensorProblem::product(marg).unwrap();
    let r = exact_complexity(&p, 0.2, 1_000_000).unwrap();
    assert!(r.n_lower.ln <= r.n_upper.ln);
    assert!(r.ln_lower <= r.ln_upper);
}
