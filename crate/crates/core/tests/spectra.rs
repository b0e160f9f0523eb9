use tensorcx::*;

/// Solves `g(u) = x` for increasing `g` by bisection on `u = ln k`.
fn solve_ln_index(g: impl Fn(f64) -> f64, x: f64) -> f64 {
    let (mut lo, mut hi) = (1.0, 2.0 * x + 10.0);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn regvar_tail_mass_matches_integral_oracle() {
    let (beta, r) = (0.1, 1.0);
    let s = regvar_spectrum(beta, 1.0, r, 1_000_000).unwrap();
    // −ln f(k) = u + (1+r) ln u − ln β with u = ln k; Σ_{k>k_x} f = β/(r u_x^r) up to O(f(k_x))
    let oracle = |x: f64| {
        let u = solve_ln_index(|u| u + (1.0 + r) * u.ln() - beta.ln(), x);
        beta / (r * u.powf(r))
    };
    let t50 = tail_mass_mid(&s, 50.0);
    assert!((t50 / oracle(50.0) - 1.0).abs() < 1e-9, "{t50} vs {}", oracle(50.0));
    assert!((50.0 * t50 - 0.125).abs() < 0.002);
    let (lo, hi) = tail_mass(&s, 50.0);
    assert!(lo <= t50 && t50 <= hi);
    let mut prev = f64::INFINITY;
    for x in [50.0, 1e3, 1e5, 1e7] {
        let gap = (x * tail_mass_mid(&s, x) / (beta / r) - 1.0).abs();
        assert!(gap < prev);
        prev = gap;
        if x >= 1e3 {
            assert!(gap < 0.1);
        }
    }
}

#[test]
fn loglog_tail_approaches_beta_over_s() {
    for (beta, sv) in [(0.1, 1.0), (0.05, 0.5)] {
        let s = loglog_spectrum(beta, sv, 10_000).unwrap();
        let mut prev = f64::INFINITY;
        for x in [1e2, 1e4, 1e8, 1e16] {
            let v = tail_mass_mid(&s, x) * x.ln().powf(sv);
            let gap = (v / (beta / sv) - 1.0).abs();
            assert!(gap < prev, "beta={beta} s={sv} x={x}: {v}");
            prev = gap;
        }
        assert!(prev < 0.01);
    }
}

#[test]
fn shaped_families_close_mass() {
    for s in [
        regvar_spectrum(0.1, 1.0, 1.5, 1000).unwrap(),
        regvar_spectrum(0.3, 2.0, 0.0, 1000).unwrap(),
        loglog_spectrum(0.1, 1.0, 1000).unwrap(),
        euler_spectrum(0.0, 50).unwrap(),
        euler_spectrum(2.5, 3).unwrap(),
    ] {
        let total = s.sum() + s.tail_bound;
        assert!((total - 1.0).abs() < 1e-12, "{}: {total}", s.label);
        assert!(s.weights.windows(2).all(|w| w[1] <= w[0]));
    }
    assert!(matches!(regvar_spectrum(5.0, 1.0, 1.0, 100), Err(Error::InfeasibleBeta { .. })));
    assert!(regvar_spectrum(0.1, 1.0, 0.0, 100).is_err());
}

#[test]
fn euler_family_realizes_the_asymptotic() {
    let fam = euler_family(1.0, 1.0, 10_000, 1e-14, 4096).unwrap();
    for j in [10usize, 1000, 10_000] {
        let r = euler_family_r(1.0, 1.0, j);
        let x = (j + 1) as f64;
        assert!((3f64.powf(-2.0 * r - 2.0) * x * x.ln() - 1.0).abs() < 1e-12);
        let m = &fam[j - 1];
        // λ̄₂/λ̄₁ = 3^{−2r−2}
        assert!((m.weights[1] / m.weights[0] / 3f64.powf(-2.0 * r - 2.0) - 1.0).abs() < 1e-12);
        assert!(m.tail_bound < 2e-14 || m.weights.len() == 4096, "{}", m.tail_bound);
    }
    assert_eq!(euler_family_r(1.0, 1.0, 1), 0.0);
}

#[test]
fn normalize_and_io() {
    let s = normalize(&[3.0, 1.0, 0.0, 6.0], 0.0).unwrap();
    assert_eq!(s.weights, vec![0.6, 0.3, 0.1]);
    assert_eq!(normalize(&[1.0, -0.5], 0.0).unwrap_err(), Error::NegativeEigenvalue(-0.5));
    assert_eq!(normalize(&[0.0, 0.0], 0.0).unwrap_err(), Error::EmptySpectrum);

    let back = MarginalSpectrum::from_json(&s.to_json().unwrap()).unwrap();
    assert_eq!(back, s);
    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    let csv = MarginalSpectrum::read_csv(buf.as_slice()).unwrap();
    for (a, b) in csv.weights.iter().zip(&s.weights) {
        assert!((a - b).abs() < 1e-15);
    }
    assert!(MarginalSpectrum::read_csv("k,lambda_bar\n1,abc\n".as_bytes()).is_err());
    assert!(MarginalSpectrum::from_json("{\"weights\": [0.9, 0.9]}").is_err());
}

#[test]
fn truncated_moments_against_direct_sums() {
    let s = euler_spectrum(1.0, 200).unwrap();
    for x in [1.0, 5.0, 20.0] {
        for p in [0, 1, 2] {
            let direct: f64 = s.weights.iter().filter(|&&w| w >= (-x as f64).exp()).map(|&w| (-w.ln()).powi(p) * w).sum();
            let got = truncated_moment(&s, p, x, Some(200));
            assert!((got - direct).abs() < 1e-14 * direct.max(1.0), "p={p} x={x}");
        }
    }
    let stats = spectrum_stats(&MarginalSpectrum::flat(5).unwrap());
    assert!((stats.entropy - 5f64.ln()).abs() < 1e-15 && stats.deviation == 0.0);
}
