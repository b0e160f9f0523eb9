use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;
use tensorcx::asympt::Scale;
use tensorcx::dist::LevyTriplet;
use tensorcx::*;

use crate::config::{ExperimentConfig, LawSpec, MethodChoice, Normalization, ProblemSpec, RRule, TargetChoice};
use crate::table::{num, text, Table};
use crate::CliError;

/// A table plus the cells that failed to compute; failed cells keep their row with
/// the error message so partial results stay visible.
pub struct Output {
    pub table: Table,
    pub failures: Vec<String>,
    /// Extra files `(name, contents)` written next to the table when `--out` is set.
    pub extras: Vec<(String, Vec<u8>)>,
}

impl Output {
    fn new(table: Table) -> Self {
        Output { table, failures: Vec::new(), extras: Vec::new() }
    }
}

pub enum FamilyKind {
    Degree(MarginalSpectrum),
    Product(Vec<MarginalSpectrum>),
}

pub struct Family {
    pub spec: ProblemSpec,
    pub kind: FamilyKind,
}

fn random_marginals(k_max: usize, d: usize, seed: u64) -> Result<Vec<MarginalSpectrum>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..d)
        .map(|_| {
            let k = rng.gen_range(1..=k_max.max(1));
            let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
            normalize(&raw, 0.0)
        })
        .collect()
}

impl Family {
    pub fn build(spec: &ProblemSpec, d_max: usize, seed: u64) -> Result<Self> {
        let kind = match *spec {
            ProblemSpec::Flat { l } => FamilyKind::Degree(MarginalSpectrum::flat(l)?),
            ProblemSpec::TwoAtom { a } => FamilyKind::Degree(MarginalSpectrum::two_atom(a)?),
            ProblemSpec::Weights { ref weights, tail } => FamilyKind::Degree(normalize(weights, tail)?),
            ProblemSpec::Euler { r, k } => FamilyKind::Degree(euler_spectrum(r, k)?),
            ProblemSpec::Regvar { beta, p, r, k } => FamilyKind::Degree(regvar_spectrum(beta, p, r, k)?),
            ProblemSpec::Loglog { beta, s, k } => FamilyKind::Degree(loglog_spectrum(beta, s, k)?),
            ProblemSpec::EulerFamily { beta, p, tail_tol, k_max } => FamilyKind::Product(euler_family(beta, p, d_max, tail_tol, k_max)?),
            ProblemSpec::Random { k_max } => FamilyKind::Product(random_marginals(k_max, d_max, seed)?),
        };
        Ok(Family { spec: spec.clone(), kind })
    }

    pub fn problem(&self, d: usize) -> Result<TensorProblem> {
        match &self.kind {
            FamilyKind::Degree(s) => TensorProblem::degree(s.clone(), d),
            FamilyKind::Product(list) => TensorProblem::product(list[..d].to_vec()),
        }
    }

    pub fn marginals(&self, d: usize) -> Vec<MarginalSpectrum> {
        match &self.kind {
            FamilyKind::Degree(s) => vec![s.clone(); d],
            FamilyKind::Product(list) => list[..d].to_vec(),
        }
    }

    fn two_atom(&self) -> Option<f64> {
        match self.spec {
            ProblemSpec::TwoAtom { a } => Some(a),
            _ => None,
        }
    }

    /// `(Σ E_j, Σ σ_j²)` over the first `d` marginals.
    fn moments(&self, d: usize) -> (f64, f64) {
        match &self.kind {
            FamilyKind::Degree(s) => {
                let st = spectrum_stats(s);
                (st.entropy * d as f64, st.deviation.powi(2) * d as f64)
            }
            FamilyKind::Product(list) => list[..d].iter().map(spectrum_stats).fold((0.0, 0.0), |(e, v), st| (e + st.entropy, v + st.deviation.powi(2))),
        }
    }
}

fn build_family(cfg: &ExperimentConfig) -> std::result::Result<Family, CliError> {
    let d_max = cfg.d.last().copied().unwrap_or(1) as usize;
    Family::build(cfg.problem()?, d_max, cfg.seed).map_err(|e| CliError::Compute(format!("building problem: {e}")))
}

fn normalization(family: &Family, d: usize, choice: Normalization) -> (f64, f64) {
    let log = (0.0, (d as f64).ln().max(1.0));
    match choice {
        Normalization::Log => log,
        Normalization::Clt => {
            let (e, v) = family.moments(d);
            if e.is_finite() && v.is_finite() {
                (e, v.sqrt().max(1.0))
            } else {
                log
            }
        }
    }
}

/// Brackets for every `ε` at one `d`, building the convolution grid at most once.
fn brackets_at(family: &Family, d: usize, cfg: &ExperimentConfig) -> Vec<Result<ComplexityInterval>> {
    let eps2: Vec<f64> = (1..=cfg.grid.eps2_points).map(|i| i as f64 / (cfg.grid.eps2_points + 1) as f64).collect();
    let mut grid: Option<Result<GriddedCdf>> = None;
    let mut by_grid = |eps: f64| -> Result<ComplexityInterval> {
        let g = grid.get_or_insert_with(|| {
            let (a_d, b_d) = normalization(family, d, cfg.grid.normalization);
            convolve_g(&family.problem(d)?, a_d, b_d, cfg.grid.step, cfg.grid.x_max)
        });
        match g {
            Ok(g) => bracket_complexity(g, eps, &eps2),
            Err(e) => Err(e.clone()),
        }
    };
    let problem = match cfg.method {
        MethodChoice::Exact | MethodChoice::Auto if family.two_atom().is_none() => Some(family.problem(d)),
        _ => None,
    };
    cfg.eps
        .iter()
        .map(|&eps| match (cfg.method, family.two_atom()) {
            (MethodChoice::Binomial, Some(a)) | (MethodChoice::Auto, Some(a)) => binomial_degree_complexity(a, d, eps),
            (MethodChoice::Binomial, None) => Err(Error::UnsupportedRegime("binomial method needs a two-atom spectrum".into())),
            (MethodChoice::Grid, _) => by_grid(eps),
            (MethodChoice::Exact, _) => match problem.as_ref().unwrap() {
                Ok(p) => exact_complexity(p, eps, cfg.n_cap),
                Err(e) => Err(e.clone()),
            },
            (MethodChoice::Auto, None) => match problem.as_ref().unwrap() {
                Ok(p) => match exact_complexity(p, eps, cfg.n_cap) {
                    Err(Error::CapExceeded(_)) => by_grid(eps),
                    other => other,
                },
                Err(e) => Err(e.clone()),
            },
        })
        .collect()
}

fn count_value(c: &Count) -> Value {
    match c.exact {
        Some(n) if n <= u64::MAX as u128 => Value::from(n as u64),
        _ => text(c.to_string()),
    }
}

fn interval_cells(r: &Result<ComplexityInterval>) -> Vec<Value> {
    match r {
        Ok(iv) => vec![count_value(&iv.n_lower), count_value(&iv.n_upper), num(iv.ln_lower), num(iv.ln_upper), text(iv.method.to_string()), Value::Null],
        Err(e) => vec![Value::Null, Value::Null, Value::Null, Value::Null, Value::Null, text(e.to_string())],
    }
}

fn per_d<T: Send>(cfg: &ExperimentConfig, f: impl Fn(usize) -> T + Sync) -> Vec<(u64, T)> {
    cfg.d.par_iter().map(|&d| (d, f(d as usize))).collect()
}

pub fn complexity(cfg: &ExperimentConfig) -> std::result::Result<Output, CliError> {
    cfg.require_d()?;
    cfg.require_eps()?;
    let family = build_family(cfg)?;
    let mut out = Output::new(Table::new(["d", "eps", "n_lower", "n_upper", "ln_lower", "ln_upper", "method", "error"]));
    for (d, cells) in per_d(cfg, |d| brackets_at(&family, d, cfg)) {
        for (eps, r) in cfg.eps.iter().zip(cells) {
            if let Err(e) = &r {
                out.failures.push(format!("d={d} eps={eps}: {e}"));
            }
            let mut row = vec![Value::from(d), num(*eps)];
            row.extend(interval_cells(&r));
            out.table.push(row);
        }
    }
    Ok(out)
}

fn regime_of(family: &Family, cfg: &ExperimentConfig) -> Result<Regime> {
    match (&family.kind, &family.spec) {
        (FamilyKind::Degree(s), _) => classify_degree_regime(s, cfg.fit_window),
        (_, ProblemSpec::EulerFamily { beta, p, .. }) if *p == 1.0 => Regime::dickman_product(*beta),
        _ => Err(Error::UnsupportedRegime("no limit-law predictor for this product family".into())),
    }
}

fn law_context(family: &Family, regime: &Regime, cfg: &ExperimentConfig) -> Result<LawContext> {
    let dickman = match regime.tag {
        RegimeTag::DickmanProduct { beta } => Some(dickman_build(beta, cfg.dickman.x_max, cfg.dickman.h)?),
        _ => None,
    };
    let spectrum = match &family.kind {
        FamilyKind::Degree(s) => Some(s.clone()),
        FamilyKind::Product(_) => None,
    };
    Ok(LawContext { dickman, spectrum })
}

fn tag_name(tag: &RegimeTag) -> String {
    match tag {
        RegimeTag::Flat => "flat".into(),
        RegimeTag::Normal2Mom => "normal_2mom".into(),
        RegimeTag::NormalSv => "normal_sv".into(),
        RegimeTag::Stable { alpha } => format!("stable({alpha:.4})"),
        RegimeTag::SlowVar => "slow_var".into(),
        RegimeTag::DickmanProduct { beta } => format!("dickman_product({beta})"),
    }
}

pub fn classify(cfg: &ExperimentConfig) -> std::result::Result<Output, CliError> {
    let spec = cfg.problem()?;
    let family = Family::build(spec, 1, cfg.seed).map_err(|e| CliError::Compute(e.to_string()))?;
    let regime = regime_of(&family, cfg).map_err(|e| CliError::Compute(e.to_string()))?;
    let fit = regime.svf;
    let mut t = Table::new(["regime", "entropy", "deviation", "alpha", "beta", "svf_c", "svf_log_power", "fit_residual", "window_lo", "window_hi"]);
    let opt = |v: Option<f64>| v.map_or(Value::Null, num);
    t.push(vec![
        text(tag_name(&regime.tag)),
        opt(regime.entropy),
        opt(regime.deviation),
        opt(regime.alpha),
        opt(regime.beta),
        opt(fit.map(|f| f.c)),
        opt(fit.map(|f| f.log_power)),
        opt(fit.map(|f| f.residual)),
        opt(fit.map(|f| f.window.0)),
        opt(fit.map(|f| f.window.1)),
    ]);
    Ok(Output::new(t))
}

pub fn predict(cfg: &ExperimentConfig) -> std::result::Result<Output, CliError> {
    cfg.require_d()?;
    cfg.require_eps()?;
    let family = build_family(cfg)?;
    let regime = regime_of(&family, cfg).map_err(|e| CliError::Compute(e.to_string()))?;
    let ctx = law_context(&family, &regime, cfg).map_err(|e| CliError::Compute(e.to_string()))?;
    let mut out = Output::new(Table::new([
        "d", "eps", "regime", "a_d", "b_d", "q", "scale", "predicted_ln_n", "ln_lower", "ln_upper", "residual", "normalized", "method", "error",
    ]));
    let mut report = AsymptReport { regime: Some(regime.clone()), ..AsymptReport::default() };
    let rows = per_d(cfg, |d| {
        let brackets = brackets_at(&family, d, cfg);
        cfg.eps.iter().zip(brackets).map(|(&eps, br)| (eps, predict_log_complexity(&regime, d as u64, eps, &ctx), br)).collect::<Vec<_>>()
    });
    let mut worst: f64 = 0.0;
    for (d, cells) in rows {
        for (eps, pred, br) in cells {
            let mut row = vec![Value::from(d), num(eps), text(tag_name(&regime.tag))];
            match &pred {
                Ok(p) => row.extend([
                    num(p.a_d),
                    num(p.b_d),
                    num(p.q),
                    text(if p.scale == Scale::Ln { "ln" } else { "lnln" }),
                    num(p.ln_n),
                ]),
                Err(_) => row.extend(std::iter::repeat(Value::Null).take(5)),
            }
            match &br {
                Ok(iv) => row.extend([num(iv.ln_lower), num(iv.ln_upper)]),
                Err(_) => row.extend([Value::Null, Value::Null]),
            }
            let err = match (&pred, &br) {
                (Ok(p), Ok(iv)) => {
                    let r = ReportRow::new(iv, p);
                    worst = worst.max(r.normalized.abs());
                    row.extend([num(r.residual), num(r.normalized), text(iv.method.to_string()), Value::Null]);
                    report.rows.push(r);
                    None
                }
                (Err(e), _) | (_, Err(e)) => {
                    row.extend([Value::Null, Value::Null, Value::Null, text(e.to_string())]);
                    Some(e.to_string())
                }
            };
            if let Some(e) = err {
                out.failures.push(format!("d={d} eps={eps}: {e}"));
            }
            out.table.push(row);
        }
    }
    report.residuals.insert("max_abs_normalized".into(), worst);
    let mut json = Vec::new();
    report.write_json(&mut json).map_err(|e| CliError::Compute(e.to_string()))?;
    out.extras.push(("asympt_report.json".into(), json));
    Ok(out)
}

pub fn criteria(cfg: &ExperimentConfig) -> std::result::Result<Output, CliError> {
    cfg.require_d()?;
    let family = build_family(cfg)?;
    let target = |d: usize| -> std::result::Result<(LevyTriplet, f64, f64, &'static str), CliError> {
        let euler_beta = match family.spec {
            ProblemSpec::EulerFamily { beta, .. } => Some(beta),
            _ => None,
        };
        let (e, v) = family.moments(d);
        let normal = || {
            if v > 0.0 && v.is_finite() && e.is_finite() {
                Ok((LevyTriplet::normal(0.0, 1.0), e, v.sqrt(), "normal"))
            } else {
                Err(CliError::Compute("normal target needs finite entropy and deviation > 0".into()))
            }
        };
        match (cfg.abc.target, euler_beta) {
            (TargetChoice::Auto | TargetChoice::Dickman, Some(beta)) => Ok((LevyTriplet::dickman(beta), 0.0, (d as f64).ln().max(1.0), "dickman")),
            (TargetChoice::Dickman, None) => Err(CliError::Config("dickman target needs an euler_family problem".into())),
            (TargetChoice::Auto | TargetChoice::Normal, _) => normal(),
        }
    };
    let mut out = Output::new(Table::new([
        "d", "target", "a_d", "b_d", "residual_a", "residual_b", "residual_c", "c_at_smallest_tau", "mass_beyond_n", "partial_sum", "growth", "label",
    ]));
    let rows = per_d(cfg, |d| -> std::result::Result<Vec<Value>, CliError> {
        let (tr, a_d, b_d, name) = target(d)?;
        let ms = family.marginals(d);
        let r = check_conditions_abc(&ms, a_d, b_d, &tr, cfg.abc.n, &cfg.abc.tau, &cfg.abc.x);
        let b = boundedness_diagnostic(&ms);
        let growth = serde_json::to_value(b.growth).unwrap_or(Value::Null);
        Ok(vec![
            Value::from(d as u64),
            text(name),
            num(a_d),
            num(b_d),
            num(r.residual_a),
            num(r.residual_b),
            num(r.residual_c),
            num(r.c_at_smallest_tau),
            num(r.mass_beyond_n),
            num(b.partial_sum),
            growth,
            text(r.label),
        ])
    });
    for (_, row) in rows {
        out.table.push(row?);
    }
    Ok(out)
}

pub fn dist(cfg: &ExperimentConfig) -> std::result::Result<Output, CliError> {
    let law = cfg.dist.law.as_ref().ok_or_else(|| CliError::Config("no law given (config 'dist.law')".into()))?;
    if let Some(u) = cfg.dist.levels.iter().find(|u| !(**u > 0.0 && **u < 1.0)) {
        return Err(CliError::Config(format!("quantile level {u} outside (0,1)")));
    }
    let compute = |e: Error| CliError::Compute(e.to_string());
    let (cdf, quantile): (Box<dyn Fn(f64) -> Result<f64>>, Box<dyn Fn(f64) -> Result<f64>>) = match *law {
        LawSpec::Dickman { beta } => {
            let l = dickman_build(beta, cfg.dickman.x_max, cfg.dickman.h).map_err(compute)?;
            let l2 = l.clone();
            (Box::new(move |x| Ok(dickman_cdf(&l, x))), Box::new(move |u| dickman_quantile(&l2, u)))
        }
        LawSpec::Stable { alpha, rho, beta_skew, mu } => {
            let l = StableLaw::new(alpha, rho, beta_skew, mu).map_err(compute)?;
            (Box::new(move |x| stable_cdf(&l, x)), Box::new(move |u| stable_quantile(&l, u)))
        }
        LawSpec::Normal => (Box::new(|x| Ok(normal_cdf(x))), Box::new(normal_quantile)),
    };
    let mut out = Output::new(Table::new(["kind", "u", "x"]));
    for &u in &cfg.dist.levels {
        let q = quantile(u).map_err(compute)?;
        out.table.push(vec![text("quantile"), num(u), num(q)]);
    }
    for &x in &cfg.dist.points {
        let c = cdf(x).map_err(compute)?;
        out.table.push(vec![text("cdf"), num(c), num(x)]);
    }
    Ok(out)
}

pub fn tract(cfg: &ExperimentConfig) -> std::result::Result<Output, CliError> {
    let rule = cfg.tract.rule.clone().ok_or_else(|| CliError::Config("no r-rule given (config 'tract.rule')".into()))?;
    if cfg.tract.d_max == 0 {
        return Err(CliError::Config("tract.d_max must be at least 1".into()));
    }
    let r_of = move |j: usize| match rule {
        RRule::Euler { beta, p } => euler_family_r(beta, p, j),
        RRule::Linear { slope } => slope * j as f64,
        RRule::Constant { r } => r,
    };
    let rep = euler_tractability_diagnostic(r_of, cfg.tract.d_max, &cfg.tract.tau);
    let mut headers = vec!["d".to_string(), "r".into(), "qpt_statistic".into()];
    headers.extend(cfg.tract.tau.iter().map(|t| format!("spt_sum_tau_{t}")));
    headers.extend(["verdict".to_string(), "label".into()]);
    let verdict = serde_json::to_value(rep.verdict).unwrap_or(Value::Null);
    let mut t = Table { headers, rows: Vec::new() };
    for row in &rep.rows {
        let mut cells = vec![Value::from(row.d as u64), num(row.r), num(row.qpt_statistic)];
        cells.extend(row.spt_sums.iter().map(|&s| num(s)));
        cells.extend([verdict.clone(), text(rep.label.clone())]);
        t.push(cells);
    }
    Ok(Output::new(t))
}

pub fn report(cfg: &ExperimentConfig) -> std::result::Result<Output, CliError> {
    let path = cfg.results.as_deref().ok_or_else(|| CliError::Config("missing results: pass --results PATH".into()))?;
    let rep = read_results(path)?;
    let mut t = Table::new(["d", "eps", "ln_n_lower", "ln_n_upper", "predicted", "residual", "normalized"]);
    for r in &rep.rows {
        t.push(vec![Value::from(r.d), num(r.eps), num(r.ln_n_lower), num(r.ln_n_upper), num(r.predicted), num(r.residual), num(r.normalized)]);
    }
    let mut plot = Vec::new();
    t.write_plot_data(&mut plot).map_err(|e| CliError::Compute(e.to_string()))?;
    let regime = rep.regime.as_ref().map_or("unknown".to_string(), |r| tag_name(&r.tag));
    let residuals: BTreeMap<&String, &f64> = rep.residuals.iter().collect();
    eprintln!("regime {regime}; {} rows; residuals {residuals:?}", rep.rows.len());
    let mut out = Output::new(t);
    out.extras.push(("report.dat".into(), plot));
    Ok(out)
}

fn read_results(path: &Path) -> std::result::Result<AsymptReport, CliError> {
    if !path.exists() {
        return Err(CliError::Config(format!("missing results: {} does not exist", path.display())));
    }
    AsymptReport::read_json(path).map_err(|e| CliError::Config(format!("malformed results {}: {e}", path.display())))
}
