//! Acceptance suite: ten criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always
//! printed. `MHP_ACCEPTANCE=AC1,AC5` restricts the run to a subset. The two
//! grid criteria read their budgets from the environment:
//!
//! * `MHP_AC6_BUDGET_SECS` (default 5), `MHP_AC6_INITS` (default 8);
//! * `MHP_AC7_BUDGET_SECS` (default 60), `MHP_AC7_INITS` (default 2);
//! * `MHP_WORKERS` sets the parallelism of both grids.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use mhp_cli::budget::BudgetUnit;
use mhp_cli::config::{ExperimentConfig, ScenarioConfig};
use mhp_cli::runner::{resolve_workers, run_experiment};
use mhp_cli::tables::{lookup, read_tidy, TidyRow};
use mhp_core::compensator::CompensatorMode;
use mhp_core::fit::IterationBudget;
use mhp_core::likelihood::{complete_log_likelihood, intensity, log_likelihood};
use mhp_core::math::log_sum_exp;
use mhp_core::metrics::{info_loss_bound, info_loss_ratio, time_rescaling};
use mhp_core::quad::integrate;
use mhp_core::sgld::{grad_potential, potential, to_log};
use mhp_core::simulate::simulate_hawkes;
use mhp_core::{
    draw_window, fit_mcmc, fit_sgld, fit_sgvi, simulate, Branching, CompensatorPolicy,
    EventSequence, GammaPriorSet, HawkesParams, Matrix, McmcConfig, McmcVariant, Method,
    ScenarioKind, ScenarioSpec, SgldConfig, SgviConfig, StepSchedule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

type Criterion = (
    &'static str,
    &'static str,
    Option<Duration>,
    fn() -> Outcome,
);

fn main() {
    let only: Option<Vec<String>> = std::env::var("MHP_ACCEPTANCE").ok().map(|v| {
        v.split(',')
            .map(|s| s.trim().to_ascii_uppercase())
            .collect()
    });
    let criteria: [Criterion; 10] = [
        (
            "AC1",
            "likelihood exactness",
            Some(Duration::from_secs(10)),
            ac1_likelihood_exactness,
        ),
        (
            "AC2",
            "branching marginalization",
            Some(Duration::from_secs(1)),
            ac2_branching_marginalization,
        ),
        (
            "AC3",
            "approximation ordering",
            Some(Duration::from_secs(1)),
            ac3_approximation_ordering,
        ),
        (
            "AC4",
            "gradient correctness",
            Some(Duration::from_secs(30)),
            ac4_gradient_correctness,
        ),
        (
            "AC5",
            "conjugate oracle",
            Some(Duration::from_secs(300)),
            ac5_conjugate_oracle,
        ),
        (
            "AC6",
            "desk-scale estimation ordering",
            None,
            ac6_estimation_ordering,
        ),
        ("AC7", "desk-scale RBODL property", None, ac7_rbodl_property),
        (
            "AC8",
            "information loss bound",
            Some(Duration::from_secs(5)),
            ac8_information_loss,
        ),
        (
            "AC9",
            "time-rescaling goodness of fit",
            Some(Duration::from_secs(60)),
            ac9_time_rescaling,
        ),
        ("AC10", "determinism", None, ac10_determinism),
    ];
    let mut failed = Vec::new();
    for (id, name, limit, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.iter().any(|x| x == id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| Outcome::new(false, format!("panicked: {}", panic_message(&e))));
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = outcome.pass && in_time;
        let timing = match limit {
            Some(l) => format!("{:.2} s (limit {} s)", elapsed.as_secs_f64(), l.as_secs()),
            None => format!("{:.2} s", elapsed.as_secs_f64()),
        };
        println!(
            "{id} {name}: {} | {} | {timing}",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria passed");
    } else {
        println!("acceptance: failed {}", failed.join(", "));
        std::process::exit(1);
    }
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown".into())
}

fn env_or<T: std::str::FromStr>(name: &str, default: T) -> T {
    std::env::var(name)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(default)
}

fn random_params(rng: &mut ChaCha8Rng, k: usize) -> HawkesParams {
    let mu = (0..k).map(|_| rng.random_range(0.2..1.5)).collect();
    let alpha = Matrix::from_fn(k, |_, _| rng.random_range(0.0..0.8 / k as f64));
    let beta = Matrix::from_fn(k, |_, _| rng.random_range(0.5..6.0));
    HawkesParams::new(mu, alpha, beta).unwrap()
}

/// First `n` events, observed up to the next event (or the old horizon).
fn truncated(seq: &EventSequence, n: usize) -> EventSequence {
    let n = n.min(seq.len());
    let horizon = if n < seq.len() {
        seq.times()[n]
    } else {
        seq.horizon()
    };
    EventSequence::new(
        seq.times()[..n].to_vec(),
        seq.dims()[..n].to_vec(),
        horizon,
        seq.dimension(),
    )
    .unwrap()
}

/// Log-likelihood with the compensator integrated numerically between
/// consecutive events.
fn quadrature_log_likelihood(seq: &EventSequence, p: &HawkesParams) -> f64 {
    let mut ll: f64 = seq
        .iter()
        .map(|(t, d)| intensity(seq, p, d, t).unwrap().ln())
        .sum();
    let mut knots = vec![0.0];
    knots.extend_from_slice(seq.times());
    knots.push(seq.horizon());
    for w in knots.windows(2).filter(|w| w[1] > w[0]) {
        for l in 0..seq.dimension() {
            let r = integrate(
                |t| intensity(seq, p, l, t).unwrap(),
                w[0],
                w[1],
                1e-14,
                1e-13,
                200,
            );
            assert!(r.converged, "quadrature did not converge");
            ll -= r.value;
        }
    }
    ll
}

fn ac1_likelihood_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut max_n = 0;
    for case in 0..20 {
        let k = 1 + case % 3;
        let p = random_params(&mut rng, k);
        let seq = truncated(&simulate_hawkes(&p, 40.0, &mut rng).unwrap(), 50);
        max_n = max_n.max(seq.len());
        let ours = log_likelihood(&seq, &p, CompensatorMode::Exact).value;
        worst = worst.max((ours - quadrature_log_likelihood(&seq, &p)).abs());
    }
    Outcome::new(
        worst < 1e-8,
        format!("20 sequences, n <= {max_n}, max |exact - quadrature| = {worst:.2e} (tol 1e-8)"),
    )
}

fn ac2_branching_marginalization() -> Outcome {
    let seq = EventSequence::new(vec![0.4, 1.1, 1.9], vec![0, 1, 0], 3.0, 2).unwrap();
    let p = HawkesParams::new(
        vec![0.6, 0.9],
        Matrix::from_rows(vec![vec![0.3, 0.5], vec![0.2, 0.4]]).unwrap(),
        Matrix::from_rows(vec![vec![2.0, 1.5], vec![3.0, 0.8]]).unwrap(),
    )
    .unwrap();
    let mut terms = Vec::new();
    for p2 in [1, 0] {
        for p3 in [2, 0, 1] {
            let b = Branching::new(vec![0, p2, p3], &seq).unwrap();
            terms.push(complete_log_likelihood(&seq, &b, &p, CompensatorMode::Exact).unwrap());
        }
    }
    let lse = log_sum_exp(&terms);
    let ll = log_likelihood(&seq, &p, CompensatorMode::Exact).value;
    let err = (lse - ll).abs();
    Outcome::new(
        terms.len() == 6 && err < 1e-10,
        format!(
            "{} configurations, |logsumexp - log-likelihood| = {err:.2e} (tol 1e-10)",
            terms.len()
        ),
    )
}

fn ac3_approximation_ordering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut violations = 0;
    for _ in 0..10_000 {
        let beta: f64 = rng.random_range(0.05..20.0);
        let dt: f64 = rng.random_range(0.0..5.0 / beta);
        let bc = CompensatorMode::BoundaryCorrected { delta: 1.0 / beta };
        if bc.factor_error(beta, dt) > CompensatorMode::Lewis.factor_error(beta, dt) {
            violations += 1;
        }
    }
    let e = (-1.0f64).exp();
    let mut crossover: f64 = 0.0;
    for _ in 0..1000 {
        let beta: f64 = rng.random_range(0.05..20.0);
        let at = 1.0 / beta;
        let (r0, ra) = mhp_core::approx_errors(beta, at);
        let bc = CompensatorMode::BoundaryCorrected { delta: at };
        crossover = crossover
            .max((r0 - e).abs())
            .max((ra - e).abs())
            .max((bc.factor_error(beta, at) - e).abs())
            .max((CompensatorMode::Lewis.factor_error(beta, at) - e).abs());
    }
    Outcome::new(
        violations == 0 && crossover < 1e-12,
        format!("10000 pairs, {violations} violations; max |error - 1/e| at dt = 1/beta: {crossover:.2e} (tol 1e-12)"),
    )
}

fn ac4_gradient_correctness() -> Outcome {
    let (seq, _) = simulate(&ScenarioSpec {
        kind: ScenarioKind::Dense3,
        horizon: 500.0,
        seed: 404,
    })
    .unwrap();
    let priors = GammaPriorSet::standard(3);
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    let points = 120;
    for i in 0..points {
        let w = draw_window(&seq, 0.05, &mut rng).unwrap();
        let mode = if i % 2 == 0 {
            CompensatorMode::Exact
        } else {
            CompensatorMode::BoundaryCorrected { delta: 0.25 }
        };
        let p = HawkesParams::new(
            (0..3).map(|_| rng.random_range(0.2..1.0)).collect(),
            Matrix::from_fn(3, |_, _| rng.random_range(0.05..0.4)),
            Matrix::from_fn(3, |_, _| rng.random_range(1.0..8.0)),
        )
        .unwrap();
        let xi = to_log(&p);
        let g = grad_potential(&w, &xi, &priors, mode);
        let h = 1e-5;
        let fd: Vec<f64> = (0..xi.len())
            .map(|j| {
                let mut up = xi.clone();
                let mut dn = xi.clone();
                up[j] += h;
                dn[j] -= h;
                (potential(&w, &up, &priors, mode) - potential(&w, &dn, &priors, mode)) / (2.0 * h)
            })
            .collect();
        let scale = fd.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let err = g
            .iter()
            .zip(&fd)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / scale;
        worst = worst.max(err);
    }
    Outcome::new(
        worst < 1e-5,
        format!("{points} points (Exact and corrected), max relative error {worst:.2e} (tol 1e-5)"),
    )
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (
        m,
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0),
    )
}

fn ac5_conjugate_oracle() -> Outcome {
    let truth = HawkesParams::uniform(1, 1.0, 0.0, 4.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let seq = simulate_hawkes(&truth, 500.0, &mut rng).unwrap();
    // alpha = 0 is encoded by a prior concentrated at zero (mean 1e-6), so
    // every event is an immigrant and the mu posterior is conjugate
    let priors = GammaPriorSet::uniform(1, 2.0, 4.0, 1.0, 1e6, 2.0, 0.5).unwrap();
    let shape = priors.a[0] + seq.len() as f64;
    let rate = priors.b[0] + seq.horizon();
    let (mean, var) = (shape / rate, shape / (rate * rate));
    let init = HawkesParams::uniform(1, 0.8, 1e-6, 4.0).unwrap();

    // the default decay shrinks the step so fast that a few hundred thousand
    // draws hold only a handful of independent ones; a nearly flat step of
    // about 3e-5 mixes in ~70 iterations while its bias stays under 1%
    let mut sgld = SgldConfig::new(0.5, CompensatorPolicy::Exact);
    sgld.schedule = Some(StepSchedule::new(3e-5 * 1e5f64.powf(0.51), 1e5, 0.51).unwrap());
    sgld.capacity = 50_000;
    let (_, chain) = fit_sgld(
        &seq,
        &priors,
        &sgld,
        &mut IterationBudget(2_000_000),
        &mut rng,
        &init,
    )
    .unwrap();
    let mu: Vec<f64> = chain.kept().iter().map(|d| d[0].exp()).collect();
    let (sm, sv) = mean_var(&mu);

    let mut mcmc = McmcConfig::new(McmcVariant::Lewis);
    mcmc.iterations = 50_000;
    mcmc.capacity = 50_000;
    let (_, chain) = fit_mcmc(
        &seq,
        &priors,
        &mcmc,
        &mut IterationBudget(u64::MAX),
        &mut rng,
        &init,
    )
    .unwrap();
    let mu: Vec<f64> = chain.kept().iter().map(|d| d[0].exp()).collect();
    let (mm, mv) = mean_var(&mu);

    let vi = SgviConfig::new(0.1, CompensatorPolicy::Lewis);
    let fit = fit_sgvi(
        &seq,
        &priors,
        &vi,
        &mut IterationBudget(20_000),
        &mut rng,
        &init,
    )
    .unwrap();
    let vm = fit.estimate.mu[0];

    let rel = |x: f64, y: f64| (x / y - 1.0).abs();
    let checks = [
        rel(sm, mean) < 0.05,
        rel(sv, var) < 0.05,
        rel(mm, mean) < 0.05,
        rel(mv, var) < 0.05,
        rel(vm, mean) < 0.10,
    ];
    Outcome::new(
        checks.iter().all(|&c| c),
        format!(
            "n = {}, Gamma mean {mean:.4} var {var:.3e}; SGLD {:+.1}% / {:+.1}%, MCMC {:+.1}% / {:+.1}%, SGVI mean {:+.1}%",
            seq.len(),
            100.0 * (sm / mean - 1.0),
            100.0 * (sv / var - 1.0),
            100.0 * (mm / mean - 1.0),
            100.0 * (mv / var - 1.0),
            100.0 * (vm / mean - 1.0)
        ),
    )
}

fn grid_dir() -> tempfile::TempDir {
    tempfile::Builder::new()
        .prefix("mhp-acceptance")
        .tempdir()
        .unwrap()
}

fn per_dataset(rows: &[TidyRow], method: Method, metric: &str) -> Vec<(String, f64)> {
    rows.iter()
        .filter(|r| r.method == method.name() && r.metric == metric)
        .map(|r| (r.dataset.clone(), r.value))
        .collect()
}

fn ac6_estimation_ordering() -> Outcome {
    let budget: f64 = env_or("MHP_AC6_BUDGET_SECS", 5.0);
    let inits: usize = env_or("MHP_AC6_INITS", 8);
    let cfg = ExperimentConfig {
        scenario: ScenarioConfig {
            kind: ScenarioKind::Dense3,
            horizon: 200.0,
        },
        methods: vec![Method::Sgvi, Method::SgviC, Method::Sgld, Method::McmcC],
        kappas: vec![0.05],
        budgets: vec![budget],
        inits,
        datasets: 10,
        seed: 6,
        ..ExperimentConfig::default()
    };
    let out = grid_dir();
    let dir = run_experiment(&cfg, out.path(), resolve_workers(None, &cfg)).unwrap();
    let rows = read_tidy(&dir.join("tables").join("metrics.csv")).unwrap();
    let summary = read_tidy(&dir.join("tables").join("summary.csv")).unwrap();

    let vi = per_dataset(&rows, Method::Sgvi, "rmise");
    let vic = per_dataset(&rows, Method::SgviC, "rmise");
    let wins = vic
        .iter()
        .filter(|(d, x)| vi.iter().any(|(e, y)| e == d && x <= y))
        .count();
    let acr = |m: Method| {
        lookup(
            &summary,
            m,
            "mean",
            if m.is_stochastic() { 0.05 } else { 1.0 },
            "acr",
        )
        .unwrap_or(f64::NAN)
    };
    let (acr_sgld, acr_sgvi, acr_mcmc) = (acr(Method::Sgld), acr(Method::Sgvi), acr(Method::McmcC));
    let pass = wins >= 7 && acr_sgld > acr_sgvi && (0.85..=1.0).contains(&acr_mcmc);
    Outcome::new(
        pass,
        format!(
            "{budget} s budgets, {inits} inits: RMISE(SGVI-c) <= RMISE(SGVI) on {wins}/10; ACR SGLD {acr_sgld:.3} vs SGVI {acr_sgvi:.3}; ACR MCMC-c {acr_mcmc:.3}"
        ),
    )
}

fn ac7_rbodl_property() -> Outcome {
    let budget: f64 = env_or("MHP_AC7_BUDGET_SECS", 60.0);
    let inits: usize = env_or("MHP_AC7_INITS", 2);
    let cfg = ExperimentConfig {
        scenario: ScenarioConfig {
            kind: ScenarioKind::Dense3,
            horizon: 1000.0,
        },
        methods: vec![Method::Sgem, Method::Sgvi, Method::Sgld],
        kappas: vec![0.01, 0.05, 0.4],
        budgets: vec![budget],
        inits,
        datasets: 1,
        seed: 7,
        ..ExperimentConfig::default()
    };
    let out = grid_dir();
    let dir = run_experiment(&cfg, out.path(), resolve_workers(None, &cfg)).unwrap();
    let summary = read_tidy(&dir.join("tables").join("summary.csv")).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for m in [Method::Sgem, Method::Sgvi, Method::Sgld] {
        let r05 = lookup(&summary, m, "mean", 0.05, "rbodl").unwrap_or(f64::NAN);
        let r40 = lookup(&summary, m, "mean", 0.4, "rbodl").unwrap_or(f64::NAN);
        pass &= r05 >= r40;
        parts.push(format!("{m} {r05:.5} vs {r40:.5}"));
    }
    Outcome::new(
        pass,
        format!(
            "{budget} s budgets, {inits} inits, RBODL(0.05) vs RBODL(0.4): {}",
            parts.join("; ")
        ),
    )
}

fn ac8_information_loss() -> Outcome {
    let delta = 0.25;
    let mut violations = Vec::new();
    let mut worst_margin = f64::INFINITY;
    for beta in [1.0, 4.0, 10.0] {
        for t in [250.0, 500.0, 1000.0, 2000.0] {
            let ratio = info_loss_ratio(beta, delta, t).unwrap();
            let bound = info_loss_bound(beta, delta, t);
            worst_margin = worst_margin.min(bound - ratio);
            if ratio > bound {
                violations.push(format!("beta {beta} T {t}"));
            }
        }
    }
    let b = info_loss_bound(4.0, delta, 1000.0);
    Outcome::new(
        violations.is_empty() && b <= 3.125e-4,
        format!("12 grid points, {} violations, min margin {worst_margin:.3e}; bound(beta 4, T 1000) = {b:e} (<= 3.125e-4)", violations.len()),
    )
}

/// Seeds 1, 2 and 3, fixed before looking at any result.
fn ac9_time_rescaling() -> Outcome {
    let mut pmin: f64 = 1.0;
    let mut parts = Vec::new();
    for seed in [1u64, 2, 3] {
        let (seq, truth) = simulate(&ScenarioSpec {
            kind: ScenarioKind::Dense3,
            horizon: 1000.0,
            seed,
        })
        .unwrap();
        let dims = time_rescaling(&seq, &truth).unwrap();
        let ps: Vec<String> = dims
            .iter()
            .map(|d| format!("{:.3}", d.ks.p_value))
            .collect();
        pmin = dims.iter().fold(pmin, |m, d| m.min(d.ks.p_value));
        parts.push(format!("seed {seed}: [{}]", ps.join(", ")));
    }
    Outcome::new(
        pmin > 0.01,
        format!(
            "Dense3 T = 1000, KS p-values {}; min {pmin:.3} (> 0.01)",
            parts.join(" ")
        ),
    )
}

fn tables_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir.join("tables"))
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn ac10_determinism() -> Outcome {
    let cfg = ExperimentConfig {
        scenario: ScenarioConfig {
            kind: ScenarioKind::Dense3,
            horizon: 100.0,
        },
        methods: vec![
            Method::Sgem,
            Method::SgemC,
            Method::Sgvi,
            Method::SgviC,
            Method::Sgld,
            Method::SgldApx,
            Method::McmcC,
        ],
        kappas: vec![0.05, 0.2],
        budgets: vec![200.0],
        budget_unit: BudgetUnit::Iterations,
        inits: 2,
        datasets: 2,
        mcmc: mhp_cli::config::McmcSettings {
            iterations: 300,
            burn_in: 100,
            max_secs: None,
        },
        seed: 10,
        ..ExperimentConfig::default()
    };
    let (a, b) = (grid_dir(), grid_dir());
    let da = run_experiment(&cfg, a.path(), 1).unwrap();
    let db = run_experiment(&cfg, b.path(), 2).unwrap();
    let (ta, tb) = (tables_bytes(&da), tables_bytes(&db));
    let rows = ta
        .iter()
        .map(|(_, t)| t.iter().filter(|&&c| c == b'\n').count())
        .sum::<usize>();
    Outcome::new(
        !ta.is_empty() && ta == tb,
        format!("{} tables ({rows} lines) byte-identical across reruns with 1 and 2 workers (iteration budgets)", ta.len()),
    )
}
