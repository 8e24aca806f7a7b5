//! `mhp`: simulate, fit and evaluate multivariate Hawkes process models.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use mhp_core::metrics::{estimation_report, info_loss_bound, info_loss_ratio, time_rescaling};
use mhp_core::{FitResult, HawkesParams, Method, ScenarioKind, SparsityLevel};
use serde_json::Value;

use mhp_cli::budget::BudgetSpec;
use mhp_cli::config::ExperimentConfig;
use mhp_cli::io::{
    read_events, read_json, write_chain_csv, write_events, write_json, IngestReport, Shape, Sidecar,
};
use mhp_cli::runner::{self, FitRecord, Task};
use mhp_cli::seeds::task_seed;
use mhp_cli::tables::{aggregate, write_tidy, TidyRow};

#[derive(Parser)]
#[command(
    name = "mhp",
    version,
    about = "Bayesian inference for multivariate Hawkes processes"
)]
struct Cli {
    /// Experiment configuration (JSON); defaults apply to every missing field.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel workers; falls back to MHP_WORKERS, the config, then the CPU count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate datasets of a scenario as event CSV plus JSON sidecars.
    Simulate {
        /// dense3, sparse10-high, sparse10-medium or sparse10-low.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value_t = 1)]
        datasets: usize,
    },
    /// Fit one method to an event file.
    Fit {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        horizon: Option<f64>,
        /// Number of dimensions K.
        #[arg(long)]
        dims: Option<usize>,
        #[arg(long, default_value = "SGVI-c")]
        method: Method,
        #[arg(long, default_value_t = 0.05)]
        kappa: f64,
        /// Wall-clock budget in seconds.
        #[arg(long, conflicts_with = "iterations")]
        budget_secs: Option<f64>,
        /// Iteration budget (reproducible).
        #[arg(long)]
        iterations: Option<u64>,
        /// Index of the starting point.
        #[arg(long, default_value_t = 0)]
        init: usize,
    },
    /// Run an experiment grid and write fits and tables.
    Experiment,
    /// Score a fit against true parameters, or re-aggregate an experiment.
    Metrics {
        #[arg(long, requires = "truth", conflicts_with = "experiment")]
        fit: Option<PathBuf>,
        /// Sidecar or parameter JSON with the true parameters.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Experiment directory whose tables are rebuilt from its fits.
        #[arg(long)]
        experiment: Option<PathBuf>,
    },
    /// Time-rescaling QQ pairs and KS tests for fitted or true parameters.
    Qq {
        #[arg(long)]
        events: PathBuf,
        /// Fit, sidecar or parameter JSON.
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        dims: Option<usize>,
    },
    /// Information loss ratio of the boundary correction against its bound.
    InfoLoss {
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 4.0, 10.0])]
        betas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [250.0, 500.0, 1000.0, 2000.0])]
        horizons: Vec<f64>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.command {
        Command::Simulate {
            scenario,
            horizon,
            datasets,
        } => {
            if let Some(s) = scenario {
                cfg.scenario.kind = parse_scenario(&s)?;
            }
            if let Some(h) = horizon {
                cfg.scenario.horizon = h;
            }
            simulate(&cfg, datasets, &cli.out)
        }
        Command::Fit {
            events,
            horizon,
            dims,
            method,
            kappa,
            budget_secs,
            iterations,
            init,
        } => {
            let budget = match (budget_secs, iterations) {
                (_, Some(n)) => BudgetSpec::iterations(n),
                (Some(s), None) => BudgetSpec::seconds(s),
                (None, None) => BudgetSpec {
                    unit: cfg.budget_unit,
                    value: cfg.budgets[0],
                },
            };
            fit(
                &cfg,
                &events,
                Shape {
                    horizon,
                    dimension: dims,
                },
                method,
                kappa,
                budget,
                init,
                &cli.out,
            )
        }
        Command::Experiment => {
            let workers = runner::resolve_workers(cli.workers, &cfg);
            let dir = runner::run_experiment(&cfg, &cli.out, workers)?;
            println!("{}", dir.display());
            Ok(())
        }
        Command::Metrics {
            fit,
            truth,
            experiment,
        } => match (fit, truth, experiment) {
            (_, _, Some(dir)) => {
                let cfg: ExperimentConfig = read_json(&dir.join("config.json"))?;
                aggregate(&dir, &cfg)?;
                println!("{}", dir.join("tables").display());
                Ok(())
            }
            (Some(fit), Some(truth), None) => score(&cfg, &fit, &truth, &cli.out),
            _ => bail!("pass --experiment <dir>, or --fit <file> with --truth <file>"),
        },
        Command::Qq {
            events,
            params,
            horizon,
            dims,
        } => qq(
            &events,
            &params,
            Shape {
                horizon,
                dimension: dims,
            },
            &cli.out,
        ),
        Command::InfoLoss {
            delta,
            betas,
            horizons,
        } => info_loss(delta, &betas, &horizons, &cli.out),
    }
}

fn parse_scenario(s: &str) -> Result<ScenarioKind> {
    Ok(match s.to_ascii_lowercase().as_str() {
        "dense3" => ScenarioKind::Dense3,
        "sparse10-high" => ScenarioKind::Sparse10(SparsityLevel::High),
        "sparse10-medium" => ScenarioKind::Sparse10(SparsityLevel::Medium),
        "sparse10-low" => ScenarioKind::Sparse10(SparsityLevel::Low),
        other => bail!("unknown scenario {other:?}"),
    })
}

fn simulate(cfg: &ExperimentConfig, datasets: usize, out: &Path) -> Result<()> {
    for d in 0..datasets {
        let (seq, params, seed) = runner::dataset(cfg, d)?;
        let path = out.join(format!("dataset_{d:03}.csv"));
        write_events(&path, &seq)?;
        write_json(
            &path.with_extension("json"),
            &Sidecar::for_simulation(&seq, &params, Some(cfg.scenario.kind.clone()), seed),
        )?;
        println!(
            "{}: n = {}, counts = {:?}",
            path.display(),
            seq.len(),
            seq.counts()
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn fit(
    cfg: &ExperimentConfig,
    events: &Path,
    shape: Shape,
    method: Method,
    kappa: f64,
    budget: BudgetSpec,
    init: usize,
    out: &Path,
) -> Result<()> {
    let seq =
        read_events(events, shape).with_context(|| format!("reading {}", events.display()))?;
    eprintln!("{}", serde_json::to_string(&IngestReport::of(&seq))?);
    let priors = cfg.priors.build(seq.dimension())?;
    let start = runner::initial_point(cfg, &priors, 0, init);
    let task = Task {
        dataset: 0,
        method,
        kappa_index: 0,
        kappa,
        budget_index: 0,
        budget,
        init,
    };
    let seed = task_seed(cfg.seed, 0, method, 0, init);
    let (result, chain) = runner::run_fit_with_chain(cfg, &seq, &priors, &start, &task, seed)?;
    fs::create_dir_all(out)?;
    write_json(&out.join("fit.json"), &result)?;
    if let Some(chain) = chain {
        write_chain_csv(fs::File::create(out.join("chain.csv"))?, &chain)?;
    }
    println!(
        "{}: {} iterations, log-likelihood {}, converged {}",
        method, result.iterations, result.log_likelihood, result.converged
    );
    Ok(())
}

/// Parameters from a fit, fit record, sidecar or bare parameter document.
fn load_params(path: &Path) -> Result<HawkesParams> {
    let v: Value = read_json(path)?;
    let found = if v.get("mu").is_some() {
        Some(v)
    } else if let Some(p) = v.get("params").filter(|p| !p.is_null()) {
        Some(p.clone())
    } else if let Some(e) = v.get("estimate") {
        Some(e.clone())
    } else {
        v.get("result").and_then(|r| r.get("estimate")).cloned()
    };
    let value = found.with_context(|| format!("{}: no parameters found", path.display()))?;
    let params: HawkesParams = serde_json::from_value(value)?;
    params.validate()?;
    Ok(params)
}

fn load_fit(path: &Path) -> Result<FitResult> {
    let v: Value = read_json(path)?;
    if v.get("result").is_some() {
        let rec: FitRecord = serde_json::from_value(v)?;
        rec.result.with_context(|| {
            format!(
                "{}: the fit failed: {}",
                path.display(),
                rec.error.unwrap_or_default()
            )
        })
    } else {
        Ok(serde_json::from_value(v)?)
    }
}

fn score(cfg: &ExperimentConfig, fit: &Path, truth: &Path, out: &Path) -> Result<()> {
    let result = load_fit(fit)?;
    let truth = load_params(truth)?;
    let rep = estimation_report(&truth, &result, cfg.mask_zero_truth)?;
    let mut rows = Vec::new();
    let mut push = |metric: &str, value: Option<f64>| {
        if let Some(value) = value {
            rows.push(TidyRow {
                method: result.method.name().to_string(),
                dataset: "-".to_string(),
                kappa: f64::NAN,
                budget: "-".to_string(),
                metric: metric.to_string(),
                value,
            });
        }
    };
    push("odl", Some(result.log_likelihood));
    push("rmise", Some(rep.rmise));
    push("mae_mu", Some(rep.mae_mu));
    push("is", rep.is95);
    push("acr", rep.acr);
    push("aiw", rep.aiw);
    fs::create_dir_all(out)?;
    write_tidy(&out.join("metrics.csv"), &rows)?;
    for r in &rows {
        println!("{} = {}", r.metric, r.value);
    }
    Ok(())
}

fn qq(events: &Path, params: &Path, shape: Shape, out: &Path) -> Result<()> {
    let seq = read_events(events, shape)?;
    let params = load_params(params)?;
    let dims = time_rescaling(&seq, &params)?;
    fs::create_dir_all(out)?;
    let mut pairs = csv::Writer::from_path(out.join("qq.csv"))?;
    pairs.write_record(["dim", "empirical", "theoretical"])?;
    let mut ks = csv::Writer::from_path(out.join("ks.csv"))?;
    ks.write_record(["dim", "n", "statistic", "p_value"])?;
    for d in &dims {
        for (e, t) in d.qq_pairs() {
            pairs.write_record([d.dim.to_string(), e.to_string(), t.to_string()])?;
        }
        ks.write_record([
            d.dim.to_string(),
            d.ks.n.to_string(),
            d.ks.statistic.to_string(),
            d.ks.p_value.to_string(),
        ])?;
        println!(
            "dim {}: n = {}, D = {:.4}, p = {:.4}",
            d.dim, d.ks.n, d.ks.statistic, d.ks.p_value
        );
    }
    pairs.flush()?;
    ks.flush()?;
    Ok(())
}

fn info_loss(delta: f64, betas: &[f64], horizons: &[f64], out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("info_loss.csv"))?;
    w.write_record(["beta", "horizon", "delta", "ratio", "bound"])?;
    for &beta in betas {
        for &t in horizons {
            let ratio = info_loss_ratio(beta, delta, t)?;
            let bound = info_loss_bound(beta, delta, t);
            w.write_record([
                beta.to_string(),
                t.to_string(),
                delta.to_string(),
                ratio.to_string(),
                bound.to_string(),
            ])?;
            println!("beta = {beta}, T = {t}: ratio = {ratio:.6e}, bound = {bound:.6e}");
        }
    }
    w.flush()?;
    Ok(())
}
