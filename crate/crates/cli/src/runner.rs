//! Experiment runner: simulate datasets, fit every task in parallel, then
//! aggregate the written fit files into tables.
//!
//! Layout under `<out>/<experiment-id>/`:
//!
//! * `config.json` - the resolved configuration;
//! * `data/dataset_NNN.csv` (+ `.json` sidecar with the true parameters);
//! * `fits/<method>_dNNN_kK_bB_iII.json` - one [`FitRecord`] per task;
//! * `tables/*.csv` - see [`crate::tables`].

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mhp_core::fit::jittered_init;
use mhp_core::{
    fit_mcmc, fit_sgem, fit_sgld, fit_sgvi, simulate, Budget, EventSequence, FitResult,
    GammaPriorSet, HawkesParams, Method, SampleChain, ScenarioSpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::budget::{BudgetSpec, TimedIterations, WallClock};
use crate::config::ExperimentConfig;
use crate::io::{write_events, write_json, Sidecar};
use crate::seeds::{dataset_seed, init_seed, task_seed};
use crate::tables;

/// Environment variable overriding the worker count from the config.
pub const WORKERS_ENV: &str = "MHP_WORKERS";

/// One fit of the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Task {
    pub dataset: usize,
    pub method: Method,
    pub kappa_index: usize,
    pub kappa: f64,
    pub budget_index: usize,
    pub budget: BudgetSpec,
    pub init: usize,
}

impl Task {
    pub fn file_name(&self) -> String {
        format!(
            "{}_d{:03}_k{}_b{}_i{:02}.json",
            self.method.name(),
            self.dataset,
            self.kappa_index,
            self.budget_index,
            self.init
        )
    }
}

/// What a task leaves on disk: its coordinates and either a result or the
/// reason it failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub dataset: usize,
    pub method: Method,
    pub kappa: f64,
    pub kappa_index: usize,
    pub budget: String,
    pub budget_index: usize,
    pub init: usize,
    pub seed: u64,
    pub result: Option<FitResult>,
    pub error: Option<String>,
}

/// Expands the grid. Full-data samplers ignore `kappa` and the time budgets,
/// so they get one task per (dataset, init) with `kappa = 1`.
pub fn tasks(cfg: &ExperimentConfig) -> Vec<Task> {
    let mut out = Vec::new();
    for dataset in 0..cfg.datasets {
        for &method in &cfg.methods {
            if method.is_stochastic() {
                for (kappa_index, &kappa) in cfg.kappas.iter().enumerate() {
                    for (budget_index, budget) in cfg.budget_specs().into_iter().enumerate() {
                        for init in 0..cfg.inits {
                            out.push(Task {
                                dataset,
                                method,
                                kappa_index,
                                kappa,
                                budget_index,
                                budget,
                                init,
                            });
                        }
                    }
                }
            } else {
                let budget = match cfg.mcmc.max_secs {
                    Some(s) => BudgetSpec::seconds(s),
                    None => BudgetSpec::iterations(cfg.mcmc.iterations),
                };
                for init in 0..cfg.inits {
                    out.push(Task {
                        dataset,
                        method,
                        kappa_index: 0,
                        kappa: 1.0,
                        budget_index: 0,
                        budget,
                        init,
                    });
                }
            }
        }
    }
    out
}

/// Worker count: explicit flag, then [`WORKERS_ENV`], then the config, then
/// the number of CPUs.
pub fn resolve_workers(flag: Option<usize>, cfg: &ExperimentConfig) -> usize {
    flag.or_else(|| {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
    })
    .or(cfg.workers)
    .filter(|&n| n > 0)
    .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs one fit. The budget starts when the fitter starts.
pub fn run_fit(
    cfg: &ExperimentConfig,
    seq: &EventSequence,
    priors: &GammaPriorSet,
    init: &HawkesParams,
    task: &Task,
    seed: u64,
) -> mhp_core::Result<FitResult> {
    run_fit_with_chain(cfg, seq, priors, init, task, seed).map(|(r, _)| r)
}

/// As [`run_fit`], also returning the stored draws of sampling methods.
pub fn run_fit_with_chain(
    cfg: &ExperimentConfig,
    seq: &EventSequence,
    priors: &GammaPriorSet,
    init: &HawkesParams,
    task: &Task,
    seed: u64,
) -> mhp_core::Result<(FitResult, Option<SampleChain>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut budget: Box<dyn Budget + Send> = match cfg.mcmc_variant(task.method) {
        Some(_) => match cfg.mcmc.max_secs {
            Some(s) => Box::new(WallClock::new(s)),
            None => Box::new(TimedIterations::new(u64::MAX)),
        },
        None => task.budget.start(),
    };
    let budget = &mut *budget;
    let (mut result, chain) = match task.method {
        Method::Sgem | Method::SgemC => (
            fit_sgem(
                seq,
                priors,
                &cfg.sgem_config(task.method, task.kappa),
                budget,
                &mut rng,
                init,
            )?,
            None,
        ),
        Method::Sgvi | Method::SgviC => (
            fit_sgvi(
                seq,
                priors,
                &cfg.sgvi_config(task.method, task.kappa),
                budget,
                &mut rng,
                init,
            )?,
            None,
        ),
        Method::Sgld | Method::SgldApx => {
            let (r, c) = fit_sgld(
                seq,
                priors,
                &cfg.sgld_config(task.method, task.kappa),
                budget,
                &mut rng,
                init,
            )?;
            (r, Some(c))
        }
        Method::Mcmc | Method::McmcC | Method::McmcRw => {
            let variant = cfg.mcmc_variant(task.method).expect("full-data method");
            let (r, c) = fit_mcmc(
                seq,
                priors,
                &cfg.mcmc_config(variant),
                budget,
                &mut rng,
                init,
            )?;
            (r, Some(c))
        }
    };
    result.seed = Some(seed);
    Ok((result, chain))
}

/// Simulated dataset `d` of the experiment.
pub fn dataset(
    cfg: &ExperimentConfig,
    d: usize,
) -> mhp_core::Result<(EventSequence, HawkesParams, u64)> {
    let seed = dataset_seed(cfg.seed, d);
    let spec = ScenarioSpec {
        kind: cfg.scenario.kind.clone(),
        horizon: cfg.scenario.horizon,
        seed,
    };
    let (seq, params) = simulate(&spec)?;
    Ok((seq, params, seed))
}

/// Starting point `i` on dataset `d`.
pub fn initial_point(
    cfg: &ExperimentConfig,
    priors: &GammaPriorSet,
    d: usize,
    i: usize,
) -> HawkesParams {
    let mut rng = ChaCha8Rng::seed_from_u64(init_seed(cfg.seed, d, i));
    jittered_init(priors, cfg.init_jitter, &mut rng)
}

pub fn experiment_dir(out: &Path, cfg: &ExperimentConfig) -> PathBuf {
    out.join(cfg.id())
}

/// Runs the whole grid and writes tables; returns the experiment directory.
/// A failing fit is recorded with its reason and the run continues.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, workers: usize) -> Result<PathBuf> {
    cfg.validate()?;
    let dir = experiment_dir(out, cfg);
    std::fs::create_dir_all(dir.join("fits"))
        .with_context(|| format!("creating {}", dir.display()))?;
    write_json(&dir.join("config.json"), cfg)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    pool.install(|| -> Result<()> {
        let data: Vec<(EventSequence, HawkesParams)> = (0..cfg.datasets)
            .into_par_iter()
            .map(|d| -> Result<_> {
                let (seq, params, seed) = dataset(cfg, d)?;
                let csv = dir.join("data").join(format!("dataset_{d:03}.csv"));
                write_events(&csv, &seq)?;
                let meta =
                    Sidecar::for_simulation(&seq, &params, Some(cfg.scenario.kind.clone()), seed);
                write_json(&csv.with_extension("json"), &meta)?;
                Ok((seq, params))
            })
            .collect::<Result<_>>()?;
        let k = data[0].1.dimension();
        let priors = cfg.priors.build(k)?;
        tasks(cfg).par_iter().try_for_each(|task| -> Result<()> {
            let seq = &data[task.dataset].0;
            let init = initial_point(cfg, &priors, task.dataset, task.init);
            let seed = task_seed(
                cfg.seed,
                task.dataset,
                task.method,
                task.kappa_index,
                task.init,
            );
            let (result, error) = match run_fit(cfg, seq, &priors, &init, task, seed) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let record = FitRecord {
                dataset: task.dataset,
                method: task.method,
                kappa: task.kappa,
                kappa_index: task.kappa_index,
                budget: task.budget.label(),
                budget_index: task.budget_index,
                init: task.init,
                seed,
                result,
                error,
            };
            write_json(&dir.join("fits").join(task.file_name()), &record)?;
            Ok(())
        })
    })?;

    tables::aggregate(&dir, cfg)?;
    Ok(dir)
}
