//! Experiment configuration: one JSON document, every field optional.
//!
//! Defaults reproduce the synthetic study: Dense3 on `T = 1000`, 50
//! datasets, 16 starting points, `kappa` in {0.01, 0.05, 0.1, 0.2, 0.3, 0.4},
//! budgets of 1, 3 and 5 minutes, priors `a = 2, b = 4, e = 2, f = 4, w = 2,
//! s = 0.5`, steps `rho0 = 0.02, tau1 = 1, tau2 = 0.51` and `delta = 0.25`.

use std::path::Path;

use mhp_core::{
    CompensatorPolicy, DeltaPolicy, GammaPriorSet, McmcConfig, McmcVariant, Method, ScenarioKind,
    SgemConfig, SgldConfig, SgviConfig, StepSchedule,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::budget::{BudgetSpec, BudgetUnit};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub horizon: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            kind: ScenarioKind::Dense3,
            horizon: 1000.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub a: f64,
    pub b: f64,
    pub e: f64,
    pub f: f64,
    pub w: f64,
    pub s: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            a: 2.0,
            b: 4.0,
            e: 2.0,
            f: 4.0,
            w: 2.0,
            s: 0.5,
        }
    }
}

impl PriorConfig {
    pub fn build(&self, k: usize) -> mhp_core::Result<GammaPriorSet> {
        GammaPriorSet::uniform(k, self.a, self.b, self.e, self.f, self.w, self.s)
    }
}

/// Full-data samplers run a fixed number of sweeps rather than a time budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcSettings {
    pub iterations: u64,
    pub burn_in: u64,
    /// Optional wall-clock cap in seconds.
    pub max_secs: Option<f64>,
}

impl Default for McmcSettings {
    fn default() -> Self {
        McmcSettings {
            iterations: 15_000,
            burn_in: 5_000,
            max_secs: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub methods: Vec<Method>,
    pub kappas: Vec<f64>,
    /// Denominator of RBODL; the first entry of `kappas` when unset.
    pub reference_kappa: Option<f64>,
    pub budgets: Vec<f64>,
    pub budget_unit: BudgetUnit,
    pub inits: usize,
    /// Starting points are the prior means times `exp(init_jitter z)`.
    pub init_jitter: f64,
    pub datasets: usize,
    pub priors: PriorConfig,
    pub schedule: StepSchedule,
    /// SGLD steps; `rho0 = 0.1 / T` with the default decay when unset.
    pub sgld_schedule: Option<StepSchedule>,
    pub delta: DeltaPolicy,
    pub mcmc: McmcSettings,
    pub level: f64,
    /// Score RMISE only where the true excitation is non-zero.
    pub mask_zero_truth: bool,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: ScenarioConfig::default(),
            methods: vec![
                Method::Sgem,
                Method::SgemC,
                Method::Sgvi,
                Method::SgviC,
                Method::Sgld,
            ],
            kappas: vec![0.01, 0.05, 0.1, 0.2, 0.3, 0.4],
            reference_kappa: None,
            budgets: vec![60.0, 180.0, 300.0],
            budget_unit: BudgetUnit::Seconds,
            inits: 16,
            init_jitter: 0.5,
            datasets: 50,
            priors: PriorConfig::default(),
            schedule: StepSchedule::default(),
            sgld_schedule: None,
            delta: DeltaPolicy::default(),
            mcmc: McmcSettings::default(),
            level: 0.95,
            mask_zero_truth: true,
            seed: 0,
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.inits < 1 {
            return bad("inits must be at least 1".into());
        }
        if self.datasets < 1 {
            return bad("datasets must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        if self.kappas.is_empty() {
            return bad("kappas must not be empty".into());
        }
        if let Some(k) = self.kappas.iter().find(|&&k| !(k > 0.0 && k <= 1.0)) {
            return bad(format!("kappa {k} is outside (0, 1]"));
        }
        if let Some(r) = self.reference_kappa {
            if !self.kappas.contains(&r) {
                return bad(format!("reference kappa {r} is not among the kappas"));
            }
        }
        if self.budgets.is_empty() {
            return bad("budgets must not be empty".into());
        }
        if let Some(b) = self.budgets.iter().find(|&&b| !(b > 0.0 && b.is_finite())) {
            return bad(format!("budget {b} must be positive"));
        }
        if self.budget_unit == BudgetUnit::Iterations
            && self.budgets.iter().any(|b| b.fract() != 0.0)
        {
            return bad("iteration budgets must be whole numbers".into());
        }
        if !(self.scenario.horizon > 0.0 && self.scenario.horizon.is_finite()) {
            return bad(format!(
                "horizon {} must be positive",
                self.scenario.horizon
            ));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("level {} is outside (0, 1)", self.level));
        }
        if !(self.init_jitter >= 0.0 && self.init_jitter.is_finite()) {
            return bad(format!(
                "init_jitter {} must be non-negative",
                self.init_jitter
            ));
        }
        let check = |r: mhp_core::Result<()>| r.map_err(|e| ConfigError::Invalid(e.to_string()));
        check(self.priors.build(1).map(|_| ()))?;
        check(self.schedule.validate())?;
        if let Some(s) = self.sgld_schedule {
            check(s.validate())?;
        }
        check(self.delta.validate())?;
        if self.methods.iter().any(|m| !m.is_stochastic()) {
            check(self.mcmc_config(McmcVariant::Lewis).validate())?;
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        Ok(())
    }

    pub fn reference_kappa(&self) -> f64 {
        self.reference_kappa.unwrap_or(self.kappas[0])
    }

    pub fn budget_specs(&self) -> Vec<BudgetSpec> {
        self.budgets
            .iter()
            .map(|&value| BudgetSpec {
                unit: self.budget_unit,
                value,
            })
            .collect()
    }

    /// Experiment id: leading 16 hex digits of the SHA-256 of the canonical
    /// JSON form. The worker count does not affect results and is excluded.
    pub fn id(&self) -> String {
        let mut canonical = self.clone();
        canonical.workers = None;
        let json = serde_json::to_vec(&canonical).expect("config serialises");
        hex::encode(Sha256::digest(&json))[..16].to_string()
    }

    pub fn compensator(&self, method: Method) -> CompensatorPolicy {
        if method.is_corrected() {
            CompensatorPolicy::Corrected(self.delta)
        } else if matches!(method, Method::Sgld | Method::McmcRw) {
            CompensatorPolicy::Exact
        } else {
            CompensatorPolicy::Lewis
        }
    }

    pub fn sgem_config(&self, method: Method, kappa: f64) -> SgemConfig {
        SgemConfig {
            schedule: self.schedule,
            ..SgemConfig::new(kappa, self.compensator(method))
        }
    }

    pub fn sgvi_config(&self, method: Method, kappa: f64) -> SgviConfig {
        SgviConfig {
            schedule: self.schedule,
            level: self.level,
            ..SgviConfig::new(kappa, self.compensator(method))
        }
    }

    pub fn sgld_config(&self, method: Method, kappa: f64) -> SgldConfig {
        SgldConfig {
            schedule: self.sgld_schedule,
            level: self.level,
            ..SgldConfig::new(kappa, self.compensator(method))
        }
    }

    pub fn mcmc_config(&self, variant: McmcVariant) -> McmcConfig {
        McmcConfig {
            iterations: self.mcmc.iterations,
            burn_in: self.mcmc.burn_in,
            level: self.level,
            ..McmcConfig::new(variant)
        }
    }

    pub fn mcmc_variant(&self, method: Method) -> Option<McmcVariant> {
        match method {
            Method::Mcmc => Some(McmcVariant::Lewis),
            Method::McmcC => Some(McmcVariant::Corrected(self.delta)),
            Method::McmcRw => Some(McmcVariant::RandomWalkBeta),
            _ => None,
        }
    }
}
