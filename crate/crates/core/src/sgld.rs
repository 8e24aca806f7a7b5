//! Stochastic-gradient Langevin dynamics in log-parameter space.
//!
//! The sampler works on `xi = ln theta` and targets the potential
//! `U(xi) = -kappa^-1 ln p(window | theta) - ln p(theta) - ln |d theta / d xi|`,
//! taking unadjusted Langevin steps with a decaying step size.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chain::SampleChain;
use crate::compensator::{CompensatorMode, CompensatorPolicy};
use crate::error::Result;
use crate::fit::{Budget, FitFlags, FitResult, Method, TracePoint};
use crate::likelihood::log_likelihood;
use crate::math::{abs, exp, ln, sqrt};
use crate::model::{EventSequence, GammaPriorSet, HawkesParams};
use crate::scan::scan;
use crate::schedule::StepSchedule;
use crate::subsample::{draw_window, WindowDraw};

/// Chains whose log-parameters leave `[-50, 50]` are declared diverged.
pub const DIVERGENCE_BOUND: f64 = 50.0;

/// Steps never shrink below this.
pub const STEP_FLOOR: f64 = 1e-12;

/// Log-parameters, flattened as `(mu, alpha, beta)`.
pub fn to_log(params: &HawkesParams) -> Vec<f64> {
    params.flatten().into_iter().map(ln).collect()
}

pub fn from_log(k: usize, xi: &[f64]) -> Result<HawkesParams> {
    let v: Vec<f64> = xi.iter().map(|&x| exp(x)).collect();
    HawkesParams::unflatten(k, &v)
}

fn unpack(k: usize, xi: &[f64]) -> HawkesParams {
    let v: Vec<f64> = xi.iter().map(|&x| exp(x)).collect();
    HawkesParams::unflatten(k, &v).expect("length checked by caller")
}

/// The potential `U(xi)` up to an additive constant.
pub fn potential(
    window: &WindowDraw,
    xi: &[f64],
    priors: &GammaPriorSet,
    mode: CompensatorMode,
) -> f64 {
    let k = window.events.dimension();
    let p = unpack(k, xi);
    let ll = log_likelihood(&window.events, &p, mode).value;
    // Gamma log-density plus the log-Jacobian xi: shape * xi - rate * theta
    let mut prior = 0.0;
    for l in 0..k {
        prior += priors.a[l] * xi[l] - priors.b[l] * p.mu[l];
    }
    for a in 0..k {
        for b in 0..k {
            let i = a * k + b;
            prior += priors.e[(a, b)] * xi[k + i] - priors.f[(a, b)] * p.alpha[(a, b)];
            prior += priors.w[(a, b)] * xi[k + k * k + i] - priors.s[(a, b)] * p.beta[(a, b)];
        }
    }
    -ll / window.kappa - prior
}

/// Gradient of [`potential`] with respect to `xi`, in O(n K^2).
pub fn grad_potential(
    window: &WindowDraw,
    xi: &[f64],
    priors: &GammaPriorSet,
    mode: CompensatorMode,
) -> Vec<f64> {
    let seq = &window.events;
    let k = seq.dimension();
    let kk = k * k;
    let p = unpack(k, xi);
    let inv = 1.0 / window.kappa;
    let mut g = alloc::vec![0.0; k + 2 * kk];

    scan(seq, &p.beta, true, |v| {
        let l = v.dim;
        let mut lambda = p.mu[l];
        for src in 0..k {
            lambda += p.alpha[(src, l)] * p.beta[(src, l)] * v.a[src];
        }
        g[l] -= inv * p.mu[l] / lambda;
        for src in 0..k {
            if v.a[src] == 0.0 {
                continue;
            }
            let (al, be) = (p.alpha[(src, l)], p.beta[(src, l)]);
            let i = src * k + l;
            g[k + i] -= inv * al * be * v.a[src] / lambda;
            g[k + kk + i] -= inv * al * be * (v.a[src] - be * v.d[src]) / lambda;
        }
    });

    let horizon = seq.horizon();
    for l in 0..k {
        g[l] += p.mu[l] * (inv * horizon + priors.b[l]) - priors.a[l];
    }
    // compensator: alpha * S and alpha * beta * dS/dbeta
    let mut s = alloc::vec![0.0; kk];
    let mut ds = alloc::vec![0.0; kk];
    for (t, src) in seq.iter() {
        let x = horizon - t;
        for l in 0..k {
            let be = p.beta[(src, l)];
            s[src * k + l] += mode.factor(be, x);
            ds[src * k + l] += mode.factor_dbeta(be, x);
        }
    }
    for a in 0..k {
        for b in 0..k {
            let i = a * k + b;
            let (al, be) = (p.alpha[(a, b)], p.beta[(a, b)]);
            g[k + i] += inv * al * s[i] + priors.f[(a, b)] * al - priors.e[(a, b)];
            g[k + kk + i] += inv * al * be * ds[i] + priors.s[(a, b)] * be - priors.w[(a, b)];
        }
    }
    g
}

/// One unadjusted Langevin move `xi - (rho / 2) grad + sqrt(rho) z`.
pub fn sgld_step<R: Rng + ?Sized>(xi: &[f64], grad: &[f64], rho: f64, rng: &mut R) -> Vec<f64> {
    let sd = sqrt(rho);
    xi.iter()
        .zip(grad)
        .map(|(&x, &g)| {
            let z: f64 = rng.sample(StandardNormal);
            x - 0.5 * rho * g + sd * z
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgldConfig {
    /// `None` uses `rho0 = 0.1 / T` with the default decay. Because the
    /// window log-likelihood is scaled by `1 / kappa`, this gives the same
    /// drift as `rho0 = 0.1 / (T kappa)` applied to the unscaled window
    /// gradient.
    pub schedule: Option<StepSchedule>,
    pub kappa: f64,
    /// `Exact` for SGLD, a corrected policy for SGLD-apx.
    pub compensator: CompensatorPolicy,
    pub trace_every: u64,
    /// Maximum number of stored draws.
    pub capacity: usize,
    pub level: f64,
    /// Leading fraction of the iterations discarded as burn-in.
    pub burn_in_fraction: f64,
}

impl SgldConfig {
    pub fn new(kappa: f64, compensator: CompensatorPolicy) -> Self {
        SgldConfig {
            schedule: None,
            kappa,
            compensator,
            trace_every: 0,
            capacity: 10_000,
            level: 0.95,
            burn_in_fraction: 0.5,
        }
    }

    pub fn schedule_for(&self, horizon: f64) -> StepSchedule {
        self.schedule.unwrap_or(StepSchedule {
            rho0: 0.1 / horizon,
            ..StepSchedule::default()
        })
    }
}

/// Runs SGLD; the point estimate is the posterior mean of `exp(xi)` after
/// burn-in and intervals are empirical percentiles.
pub fn fit_sgld<R: Rng + ?Sized, B: Budget + ?Sized>(
    seq: &EventSequence,
    priors: &GammaPriorSet,
    config: &SgldConfig,
    budget: &mut B,
    rng: &mut R,
    init: &HawkesParams,
) -> Result<(FitResult, SampleChain)> {
    let schedule = config.schedule_for(seq.horizon());
    schedule.validate()?;
    config.compensator.validate()?;
    init.validate()?;
    priors.validate()?;
    let method = if matches!(config.compensator, CompensatorPolicy::Exact) {
        Method::Sgld
    } else {
        Method::SgldApx
    };
    let k = seq.dimension();
    let mut flags = FitFlags::default();
    let mut xi = to_log(init);
    let mut chain = SampleChain::new(k, config.capacity);
    let mut trace = Vec::new();
    let mut shrink = 1.0;
    let mut r: u64 = 0;
    loop {
        if r > 0 && !budget.proceed(r) {
            break;
        }
        let window = draw_window(seq, config.kappa, rng)?;
        let params = unpack(k, &xi);
        let mode = config.compensator.resolve(&params.beta);
        let grad = grad_potential(&window, &xi, priors, mode);
        let rho = (shrink * schedule.step(r)).max(STEP_FLOOR);
        if grad.iter().all(|g| g.is_finite()) {
            xi = sgld_step(&xi, &grad, rho, rng);
        } else {
            flags.non_finite_gradient = true;
            shrink *= 0.5;
        }
        r += 1;
        if xi.iter().any(|x| !(abs(*x) <= DIVERGENCE_BOUND)) {
            flags.diverged = true;
            break;
        }
        chain.offer(r, &xi);
        if config.trace_every > 0 && r.is_multiple_of(config.trace_every) {
            let ll = log_likelihood(seq, &unpack(k, &xi), CompensatorMode::Exact);
            flags.underflow |= ll.underflow;
            trace.push(TracePoint {
                iteration: r,
                log_likelihood: ll.value,
            });
        }
    }
    let first_kept = (config.burn_in_fraction * r as f64) as u64 + 1;
    chain.finish(first_kept, r, &xi);
    if flags.diverged {
        let estimate = init.clone();
        let result = FitResult {
            method,
            estimate,
            intervals: None,
            iterations: r,
            converged: false,
            log_likelihood: f64::NAN,
            trace,
            flags,
            elapsed_secs: budget.elapsed_secs(),
            seed: None,
        };
        return Ok((result, chain));
    }
    let estimate = chain.mean()?;
    let ll = log_likelihood(seq, &estimate, CompensatorMode::Exact);
    flags.underflow |= ll.underflow;
    let result = FitResult {
        method,
        intervals: Some(chain.intervals(config.level)?),
        estimate,
        iterations: r,
        converged: false,
        log_likelihood: ll.value,
        trace,
        flags,
        elapsed_secs: budget.elapsed_secs(),
        seed: None,
    };
    Ok((result, chain))
}
