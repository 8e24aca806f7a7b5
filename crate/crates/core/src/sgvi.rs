//! Stochastic-gradient mean-field variational inference.
//!
//! The posterior is approximated by independent Gamma factors for every
//! entry of `mu`, `alpha` and `beta` and a categorical factor per event's
//! parent. Each iteration sets the window's categorical factors optimally
//! and moves the global Gamma parameters a step `rho_r` toward the optimum
//! implied by the window.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::branching::{BranchingProbs, BranchingSummary, ResponsibilityKernel};
use crate::compensator::{boundary_sums, CompensatorMode, CompensatorPolicy};
use crate::error::Result;
use crate::fit::{Budget, FitFlags, FitResult, Interval, Method, ParamIntervals, TracePoint};
use crate::gamma::Gamma;
use crate::likelihood::log_likelihood;
use crate::math::{exp, ln};
use crate::matrix::Matrix;
use crate::model::{EventSequence, GammaPriorSet, HawkesParams};
use crate::schedule::StepSchedule;
use crate::sgem::Plateau;
use crate::subsample::{draw_window, WindowDraw};

/// Gamma variational factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    pub mu: Vec<Gamma>,
    pub alpha: Matrix<Gamma>,
    pub beta: Matrix<Gamma>,
}

impl VariationalState {
    /// Factors with the given shape whose means equal `point`.
    pub fn from_point(point: &HawkesParams, shape: f64) -> Self {
        let g = |m: f64| Gamma {
            shape,
            rate: shape / m,
        };
        VariationalState {
            mu: point.mu.iter().map(|&m| g(m)).collect(),
            alpha: point.alpha.map(|&a| g(a.max(1e-8))),
            beta: point.beta.map(|&b| g(b)),
        }
    }

    pub fn dimension(&self) -> usize {
        self.mu.len()
    }

    pub fn mean(&self) -> HawkesParams {
        HawkesParams {
            mu: self.mu.iter().map(Gamma::mean).collect(),
            alpha: self.alpha.map(Gamma::mean),
            beta: self.beta.map(Gamma::mean),
        }
    }

    /// Equal-tailed intervals of the marginals.
    pub fn intervals(&self, level: f64) -> ParamIntervals {
        let tail = 0.5 * (1.0 - level);
        let iv = |g: &Gamma| Interval {
            lo: g.quantile(tail),
            hi: g.quantile(1.0 - tail),
        };
        ParamIntervals {
            mu: self.mu.iter().map(iv).collect(),
            alpha: self.alpha.map(iv),
            beta: self.beta.map(iv),
        }
    }

    /// Responsibility weights `exp(E ln mu)` and
    /// `exp(E ln alpha + E ln beta - E[beta] dt)`.
    pub fn kernel(&self) -> ResponsibilityKernel {
        let k = self.dimension();
        ResponsibilityKernel {
            base: self.mu.iter().map(|g| exp(g.mean_ln())).collect(),
            scale: Matrix::from_fn(k, |a, b| {
                exp(self.alpha[(a, b)].mean_ln() + self.beta[(a, b)].mean_ln())
            }),
            rate: self.beta.map(Gamma::mean),
        }
    }

    pub fn is_valid(&self) -> bool {
        let ok =
            |g: &Gamma| g.shape > 0.0 && g.rate > 0.0 && g.shape.is_finite() && g.rate.is_finite();
        self.mu.iter().all(ok) && self.alpha.iter().all(ok) && self.beta.iter().all(ok)
    }
}

/// Optimal categorical parent factors for the window's events (dense).
pub fn local_update(window: &WindowDraw, state: &VariationalState) -> BranchingProbs {
    state.kernel().rows(&window.events)
}

/// Moves every Gamma factor a step `rho` toward the window's optimum.
///
/// `beta` is updated first because the `alpha` rate uses the updated `beta`
/// factor through `E[exp(-beta x)] = (1 + x / rate)^(-shape)`.
pub fn global_update(
    window: &WindowDraw,
    state: &VariationalState,
    summary: &BranchingSummary,
    rho: f64,
    priors: &GammaPriorSet,
    mode: CompensatorMode,
) -> VariationalState {
    let seq = &window.events;
    let k = seq.dimension();
    let inv = 1.0 / window.kappa;
    let horizon = seq.horizon();
    let blend = |old: f64, target: f64| (1.0 - rho) * old + rho * target;
    let boundary = mode.delta().map(|d| boundary_sums(seq, d).0);

    let beta = Matrix::from_fn(k, |a, b| {
        let old = state.beta[(a, b)];
        let mut rate_target = inv * summary.lag[(a, b)] + priors.s[(a, b)];
        if let Some(lag) = &boundary {
            rate_target += inv * state.alpha[(a, b)].mean() * lag[a];
        }
        Gamma {
            shape: blend(
                old.shape,
                inv * summary.offspring[(a, b)] + priors.w[(a, b)],
            ),
            rate: blend(old.rate, rate_target),
        }
    });

    // sum_{d_j = k} E[1 - exp(-beta x_j)] under the new beta factor
    let mut expected_exact = Matrix::from_elem(k, 0.0);
    for (t, src) in seq.iter() {
        for l in 0..k {
            expected_exact[(src, l)] += 1.0 - beta[(src, l)].laplace(horizon - t);
        }
    }
    let alpha = Matrix::from_fn(k, |a, b| {
        let old = state.alpha[(a, b)];
        Gamma {
            shape: blend(
                old.shape,
                inv * summary.offspring[(a, b)] + priors.e[(a, b)],
            ),
            rate: blend(old.rate, inv * expected_exact[(a, b)] + priors.f[(a, b)]),
        }
    });
    let mu = (0..k)
        .map(|l| Gamma {
            shape: blend(state.mu[l].shape, inv * summary.immigrants[l] + priors.a[l]),
            rate: window.full_horizon + priors.b[l],
        })
        .collect();
    VariationalState { mu, alpha, beta }
}

fn expected_ln_prior(prior: Gamma, q: &Gamma) -> f64 {
    prior.shape * ln(prior.rate) - crate::math::ln_gamma(prior.shape)
        + (prior.shape - 1.0) * q.mean_ln()
        - prior.rate * q.mean()
}

/// Evidence lower bound for the full data under `mode` (dense; small `n`).
///
/// The expected complete-data log-likelihood uses `E[alpha] E[S(beta)]`
/// with `S` linear in `beta` for the Lewis and boundary-corrected modes and
/// the Gamma Laplace transform for the exact mode.
pub fn elbo(
    seq: &EventSequence,
    state: &VariationalState,
    probs: &BranchingProbs,
    priors: &GammaPriorSet,
    mode: CompensatorMode,
) -> f64 {
    let k = seq.dimension();
    let summary = probs.summary(seq);
    let horizon = seq.horizon();
    let mut acc = 0.0;
    for l in 0..k {
        let q = &state.mu[l];
        acc += summary.immigrants[l] * q.mean_ln() - q.mean() * horizon;
        acc += expected_ln_prior(priors.mu_prior(l), q) + q.entropy();
    }
    let counts = seq.counts();
    let boundary = mode.delta().map(|d| boundary_sums(seq, d));
    for a in 0..k {
        for b in 0..k {
            let (qa, qb) = (&state.alpha[(a, b)], &state.beta[(a, b)]);
            acc += summary.offspring[(a, b)] * (qa.mean_ln() + qb.mean_ln())
                - qb.mean() * summary.lag[(a, b)];
            let s = match mode {
                CompensatorMode::Lewis => counts[a] as f64,
                CompensatorMode::BoundaryCorrected { .. } => {
                    let (lag, cnt) = boundary.as_ref().expect("boundary sums");
                    counts[a] as f64 - (cnt[a] as f64 - qb.mean() * lag[a])
                }
                CompensatorMode::Exact => seq
                    .iter()
                    .filter(|&(_, d)| d == a)
                    .map(|(t, _)| 1.0 - qb.laplace(horizon - t))
                    .sum(),
            };
            acc -= qa.mean() * s;
            acc += expected_ln_prior(priors.alpha_prior(a, b), qa) + qa.entropy();
            acc += expected_ln_prior(priors.beta_prior(a, b), qb) + qb.entropy();
        }
    }
    for row in &probs.rows {
        for &p in row {
            if p > 0.0 {
                acc -= p * ln(p);
            }
        }
    }
    acc
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgviConfig {
    pub schedule: StepSchedule,
    pub kappa: f64,
    pub compensator: CompensatorPolicy,
    pub trace_every: u64,
    /// Shape of the initial factors (their means equal the init point).
    pub init_shape: f64,
    /// Credible level of the reported intervals.
    pub level: f64,
    /// Stop when the largest relative change of the posterior means over
    /// `patience` iterations falls below this.
    pub tolerance: f64,
    pub patience: u64,
}

impl SgviConfig {
    pub fn new(kappa: f64, compensator: CompensatorPolicy) -> Self {
        SgviConfig {
            schedule: StepSchedule::default(),
            kappa,
            compensator,
            trace_every: 0,
            init_shape: 2.0,
            level: 0.95,
            tolerance: 1e-6,
            patience: 50,
        }
    }
}

/// Runs SGVI; the point estimate is the variational mean.
pub fn fit_sgvi<R: Rng + ?Sized, B: Budget + ?Sized>(
    seq: &EventSequence,
    priors: &GammaPriorSet,
    config: &SgviConfig,
    budget: &mut B,
    rng: &mut R,
    init: &HawkesParams,
) -> Result<FitResult> {
    fit_sgvi_state(seq, priors, config, budget, rng, init).map(|(_, result)| result)
}

/// As [`fit_sgvi`], also returning the final variational factors.
pub fn fit_sgvi_state<R: Rng + ?Sized, B: Budget + ?Sized>(
    seq: &EventSequence,
    priors: &GammaPriorSet,
    config: &SgviConfig,
    budget: &mut B,
    rng: &mut R,
    init: &HawkesParams,
) -> Result<(VariationalState, FitResult)> {
    config.schedule.validate()?;
    config.compensator.validate()?;
    init.validate()?;
    priors.validate()?;
    let method = if matches!(config.compensator, CompensatorPolicy::Corrected(_)) {
        Method::SgviC
    } else {
        Method::Sgvi
    };
    let mut flags = FitFlags::default();
    let mut state = VariationalState::from_point(init, config.init_shape);
    // the update pins the mu rate at T + b; starting it there keeps the mean
    // at the init instead of collapsing to init_shape / (T + b)
    for (l, g) in state.mu.iter_mut().enumerate() {
        let rate = seq.horizon() + priors.b[l];
        *g = Gamma {
            shape: init.mu[l] * rate,
            rate,
        };
    }
    let mut trace = Vec::new();
    let mut plateaus: Vec<Plateau> = (0..init.flatten().len())
        .map(|_| Plateau::new(config.patience, config.tolerance))
        .collect();
    let mut converged = false;
    let mut r: u64 = 0;
    loop {
        if r > 0 && !budget.proceed(r) {
            break;
        }
        let window = draw_window(seq, config.kappa, rng)?;
        let rho = config.schedule.step(r).min(1.0);
        let mode = config.compensator.resolve(&state.beta.map(Gamma::mean));
        let summary = state.kernel().summarize(&window.events);
        state = global_update(&window, &state, &summary, rho, priors, mode);
        r += 1;
        let mean = state.mean();
        if config.trace_every > 0 && r.is_multiple_of(config.trace_every) {
            let ll = log_likelihood(seq, &mean, CompensatorMode::Exact);
            flags.underflow |= ll.underflow;
            trace.push(TracePoint {
                iteration: r,
                log_likelihood: ll.value,
            });
        }
        let mut all = true;
        for (p, v) in plateaus.iter_mut().zip(mean.flatten()) {
            all &= p.push(v);
        }
        if all {
            converged = true;
            break;
        }
    }
    let estimate = state.mean();
    let ll = log_likelihood(seq, &estimate, CompensatorMode::Exact);
    flags.underflow |= ll.underflow;
    let result = FitResult {
        method,
        intervals: Some(state.intervals(config.level)),
        estimate,
        iterations: r,
        converged,
        log_likelihood: ll.value,
        trace,
        flags,
        elapsed_secs: budget.elapsed_secs(),
        seed: None,
    };
    Ok((state, result))
}
