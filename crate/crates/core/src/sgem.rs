//! Stochastic-gradient EM for MAP estimation.
//!
//! Each iteration draws a window, computes the branching responsibilities
//! under the current parameters, blends the window's (kappa^-1 scaled)
//! expected sufficient statistics into a running average with step `rho_r`,
//! and maximises the resulting surrogate in closed form.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::branching::ResponsibilityKernel;
use crate::compensator::{boundary_sums, pair_factors, CompensatorMode, CompensatorPolicy};
use crate::error::Result;
use crate::fit::{Budget, FitFlags, FitResult, Method, TracePoint};
use crate::likelihood::log_likelihood;
use crate::math::{abs, ln};
use crate::matrix::Matrix;
use crate::model::{EventSequence, GammaPriorSet, HawkesParams};
use crate::schedule::StepSchedule;
use crate::subsample::{draw_window, WindowDraw};

/// Running expected sufficient statistics of the complete-data likelihood.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    pub alpha1: Matrix,
    pub alpha2: Matrix,
    pub beta1: Matrix,
    pub beta2: Matrix,
}

impl SufficientStats {
    pub fn zeros(k: usize) -> Self {
        SufficientStats {
            mu1: alloc::vec![0.0; k],
            mu2: alloc::vec![0.0; k],
            alpha1: Matrix::from_elem(k, 0.0),
            alpha2: Matrix::from_elem(k, 0.0),
            beta1: Matrix::from_elem(k, 0.0),
            beta2: Matrix::from_elem(k, 0.0),
        }
    }

    fn blend(&self, innovation: &SufficientStats, rho: f64) -> SufficientStats {
        let mix = |old: &[f64], new: &[f64]| -> Vec<f64> {
            old.iter()
                .zip(new)
                .map(|(o, n)| (1.0 - rho) * o + rho * n)
                .collect()
        };
        let mixm = |old: &Matrix, new: &Matrix| -> Matrix {
            let v = mix(old.as_slice(), new.as_slice());
            Matrix::from_fn(old.dim(), |a, b| v[a * old.dim() + b])
        };
        SufficientStats {
            mu1: mix(&self.mu1, &innovation.mu1),
            mu2: innovation.mu2.clone(),
            alpha1: mixm(&self.alpha1, &innovation.alpha1),
            alpha2: mixm(&self.alpha2, &innovation.alpha2),
            beta1: mixm(&self.beta1, &innovation.beta1),
            beta2: mixm(&self.beta2, &innovation.beta2),
        }
    }
}

/// The window's own expected statistics, scaled to the full horizon
/// (the `rho = 1` target of the recursion).
pub fn estep_innovation(
    window: &WindowDraw,
    params: &HawkesParams,
    mode: CompensatorMode,
) -> SufficientStats {
    let seq = &window.events;
    let k = seq.dimension();
    let inv = 1.0 / window.kappa;
    let summary = ResponsibilityKernel::from_params(params).summarize(seq);
    // the alpha statistic always uses the exact compensator factor
    let exact = pair_factors(seq, &params.beta, CompensatorMode::Exact);
    let mut beta2 = summary.lag.clone();
    if let Some(delta) = mode.delta() {
        let (lag, _) = boundary_sums(seq, delta);
        for src in 0..k {
            for l in 0..k {
                beta2[(src, l)] += params.alpha[(src, l)] * lag[src];
            }
        }
    }
    let scale = |m: &Matrix| m.map(|v| inv * v);
    SufficientStats {
        mu1: summary.immigrants.iter().map(|v| inv * v).collect(),
        mu2: alloc::vec![window.full_horizon; k],
        alpha1: scale(&summary.offspring),
        alpha2: scale(&exact),
        beta1: scale(&summary.offspring),
        beta2: scale(&beta2),
    }
}

/// One stochastic E-step: `s <- (1 - rho) s + rho * innovation`, with
/// `s_mu2` pinned to the full horizon.
pub fn sgem_estep(
    window: &WindowDraw,
    params: &HawkesParams,
    stats: &SufficientStats,
    rho: f64,
    mode: CompensatorMode,
) -> SufficientStats {
    stats.blend(&estep_innovation(window, params, mode), rho)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MStep {
    pub params: HawkesParams,
    /// Some numerator was non-positive and the entry was floored.
    pub clamped: bool,
}

/// Closed-form maximiser of the surrogate; entries whose numerator is not
/// positive are set to `floor` and flagged.
pub fn sgem_mstep(stats: &SufficientStats, priors: &GammaPriorSet, floor: f64) -> MStep {
    let k = priors.dimension();
    let mut clamped = false;
    let mut ratio = |num: f64, den: f64| {
        let v = num / den;
        if num > 0.0 && v.is_finite() && v > floor {
            v
        } else {
            clamped = true;
            floor
        }
    };
    let mu = (0..k)
        .map(|l| ratio(stats.mu1[l] + priors.a[l] - 1.0, stats.mu2[l] + priors.b[l]))
        .collect();
    let alpha = Matrix::from_fn(k, |a, b| {
        ratio(
            stats.alpha1[(a, b)] + priors.e[(a, b)] - 1.0,
            stats.alpha2[(a, b)] + priors.f[(a, b)],
        )
    });
    let beta = Matrix::from_fn(k, |a, b| {
        ratio(
            stats.beta1[(a, b)] + priors.w[(a, b)] - 1.0,
            stats.beta2[(a, b)] + priors.s[(a, b)],
        )
    });
    MStep {
        params: HawkesParams { mu, alpha, beta },
        clamped,
    }
}

/// Surrogate objective `phi(theta)' s + log p(theta)` (up to constants).
pub fn q_value(stats: &SufficientStats, params: &HawkesParams, priors: &GammaPriorSet) -> f64 {
    let k = params.dimension();
    let mut q = 0.0;
    for l in 0..k {
        let m = params.mu[l];
        q += (stats.mu1[l] + priors.a[l] - 1.0) * ln(m) - (stats.mu2[l] + priors.b[l]) * m;
    }
    for a in 0..k {
        for b in 0..k {
            let (al, be) = (params.alpha[(a, b)], params.beta[(a, b)]);
            q += (stats.alpha1[(a, b)] + priors.e[(a, b)] - 1.0) * ln(al)
                - (stats.alpha2[(a, b)] + priors.f[(a, b)]) * al;
            q += (stats.beta1[(a, b)] + priors.w[(a, b)] - 1.0) * ln(be)
                - (stats.beta2[(a, b)] + priors.s[(a, b)]) * be;
        }
    }
    q
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgemConfig {
    pub schedule: StepSchedule,
    pub kappa: f64,
    pub compensator: CompensatorPolicy,
    /// Record the full-data log-likelihood every this many iterations (0: never).
    pub trace_every: u64,
    pub floor: f64,
    /// Stop when the surrogate's relative change over `patience` iterations
    /// falls below this.
    pub tolerance: f64,
    pub patience: u64,
}

impl SgemConfig {
    pub fn new(kappa: f64, compensator: CompensatorPolicy) -> Self {
        SgemConfig {
            schedule: StepSchedule::default(),
            kappa,
            compensator,
            trace_every: 0,
            floor: 1e-8,
            tolerance: 1e-6,
            patience: 50,
        }
    }
}

/// Detects a stalled scalar: relative change over `patience` steps below
/// `tolerance`.
pub(crate) struct Plateau {
    history: Vec<f64>,
    patience: usize,
    tolerance: f64,
}

impl Plateau {
    pub(crate) fn new(patience: u64, tolerance: f64) -> Self {
        Plateau {
            history: Vec::new(),
            patience: patience.max(1) as usize,
            tolerance,
        }
    }

    pub(crate) fn push(&mut self, value: f64) -> bool {
        self.history.push(value);
        if self.history.len() <= self.patience {
            return false;
        }
        let old = self.history.remove(0);
        abs(value - old) <= self.tolerance * abs(old)
    }
}

/// Runs SGEM from `init` until convergence or budget exhaustion.
pub fn fit_sgem<R: Rng + ?Sized, B: Budget + ?Sized>(
    seq: &EventSequence,
    priors: &GammaPriorSet,
    config: &SgemConfig,
    budget: &mut B,
    rng: &mut R,
    init: &HawkesParams,
) -> Result<FitResult> {
    config.schedule.validate()?;
    config.compensator.validate()?;
    init.validate()?;
    priors.validate()?;
    let method = if matches!(config.compensator, CompensatorPolicy::Corrected(_)) {
        Method::SgemC
    } else {
        Method::Sgem
    };
    let mut flags = FitFlags::default();

    let window = draw_window(seq, config.kappa, rng)?;
    let mut stats = estep_innovation(&window, init, config.compensator.resolve(&init.beta));
    let mut params = init.clone();
    let mut plateau = Plateau::new(config.patience, config.tolerance);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut r: u64 = 0;
    loop {
        if r > 0 && !budget.proceed(r) {
            break;
        }
        if r > 0 {
            let window = draw_window(seq, config.kappa, rng)?;
            let rho = config.schedule.step(r).min(1.0);
            let mode = config.compensator.resolve(&params.beta);
            stats = sgem_estep(&window, &params, &stats, rho, mode);
        }
        let m = sgem_mstep(&stats, priors, config.floor);
        flags.clamped |= m.clamped;
        params = m.params;
        r += 1;
        if config.trace_every > 0 && r.is_multiple_of(config.trace_every) {
            let ll = log_likelihood(seq, &params, CompensatorMode::Exact);
            flags.underflow |= ll.underflow;
            trace.push(TracePoint {
                iteration: r,
                log_likelihood: ll.value,
            });
        }
        if plateau.push(q_value(&stats, &params, priors)) {
            converged = true;
            break;
        }
    }
    let ll = log_likelihood(seq, &params, CompensatorMode::Exact);
    flags.underflow |= ll.underflow;
    Ok(FitResult {
        method,
        estimate: params,
        intervals: None,
        iterations: r,
        converged,
        log_likelihood: ll.value,
        trace,
        flags,
        elapsed_secs: budget.elapsed_secs(),
        seed: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::branching_probs;
    use crate::fit::IterationBudget;
    use crate::subsample::window_at;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> (EventSequence, HawkesParams) {
        let seq = EventSequence::new(
            vec![0.5, 0.9, 1.4, 3.0, 3.1, 4.8],
            vec![0, 1, 0, 1, 1, 0],
            5.0,
            2,
        )
        .unwrap();
        let p = HawkesParams::new(
            vec![0.4, 0.3],
            Matrix::from_rows(vec![vec![0.2, 0.4], vec![0.1, 0.3]]).unwrap(),
            Matrix::from_rows(vec![vec![2.0, 3.0], vec![1.5, 4.0]]).unwrap(),
        )
        .unwrap();
        (seq, p)
    }

    #[test]
    fn zero_step_keeps_stats() {
        let (seq, p) = small();
        let w = WindowDraw::full(&seq);
        let mut s = SufficientStats::zeros(2);
        s.mu1 = vec![3.0, 1.0];
        s.alpha2[(0, 1)] = 7.0;
        let out = sgem_estep(&w, &p, &s, 0.0, CompensatorMode::Lewis);
        assert_eq!(out.mu1, s.mu1);
        assert_eq!(out.alpha2, s.alpha2);
        assert_eq!(out.mu2, vec![5.0, 5.0]);
    }

    #[test]
    fn unit_step_full_window_is_batch_estep() {
        let (seq, p) = small();
        let w = WindowDraw::full(&seq);
        let out = sgem_estep(
            &w,
            &p,
            &SufficientStats::zeros(2),
            1.0,
            CompensatorMode::Lewis,
        );
        let probs = branching_probs(&seq, &p);
        let (t, d) = (seq.times(), seq.dims());
        let mut mu1 = [0.0; 2];
        let mut o = [[0.0; 2]; 2];
        let mut lag = [[0.0; 2]; 2];
        for i in 0..seq.len() {
            mu1[d[i]] += probs.rows[i][i];
            for j in 0..i {
                o[d[j]][d[i]] += probs.rows[i][j];
                lag[d[j]][d[i]] += probs.rows[i][j] * (t[i] - t[j]);
            }
        }
        for l in 0..2 {
            assert!((out.mu1[l] - mu1[l]).abs() < 1e-12);
            for k in 0..2 {
                assert!((out.alpha1[(k, l)] - o[k][l]).abs() < 1e-12);
                assert!((out.beta2[(k, l)] - lag[k][l]).abs() < 1e-12);
                let exact: f64 = (0..seq.len())
                    .filter(|&j| d[j] == k)
                    .map(|j| 1.0 - (-p.beta[(k, l)] * (5.0 - t[j])).exp())
                    .sum();
                assert!((out.alpha2[(k, l)] - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_immigrant_window() {
        let seq = EventSequence::new(vec![3.0], vec![1], 10.0, 2).unwrap();
        let p = HawkesParams::uniform(2, 0.5, 0.3, 4.0).unwrap();
        let w = window_at(&seq, 2.0, 0.25).unwrap();
        let s = estep_innovation(&w, &p, CompensatorMode::Lewis);
        assert!((s.mu1[1] - 4.0).abs() < 1e-12);
        assert_eq!(s.mu1[0], 0.0);
    }

    #[test]
    fn boundary_term_enters_beta_rate() {
        let (seq, p) = small();
        let w = WindowDraw::full(&seq);
        let lewis = estep_innovation(&w, &p, CompensatorMode::Lewis);
        let bc = estep_innovation(&w, &p, CompensatorMode::BoundaryCorrected { delta: 0.25 });
        // only the event at 4.8 (dim 0) is within 0.25 of the horizon
        for l in 0..2 {
            assert!((bc.beta2[(0, l)] - lewis.beta2[(0, l)] - p.alpha[(0, l)] * 0.2).abs() < 1e-12);
            assert_eq!(bc.beta2[(1, l)], lewis.beta2[(1, l)]);
        }
    }

    #[test]
    fn prior_mode_with_zero_stats() {
        let mut s = SufficientStats::zeros(1);
        s.mu2 = vec![10.0];
        let m = sgem_mstep(&s, &GammaPriorSet::standard(1), 1e-8);
        assert!((m.params.mu[0] - 1.0 / 14.0).abs() < 1e-15);
        assert!(!m.clamped);
    }

    #[test]
    fn weak_prior_is_clamped() {
        let priors = GammaPriorSet::uniform(1, 0.5, 1.0, 2.0, 1.0, 2.0, 1.0).unwrap();
        let m = sgem_mstep(&SufficientStats::zeros(1), &priors, 1e-8);
        assert!(m.clamped);
        assert_eq!(m.params.mu[0], 1e-8);
    }

    #[test]
    fn deterministic_given_seed() {
        let (seq, p) = small();
        let cfg = SgemConfig::new(0.5, CompensatorPolicy::Lewis);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            fit_sgem(
                &seq,
                &GammaPriorSet::standard(2),
                &cfg,
                &mut IterationBudget(50),
                &mut rng,
                &p,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }
}
