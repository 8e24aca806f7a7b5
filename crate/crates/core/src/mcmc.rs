//! Full-batch Gibbs samplers over parameters and the latent branching.
//!
//! Given a hard parent assignment the complete-data likelihood is
//! conditionally conjugate, so `mu`, `alpha` and (under the Lewis or
//! boundary-corrected compensator) `beta` have Gamma full conditionals. The
//! random-walk variant keeps the exact compensator and updates each `beta`
//! entry by Metropolis-Hastings on `ln beta` against the observed
//! likelihood with the branching integrated out.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::branching::{Branching, BranchingSummary};
use crate::chain::SampleChain;
use crate::compensator::{boundary_sums, pair_factors, CompensatorMode, DeltaPolicy};
use crate::error::{HawkesError, Result};
use crate::fit::{Budget, FitFlags, FitResult, Method, TracePoint};
use crate::gamma::Gamma;
use crate::likelihood::{log_likelihood, target_log_likelihood};
use crate::math::{exp, ln};
use crate::matrix::Matrix;
use crate::model::{EventSequence, GammaPriorSet, HawkesParams};
use crate::scan::scan;

/// Draws one parent per event from its categorical conditional.
///
/// The source dimension is drawn from the scan sums, then the parent within
/// that dimension by walking backwards from the most recent candidate, so
/// memory stays O(n).
pub fn sample_branching<R: Rng + ?Sized>(
    seq: &EventSequence,
    params: &HawkesParams,
    rng: &mut R,
) -> Branching {
    let k = seq.dimension();
    let by_dim = seq.indices_by_dim();
    let times = seq.times();
    let mut parents: Vec<usize> = (0..seq.len()).collect();
    let mut weights = alloc::vec![0.0; k + 1];
    scan(seq, &params.beta, false, |v| {
        let l = v.dim;
        weights[k] = params.mu[l];
        let mut total = params.mu[l];
        for src in 0..k {
            let w = params.alpha[(src, l)] * params.beta[(src, l)] * v.a[src];
            weights[src] = w;
            total += w;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = k;
        for (c, &w) in weights.iter().enumerate() {
            if w > 0.0 && u < w {
                pick = c;
                break;
            }
            u -= w;
        }
        if pick == k {
            return;
        }
        // parent within dimension `pick`, proportional to exp(-beta (t - t_j))
        let cands = &by_dim[pick];
        let end = cands.partition_point(|&j| times[j] < v.time);
        let beta = params.beta[(pick, l)];
        let target = rng.random::<f64>() * v.a[pick];
        let mut acc = 0.0;
        let mut chosen = cands[0];
        for &j in cands[..end].iter().rev() {
            acc += exp(-beta * (v.time - times[j]));
            chosen = j;
            if acc > target {
                break;
            }
        }
        parents[v.index] = chosen;
    });
    Branching::from_unchecked(parents)
}

/// Gamma full conditionals of every parameter at the current state.
#[derive(Clone, Debug, PartialEq)]
pub struct Conditionals {
    pub mu: Vec<Gamma>,
    pub alpha: Matrix<Gamma>,
    pub beta: Matrix<Gamma>,
}

pub fn mu_conditional(
    seq: &EventSequence,
    summary: &BranchingSummary,
    priors: &GammaPriorSet,
) -> Vec<Gamma> {
    (0..seq.dimension())
        .map(|l| Gamma {
            shape: priors.a[l] + summary.immigrants[l],
            rate: priors.b[l] + seq.horizon(),
        })
        .collect()
}

/// `alpha_kl | . ~ Gamma(e + |O_kl|, f + S_kl(beta))` with `S` under `mode`.
pub fn alpha_conditional(
    seq: &EventSequence,
    summary: &BranchingSummary,
    beta: &Matrix,
    priors: &GammaPriorSet,
    mode: CompensatorMode,
) -> Matrix<Gamma> {
    let s = pair_factors(seq, beta, mode);
    Matrix::from_fn(seq.dimension(), |a, b| Gamma {
        shape: priors.e[(a, b)] + summary.offspring[(a, b)],
        rate: priors.f[(a, b)] + s[(a, b)],
    })
}

/// `beta_kl | . ~ Gamma(w + |O_kl|, s + lag_kl [+ alpha_kl sum_boundary (T - t_j)])`.
pub fn beta_conditional(
    seq: &EventSequence,
    summary: &BranchingSummary,
    alpha: &Matrix,
    priors: &GammaPriorSet,
    mode: CompensatorMode,
) -> Result<Matrix<Gamma>> {
    let boundary = match mode {
        CompensatorMode::Exact => return Err(HawkesError::ExactNotConjugate),
        CompensatorMode::Lewis => None,
        CompensatorMode::BoundaryCorrected { delta } => Some(boundary_sums(seq, delta).0),
    };
    Ok(Matrix::from_fn(seq.dimension(), |a, b| {
        let extra = boundary.as_ref().map_or(0.0, |lag| alpha[(a, b)] * lag[a]);
        Gamma {
            shape: priors.w[(a, b)] + summary.offspring[(a, b)],
            rate: priors.s[(a, b)] + summary.lag[(a, b)] + extra,
        }
    }))
}

/// All conditionals at `params`; rejects the exact compensator, under which
/// `beta` is not conjugate.
pub fn gibbs_conditionals(
    seq: &EventSequence,
    branching: &Branching,
    params: &HawkesParams,
    priors: &GammaPriorSet,
    mode: CompensatorMode,
) -> Result<Conditionals> {
    branching.validate(seq)?;
    let summary = branching.summary(seq);
    Ok(Conditionals {
        beta: beta_conditional(seq, &summary, &params.alpha, priors, mode)?,
        mu: mu_conditional(seq, &summary, priors),
        alpha: alpha_conditional(seq, &summary, &params.beta, priors, mode),
    })
}

/// Log acceptance ratio for moving `beta_kl` to `proposal` under a symmetric
/// random walk on `ln beta`; includes the Jacobian of the log transform.
pub fn rw_log_ratio(
    seq: &EventSequence,
    params: &HawkesParams,
    k: usize,
    l: usize,
    proposal: f64,
    priors: &GammaPriorSet,
) -> f64 {
    let current = params.beta[(k, l)];
    let mut moved = params.clone();
    moved.beta[(k, l)] = proposal;
    let prior = priors.beta_prior(k, l);
    // Gamma(w, s) in ln beta: w ln beta - s beta
    let log_target = |p: &HawkesParams, b: f64| {
        target_log_likelihood(seq, p, l) + prior.shape * ln(b) - prior.rate * b
    };
    log_target(&moved, proposal) - log_target(params, current)
}

/// One Metropolis-Hastings sweep over the `beta` entries; returns the
/// number of accepted moves.
pub fn rw_beta_update<R: Rng + ?Sized>(
    seq: &EventSequence,
    params: &mut HawkesParams,
    proposal_sd: &Matrix,
    priors: &GammaPriorSet,
    rng: &mut R,
    accepted: &mut Matrix<u64>,
) {
    let k = seq.dimension();
    for a in 0..k {
        for b in 0..k {
            let z: f64 = rng.sample(StandardNormal);
            let proposal = params.beta[(a, b)] * exp(proposal_sd[(a, b)] * z);
            let ratio = rw_log_ratio(seq, params, a, b, proposal, priors);
            let u: f64 = rng.random();
            if ln(u) < ratio || ratio >= 0.0 {
                params.beta[(a, b)] = proposal;
                accepted[(a, b)] += 1;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McmcVariant {
    /// Conjugate `beta` under the Lewis compensator.
    Lewis,
    /// Conjugate `beta` under the boundary-corrected compensator.
    Corrected(DeltaPolicy),
    /// Exact compensator with random-walk `beta` updates.
    RandomWalkBeta,
}

impl McmcVariant {
    pub fn method(&self) -> Method {
        match self {
            McmcVariant::Lewis => Method::Mcmc,
            McmcVariant::Corrected(_) => Method::McmcC,
            McmcVariant::RandomWalkBeta => Method::McmcRw,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub variant: McmcVariant,
    pub iterations: u64,
    pub burn_in: u64,
    pub capacity: usize,
    pub level: f64,
    pub initial_sd: f64,
    pub target_acceptance: f64,
    /// Proposal scales adapt every this many burn-in sweeps.
    pub tune_every: u64,
    pub trace_every: u64,
}

impl McmcConfig {
    pub fn new(variant: McmcVariant) -> Self {
        McmcConfig {
            variant,
            iterations: 15_000,
            burn_in: 5_000,
            capacity: 10_000,
            level: 0.95,
            initial_sd: 0.1,
            target_acceptance: 0.3,
            tune_every: 50,
            trace_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(HawkesError::InvalidParameter {
                name: "burn_in",
                value: self.burn_in as f64,
            });
        }
        if let McmcVariant::Corrected(d) = self.variant {
            d.validate()?;
        }
        Ok(())
    }
}

/// Runs the sampler for `config.iterations` sweeps or until the budget
/// stops it. Sweeps update the branching, then `mu`, `alpha` and `beta`.
/// The point estimate is the posterior median.
pub fn fit_mcmc<R: Rng + ?Sized, B: Budget + ?Sized>(
    seq: &EventSequence,
    priors: &GammaPriorSet,
    config: &McmcConfig,
    budget: &mut B,
    rng: &mut R,
    init: &HawkesParams,
) -> Result<(FitResult, SampleChain)> {
    config.validate()?;
    init.validate()?;
    priors.validate()?;
    let k = seq.dimension();
    let mut params = init.clone();
    let mut chain = SampleChain::new(k, config.capacity);
    let mut sd = Matrix::from_elem(k, config.initial_sd);
    let mut accepted = Matrix::from_elem(k, 0u64);
    let mut trace = Vec::new();
    let mut flags = FitFlags::default();
    let mut r: u64 = 0;
    let log = |p: &HawkesParams| -> Vec<f64> { p.flatten().into_iter().map(ln).collect() };
    while r < config.iterations {
        if r > 0 && !budget.proceed(r) {
            break;
        }
        let branching = sample_branching(seq, &params, rng);
        let summary = branching.summary(seq);
        let mode = match config.variant {
            McmcVariant::Lewis => CompensatorMode::Lewis,
            McmcVariant::Corrected(d) => CompensatorMode::BoundaryCorrected {
                delta: d.resolve(&params.beta),
            },
            McmcVariant::RandomWalkBeta => CompensatorMode::Exact,
        };
        for (m, g) in params
            .mu
            .iter_mut()
            .zip(mu_conditional(seq, &summary, priors))
        {
            *m = g.sample(rng);
        }
        let alpha = alpha_conditional(seq, &summary, &params.beta, priors, mode);
        params.alpha = alpha.map(|g| g.sample(rng));
        if config.variant == McmcVariant::RandomWalkBeta {
            rw_beta_update(seq, &mut params, &sd, priors, rng, &mut accepted);
        } else {
            let beta = beta_conditional(seq, &summary, &params.alpha, priors, mode)?;
            params.beta = beta.map(|g| g.sample(rng));
        }
        // keep draws strictly positive so the log chain stays finite
        for v in params
            .mu
            .iter_mut()
            .chain(params.alpha.as_mut_slice())
            .chain(params.beta.as_mut_slice())
        {
            if !(*v >= f64::MIN_POSITIVE) {
                *v = f64::MIN_POSITIVE;
                flags.clamped = true;
            }
        }
        r += 1;
        if config.variant == McmcVariant::RandomWalkBeta
            && r <= config.burn_in
            && r.is_multiple_of(config.tune_every)
        {
            for (s, a) in sd.as_mut_slice().iter_mut().zip(accepted.as_mut_slice()) {
                let rate = *a as f64 / config.tune_every as f64;
                *s *= exp(2.0 * (rate - config.target_acceptance));
                *a = 0;
            }
        }
        chain.offer(r, &log(&params));
        if config.trace_every > 0 && r.is_multiple_of(config.trace_every) {
            let ll = log_likelihood(seq, &params, CompensatorMode::Exact);
            flags.underflow |= ll.underflow;
            trace.push(TracePoint {
                iteration: r,
                log_likelihood: ll.value,
            });
        }
    }
    // a budget cut shortens burn-in proportionally
    let burn = if r >= config.iterations {
        config.burn_in
    } else {
        r * config.burn_in / config.iterations
    };
    chain.finish(burn + 1, r, &log(&params));
    let estimate = chain.median()?;
    let ll = log_likelihood(seq, &estimate, CompensatorMode::Exact);
    flags.underflow |= ll.underflow;
    let result = FitResult {
        method: config.variant.method(),
        intervals: Some(chain.intervals(config.level)?),
        estimate,
        iterations: r,
        converged: r >= config.iterations,
        log_likelihood: ll.value,
        trace,
        flags,
        elapsed_secs: budget.elapsed_secs(),
        seed: None,
    };
    Ok((result, chain))
}
