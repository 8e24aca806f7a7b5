//! Conditional intensity and observed / complete-data log-likelihoods.

use serde::{Deserialize, Serialize};

use crate::branching::Branching;
use crate::compensator::{compensator_term, pair_factors, CompensatorMode};
use crate::error::{HawkesError, Result};
use crate::math::{exp, ln};
use crate::model::{EventSequence, HawkesParams};
use crate::scan::{scan, scan_target};

/// `lambda_l(t) = mu_l + sum_{t_i < t} alpha beta exp(-beta (t - t_i))`.
pub fn intensity(seq: &EventSequence, params: &HawkesParams, ell: usize, t: f64) -> Result<f64> {
    let k = seq.dimension();
    if ell >= k {
        return Err(HawkesError::DimensionOutOfRange {
            index: 0,
            dim: ell,
            k,
        });
    }
    if params.dimension() != k {
        return Err(HawkesError::DimensionMismatch {
            expected: k,
            found: params.dimension(),
        });
    }
    if !(0.0..=seq.horizon()).contains(&t) {
        return Err(HawkesError::OutOfHorizon {
            index: 0,
            time: t,
            horizon: seq.horizon(),
        });
    }
    let mut lambda = params.mu[ell];
    for (ti, d) in seq.iter() {
        if ti >= t {
            break;
        }
        let (a, b) = (params.alpha[(d, ell)], params.beta[(d, ell)]);
        lambda += a * b * exp(-b * (t - ti));
    }
    Ok(lambda)
}

/// Observed-data log-likelihood plus an underflow flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLikelihood {
    pub value: f64,
    /// Some intensity fell below the smallest positive normal and was floored.
    pub underflow: bool,
}

#[inline]
fn floored_ln(x: f64, underflow: &mut bool) -> f64 {
    if x < f64::MIN_POSITIVE {
        *underflow = true;
        ln(f64::MIN_POSITIVE)
    } else {
        ln(x)
    }
}

/// `sum_i log lambda_{d_i}(t_i) - compensator` in O(n K^2).
pub fn log_likelihood(
    seq: &EventSequence,
    params: &HawkesParams,
    mode: CompensatorMode,
) -> LogLikelihood {
    let k = seq.dimension();
    let mut underflow = false;
    let mut sum = 0.0;
    scan(seq, &params.beta, false, |v| {
        let mut lambda = params.mu[v.dim];
        for src in 0..k {
            lambda += params.alpha[(src, v.dim)] * params.beta[(src, v.dim)] * v.a[src];
        }
        sum += floored_ln(lambda, &mut underflow);
    });
    LogLikelihood {
        value: sum - compensator_term(seq, params, mode),
        underflow,
    }
}

/// The part of the exact log-likelihood that depends on the parameters of
/// target dimension `l` (`mu_l`, `alpha_{.l}`, `beta_{.l}`); the full
/// log-likelihood is the sum of these over `l`.
pub fn target_log_likelihood(seq: &EventSequence, params: &HawkesParams, l: usize) -> f64 {
    let k = seq.dimension();
    let mut underflow = false;
    let mut sum = 0.0;
    scan_target(seq, &params.beta, l, |_, a| {
        let mut lambda = params.mu[l];
        for src in 0..k {
            lambda += params.alpha[(src, l)] * params.beta[(src, l)] * a[src];
        }
        sum += floored_ln(lambda, &mut underflow);
    });
    let horizon = seq.horizon();
    let mut comp = params.mu[l] * horizon;
    for (t, src) in seq.iter() {
        comp += params.alpha[(src, l)]
            * CompensatorMode::Exact.factor(params.beta[(src, l)], horizon - t);
    }
    sum - comp
}

/// Complete-data log-likelihood for a hard branching, with the compensator
/// approximated per `mode`.
pub fn complete_log_likelihood(
    seq: &EventSequence,
    branching: &Branching,
    params: &HawkesParams,
    mode: CompensatorMode,
) -> Result<f64> {
    branching.validate(seq)?;
    let k = seq.dimension();
    let stats = branching.summary(seq);
    let mut acc = 0.0;
    for l in 0..k {
        if stats.immigrants[l] > 0.0 {
            acc += stats.immigrants[l] * ln(params.mu[l]);
        }
    }
    for src in 0..k {
        for l in 0..k {
            let o = stats.offspring[(src, l)];
            let (a, b) = (params.alpha[(src, l)], params.beta[(src, l)]);
            if o > 0.0 {
                acc += o * (ln(a) + ln(b));
            }
            acc -= b * stats.lag[(src, l)];
        }
    }
    let s = pair_factors(seq, &params.beta, mode);
    let comp: f64 = params.mu.iter().sum::<f64>() * seq.horizon()
        + params
            .alpha
            .iter()
            .zip(s.iter())
            .map(|(a, s)| a * s)
            .sum::<f64>();
    Ok(acc - comp)
}
