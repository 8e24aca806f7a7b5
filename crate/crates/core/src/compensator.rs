//! Compensator (integrated intensity) terms and their approximations.
//!
//! The compensator over `[0, T]` is
//! `sum_l mu_l T + sum_{k,l} alpha_kl S_kl`, where `S_kl` sums one factor per
//! dimension-`k` event. With `x = T - t_i` the factor is `1 - exp(-beta x)`
//! exactly, `1` under the Lewis approximation, and the first-order Taylor
//! term `beta x` near the horizon (`x < delta`) under the boundary correction.

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::math::{exp, expm1};
use crate::matrix::Matrix;
use crate::model::{EventSequence, HawkesParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompensatorMode {
    Exact,
    Lewis,
    BoundaryCorrected { delta: f64 },
}

impl CompensatorMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CompensatorMode::BoundaryCorrected { delta } if !(delta > 0.0 && delta.is_finite()) => {
                Err(HawkesError::InvalidParameter {
                    name: "delta",
                    value: delta,
                })
            }
            _ => Ok(()),
        }
    }

    /// Boundary threshold, if any.
    pub fn delta(&self) -> Option<f64> {
        match *self {
            CompensatorMode::BoundaryCorrected { delta } => Some(delta),
            _ => None,
        }
    }

    /// Contribution of one source event at distance `x = T - t` from the
    /// horizon to `S_kl`.
    #[inline]
    pub fn factor(&self, beta: f64, x: f64) -> f64 {
        match *self {
            CompensatorMode::Exact => -expm1(-beta * x),
            CompensatorMode::Lewis => 1.0,
            CompensatorMode::BoundaryCorrected { delta } => {
                if x < delta {
                    beta * x
                } else {
                    1.0
                }
            }
        }
    }

    /// Derivative of [`factor`](Self::factor) with respect to `beta`.
    #[inline]
    pub fn factor_dbeta(&self, beta: f64, x: f64) -> f64 {
        match *self {
            CompensatorMode::Exact => x * exp(-beta * x),
            CompensatorMode::Lewis => 0.0,
            CompensatorMode::BoundaryCorrected { delta } => {
                if x < delta {
                    x
                } else {
                    0.0
                }
            }
        }
    }

    /// Absolute error of this mode's factor against the exact one.
    pub fn factor_error(&self, beta: f64, x: f64) -> f64 {
        crate::math::abs(self.factor(beta, x) - CompensatorMode::Exact.factor(beta, x))
    }
}

/// Errors of the two approximations of `1 - exp(-beta dt)`:
/// `R0 = exp(-beta dt)` (replace by one) and
/// `Ra = exp(-beta dt) - 1 + beta dt` (replace by `beta dt`).
pub fn approx_errors(beta: f64, delta_t: f64) -> (f64, f64) {
    let r0 = exp(-beta * delta_t);
    let ra = expm1(-beta * delta_t) + beta * delta_t;
    (r0, ra)
}

/// `S_kl` for every pair under `mode`.
pub fn pair_factors(seq: &EventSequence, beta: &Matrix, mode: CompensatorMode) -> Matrix {
    let k = seq.dimension();
    let mut s = Matrix::from_elem(k, 0.0);
    if mode == CompensatorMode::Lewis {
        for src in 0..k {
            for l in 0..k {
                s[(src, l)] = seq.counts()[src] as f64;
            }
        }
        return s;
    }
    let horizon = seq.horizon();
    for (t, src) in seq.iter() {
        let x = horizon - t;
        for l in 0..k {
            s[(src, l)] += mode.factor(beta[(src, l)], x);
        }
    }
    s
}

/// Boundary sums `sum_{d_j = k, 0 <= T - t_j < delta} (T - t_j)` per source
/// dimension, plus the number of such events.
pub fn boundary_sums(
    seq: &EventSequence,
    delta: f64,
) -> (alloc::vec::Vec<f64>, alloc::vec::Vec<usize>) {
    let k = seq.dimension();
    let mut lag = alloc::vec![0.0; k];
    let mut count = alloc::vec![0usize; k];
    let horizon = seq.horizon();
    let times = seq.times();
    let start = times.partition_point(|&t| horizon - t >= delta);
    for i in start..seq.len() {
        let d = seq.dims()[i];
        lag[d] += horizon - times[i];
        count[d] += 1;
    }
    (lag, count)
}

/// Total compensator `sum_l mu_l T + sum_{k,l} alpha_kl S_kl`.
pub fn compensator_term(seq: &EventSequence, params: &HawkesParams, mode: CompensatorMode) -> f64 {
    let s = pair_factors(seq, &params.beta, mode);
    let base: f64 = params.mu.iter().sum::<f64>() * seq.horizon();
    base + params
        .alpha
        .iter()
        .zip(s.iter())
        .map(|(a, s)| a * s)
        .sum::<f64>()
}

/// How a fitter picks the boundary threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaPolicy {
    Fixed(f64),
    /// `delta = scale * mean(1 / beta)` at the current estimate.
    Adaptive {
        scale: f64,
    },
}

impl DeltaPolicy {
    pub fn resolve(&self, beta: &Matrix) -> f64 {
        match *self {
            DeltaPolicy::Fixed(d) => d,
            DeltaPolicy::Adaptive { scale } => {
                let n = beta.as_slice().len().max(1) as f64;
                scale * beta.iter().map(|b| 1.0 / b).sum::<f64>() / n
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            DeltaPolicy::Fixed(d) => d,
            DeltaPolicy::Adaptive { scale } => scale,
        };
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(HawkesError::InvalidParameter {
                name: "delta policy",
                value: v,
            })
        }
    }
}

impl Default for DeltaPolicy {
    fn default() -> Self {
        DeltaPolicy::Fixed(0.25)
    }
}

/// Compensator choice of a fitter, resolved against the current estimate on
/// every iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompensatorPolicy {
    Exact,
    Lewis,
    Corrected(DeltaPolicy),
}

impl CompensatorPolicy {
    pub fn resolve(&self, beta: &Matrix) -> CompensatorMode {
        match self {
            CompensatorPolicy::Exact => CompensatorMode::Exact,
            CompensatorPolicy::Lewis => CompensatorMode::Lewis,
            CompensatorPolicy::Corrected(p) => CompensatorMode::BoundaryCorrected {
                delta: p.resolve(beta),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CompensatorPolicy::Corrected(p) => p.validate(),
            _ => Ok(()),
        }
    }
}
