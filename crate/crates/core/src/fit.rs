//! Shared fitter plumbing: budgets, results, intervals and initial points.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::math::exp;
use crate::matrix::Matrix;
use crate::model::{GammaPriorSet, HawkesParams};

/// Decides whether a fitter may start another iteration.
///
/// Fitters call `proceed(completed)` before every iteration after the first,
/// so at least one iteration always runs and an iteration is never cut short.
pub trait Budget {
    fn proceed(&mut self, completed: u64) -> bool;

    /// Seconds spent so far, if the budget measures time.
    fn elapsed_secs(&self) -> f64 {
        0.0
    }
}

/// Stop after a fixed number of iterations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IterationBudget(pub u64);

impl Budget for IterationBudget {
    fn proceed(&mut self, completed: u64) -> bool {
        completed < self.0
    }
}

impl<B: Budget + ?Sized> Budget for &mut B {
    fn proceed(&mut self, completed: u64) -> bool {
        (**self).proceed(completed)
    }

    fn elapsed_secs(&self) -> f64 {
        (**self).elapsed_secs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SGEM")]
    Sgem,
    #[serde(rename = "SGEM-c")]
    SgemC,
    #[serde(rename = "SGVI")]
    Sgvi,
    #[serde(rename = "SGVI-c")]
    SgviC,
    #[serde(rename = "SGLD")]
    Sgld,
    #[serde(rename = "SGLD-apx")]
    SgldApx,
    #[serde(rename = "MCMC")]
    Mcmc,
    #[serde(rename = "MCMC-c")]
    McmcC,
    #[serde(rename = "MCMC-rw")]
    McmcRw,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Sgem,
        Method::SgemC,
        Method::Sgvi,
        Method::SgviC,
        Method::Sgld,
        Method::SgldApx,
        Method::Mcmc,
        Method::McmcC,
        Method::McmcRw,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Sgem => "SGEM",
            Method::SgemC => "SGEM-c",
            Method::Sgvi => "SGVI",
            Method::SgviC => "SGVI-c",
            Method::Sgld => "SGLD",
            Method::SgldApx => "SGLD-apx",
            Method::Mcmc => "MCMC",
            Method::McmcC => "MCMC-c",
            Method::McmcRw => "MCMC-rw",
        }
    }

    /// Uses random windows (and therefore a kappa).
    pub fn is_stochastic(&self) -> bool {
        !matches!(self, Method::Mcmc | Method::McmcC | Method::McmcRw)
    }

    /// Produces credible intervals.
    pub fn has_intervals(&self) -> bool {
        !matches!(self, Method::Sgem | Method::SgemC)
    }

    /// Uses the boundary-corrected compensator.
    pub fn is_corrected(&self) -> bool {
        matches!(
            self,
            Method::SgemC | Method::SgviC | Method::SgldApx | Method::McmcC
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, String> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| alloc::format!("unknown method {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo <= hi {
            Ok(Interval { lo, hi })
        } else {
            Err(HawkesError::InvalidInterval { lo, hi })
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Credible intervals for every parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamIntervals {
    pub mu: Vec<Interval>,
    pub alpha: Matrix<Interval>,
    pub beta: Matrix<Interval>,
}

impl ParamIntervals {
    /// Same order as [`HawkesParams::flatten`]: `K + 2K^2` entries.
    pub fn flatten(&self) -> Vec<Interval> {
        let mut v = self.mu.clone();
        v.extend_from_slice(self.alpha.as_slice());
        v.extend_from_slice(self.beta.as_slice());
        v
    }

    pub fn from_flat(k: usize, v: &[Interval]) -> Result<Self> {
        if v.len() != k + 2 * k * k {
            return Err(HawkesError::DimensionMismatch {
                expected: k + 2 * k * k,
                found: v.len(),
            });
        }
        Ok(ParamIntervals {
            mu: v[..k].to_vec(),
            alpha: Matrix::from_fn(k, |a, b| v[k + a * k + b]),
            beta: Matrix::from_fn(k, |a, b| v[k + k * k + a * k + b]),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: u64,
    /// Exact observed log-likelihood of the full data at the current iterate.
    pub log_likelihood: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitFlags {
    /// An intensity underflowed while evaluating a log-likelihood.
    pub underflow: bool,
    /// An M-step numerator was non-positive and the parameter was floored.
    pub clamped: bool,
    /// A non-finite gradient was met; the step was shrunk and retried.
    pub non_finite_gradient: bool,
    /// The chain left the `|xi| <= 50` box; the run is a failure.
    pub diverged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: Method,
    pub estimate: HawkesParams,
    pub intervals: Option<ParamIntervals>,
    pub iterations: u64,
    pub converged: bool,
    /// Exact observed log-likelihood of the full data at `estimate`.
    pub log_likelihood: f64,
    pub trace: Vec<TracePoint>,
    pub flags: FitFlags,
    pub elapsed_secs: f64,
    pub seed: Option<u64>,
}

impl FitResult {
    pub fn failed(&self) -> bool {
        self.flags.diverged || !self.log_likelihood.is_finite()
    }
}

/// A starting point: the prior centre with independent log-normal jitter
/// `exp(sigma z)` on every entry.
pub fn jittered_init<R: Rng + ?Sized>(
    priors: &GammaPriorSet,
    sigma: f64,
    rng: &mut R,
) -> HawkesParams {
    let center = priors.center();
    let mut jitter = |x: f64| {
        let z: f64 = StandardNormal.sample(rng);
        x * exp(sigma * z)
    };
    let mu = center.mu.iter().map(|&m| jitter(m)).collect();
    let alpha = Matrix::from_fn(center.alpha.dim(), |a, b| jitter(center.alpha[(a, b)]));
    let beta = Matrix::from_fn(center.beta.dim(), |a, b| jitter(center.beta[(a, b)]));
    HawkesParams { mu, alpha, beta }
}

/// Empirical quantile with linear interpolation between order statistics;
/// `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = crate::math::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
