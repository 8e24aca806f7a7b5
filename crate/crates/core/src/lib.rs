//! Bayesian inference for multivariate Hawkes processes with exponential
//! excitation kernels.
//!
//! The crate is `no_std` (it needs `alloc`) and never reads a clock: fitters
//! take a [`Budget`] that decides when to stop. Everything is deterministic
//! given the RNG passed in.
//!
//! Conventions used throughout:
//!
//! * matrices are indexed `(k, l)` with `k` the source dimension and `l` the
//!   target, so `alpha[(k, l)]` scales the effect of a `k` event on `l`;
//! * Gamma distributions use the shape/rate parameterisation;
//! * an event never excites itself or events at the same instant (history is
//!   `t_j < t`).

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod branching;
pub mod chain;
pub mod compensator;
mod error;
pub mod fit;
pub mod gamma;
pub mod likelihood;
pub mod math;
pub mod matrix;
pub mod mcmc;
pub mod metrics;
pub mod model;
pub mod quad;
pub(crate) mod scan;
pub mod schedule;
pub mod sgem;
pub mod sgld;
pub mod sgvi;
pub mod simulate;
pub mod subsample;

pub use branching::{Branching, BranchingProbs, BranchingSummary, ResponsibilityKernel};
pub use chain::SampleChain;
pub use compensator::{approx_errors, CompensatorMode, CompensatorPolicy, DeltaPolicy};
pub use error::{HawkesError, Result};
pub use fit::{Budget, FitFlags, FitResult, IterationBudget, Method, ParamIntervals, TracePoint};
pub use gamma::Gamma;
pub use likelihood::{complete_log_likelihood, intensity, log_likelihood, LogLikelihood};
pub use matrix::Matrix;
pub use mcmc::{fit_mcmc, McmcConfig, McmcVariant};
pub use model::{EventSequence, GammaPriorSet, HawkesParams};
pub use schedule::StepSchedule;
pub use sgem::{fit_sgem, SgemConfig};
pub use sgld::{fit_sgld, SgldConfig};
pub use sgvi::{fit_sgvi, SgviConfig, VariationalState};
pub use simulate::{scenario_params, simulate, ScenarioKind, ScenarioSpec, SparsityLevel};
pub use subsample::{draw_window, WindowDraw};
