//! Wall-clock budgets on a monotonic clock.

use std::time::{Duration, Instant};

use mhp_core::{Budget, IterationBudget};
use serde::{Deserialize, Serialize};

/// Stops once `limit` has elapsed since construction. The clock is read once
/// per iteration, so the last iteration may overrun the limit.
#[derive(Clone, Copy, Debug)]
pub struct WallClock {
    start: Instant,
    limit: Duration,
}

impl WallClock {
    pub fn new(secs: f64) -> Self {
        WallClock {
            start: Instant::now(),
            limit: Duration::from_secs_f64(secs.max(0.0)),
        }
    }
}

impl Budget for WallClock {
    fn proceed(&mut self, _completed: u64) -> bool {
        self.start.elapsed() < self.limit
    }

    fn elapsed_secs(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

/// Iteration budget that also reports elapsed time.
#[derive(Clone, Copy, Debug)]
pub struct TimedIterations {
    inner: IterationBudget,
    start: Instant,
}

impl TimedIterations {
    pub fn new(iterations: u64) -> Self {
        TimedIterations {
            inner: IterationBudget(iterations),
            start: Instant::now(),
        }
    }
}

impl Budget for TimedIterations {
    fn proceed(&mut self, completed: u64) -> bool {
        self.inner.proceed(completed)
    }

    fn elapsed_secs(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

/// How the numbers in a budget list are read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetUnit {
    #[default]
    Seconds,
    /// Fixed iteration counts; results no longer depend on machine speed.
    Iterations,
}

/// A budget value with its unit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetSpec {
    pub unit: BudgetUnit,
    pub value: f64,
}

impl BudgetSpec {
    pub fn seconds(value: f64) -> Self {
        BudgetSpec {
            unit: BudgetUnit::Seconds,
            value,
        }
    }

    pub fn iterations(value: u64) -> Self {
        BudgetSpec {
            unit: BudgetUnit::Iterations,
            value: value as f64,
        }
    }

    /// Starts the clock.
    pub fn start(&self) -> Box<dyn Budget + Send> {
        match self.unit {
            BudgetUnit::Seconds => Box::new(WallClock::new(self.value)),
            BudgetUnit::Iterations => Box::new(TimedIterations::new(self.value as u64)),
        }
    }

    /// Table label: `60s` or `500it`.
    pub fn label(&self) -> String {
        match self.unit {
            BudgetUnit::Seconds => format!("{}s", self.value),
            BudgetUnit::Iterations => format!("{}it", self.value as u64),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mhp_core::{
        fit_sgvi, simulate, CompensatorPolicy, GammaPriorSet, HawkesParams, ScenarioKind,
        ScenarioSpec, SgviConfig,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_budget_still_runs_one_iteration() {
        let (seq, _) = simulate(&ScenarioSpec {
            kind: ScenarioKind::Dense3,
            horizon: 100.0,
            seed: 1,
        })
        .unwrap();
        let priors = GammaPriorSet::standard(3);
        let init = HawkesParams::uniform(3, 0.5, 0.5, 1.0).unwrap();
        let cfg = SgviConfig::new(0.1, CompensatorPolicy::Lewis);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fit = fit_sgvi(
            &seq,
            &priors,
            &cfg,
            &mut WallClock::new(0.0),
            &mut rng,
            &init,
        )
        .unwrap();
        assert_eq!(fit.iterations, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fit = fit_sgvi(
            &seq,
            &priors,
            &cfg,
            &mut WallClock::new(0.1),
            &mut rng,
            &init,
        )
        .unwrap();
        assert!(fit.iterations >= 1);
        assert!(fit.elapsed_secs >= 0.1 || fit.converged);
    }

    #[test]
    fn labels() {
        assert_eq!(BudgetSpec::seconds(60.0).label(), "60s");
        assert_eq!(BudgetSpec::seconds(0.5).label(), "0.5s");
        assert_eq!(BudgetSpec::iterations(500).label(), "500it");
    }
}
