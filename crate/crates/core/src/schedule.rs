//! Robbins-Monro step sizes `rho_r = rho0 (r + tau1)^(-tau2)`.

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::math::powf;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub rho0: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl StepSchedule {
    pub fn new(rho0: f64, tau1: f64, tau2: f64) -> Result<Self> {
        let s = StepSchedule { rho0, tau1, tau2 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(HawkesError::InvalidParameter {
                name: "rho0",
                value: self.rho0,
            });
        }
        if !(self.tau1 >= 0.0 && self.tau1.is_finite()) {
            return Err(HawkesError::InvalidParameter {
                name: "tau1",
                value: self.tau1,
            });
        }
        // (0.5, 1] keeps sum rho = inf and sum rho^2 < inf
        if !(self.tau2 > 0.5 && self.tau2 <= 1.0) {
            return Err(HawkesError::InvalidParameter {
                name: "tau2",
                value: self.tau2,
            });
        }
        Ok(())
    }

    /// Step for iteration `r` (counted from zero). With `tau1 = 0` the
    /// undefined `0^(-tau2)` at `r = 0` is taken as one.
    pub fn step(&self, r: u64) -> f64 {
        let base = r as f64 + self.tau1;
        if base == 0.0 {
            return self.rho0;
        }
        self.rho0 * powf(base, -self.tau2)
    }
}

impl Default for StepSchedule {
    /// `rho0 = 0.02, tau1 = 1, tau2 = 0.51`.
    fn default() -> Self {
        StepSchedule {
            rho0: 0.02,
            tau1: 1.0,
            tau2: 0.51,
        }
    }
}
