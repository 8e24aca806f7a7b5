//! Stored sampler draws with bounded memory.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fit::{quantile_sorted, Interval, ParamIntervals};
use crate::math::exp;
use crate::model::HawkesParams;

/// Draws in log-parameter space, flattened as `(mu, alpha, beta)`.
///
/// Every `stride`-th iteration is kept. Whenever the store reaches its
/// capacity every other draw is dropped and the stride doubles, so memory
/// stays bounded under any budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleChain {
    pub k: usize,
    pub draws: Vec<Vec<f64>>,
    /// Iteration number of each stored draw.
    pub iterations: Vec<u64>,
    /// Index of the first post-burn-in draw.
    pub burn_in: usize,
    pub stride: u64,
    capacity: usize,
}

impl SampleChain {
    pub fn new(k: usize, capacity: usize) -> Self {
        SampleChain {
            k,
            draws: Vec::new(),
            iterations: Vec::new(),
            burn_in: 0,
            stride: 1,
            capacity: capacity.max(2),
        }
    }

    /// Offers the state after iteration `iteration`; kept if on the stride.
    pub fn offer(&mut self, iteration: u64, xi: &[f64]) {
        if !iteration.is_multiple_of(self.stride) {
            return;
        }
        self.draws.push(xi.to_vec());
        self.iterations.push(iteration);
        if self.draws.len() >= self.capacity {
            self.stride *= 2;
            let stride = self.stride;
            let mut keep = self.iterations.iter().map(|&it| it % stride == 0);
            self.draws.retain(|_| keep.next().unwrap_or(false));
            self.iterations.retain(|&it| it % stride == 0);
        }
    }

    /// Marks draws from iterations `< first_kept` as burn-in. The final state
    /// is appended first if nothing would survive.
    pub fn finish(&mut self, first_kept: u64, last_iteration: u64, last_xi: &[f64]) {
        if self.iterations.last() != Some(&last_iteration) {
            self.draws.push(last_xi.to_vec());
            self.iterations.push(last_iteration);
        }
        self.burn_in = self
            .iterations
            .partition_point(|&it| it < first_kept)
            .min(self.draws.len() - 1);
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn kept(&self) -> &[Vec<f64>] {
        &self.draws[self.burn_in..]
    }

    fn column(&self, c: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self.kept().iter().map(|d| exp(d[c])).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    /// Posterior mean of `exp(xi)`.
    pub fn mean(&self) -> Result<HawkesParams> {
        let n = self.kept().len() as f64;
        let dim = self.k + 2 * self.k * self.k;
        let flat: Vec<f64> = (0..dim)
            .map(|c| self.kept().iter().map(|d| exp(d[c])).sum::<f64>() / n)
            .collect();
        HawkesParams::unflatten(self.k, &flat)
    }

    /// Posterior median of `exp(xi)`.
    pub fn median(&self) -> Result<HawkesParams> {
        let dim = self.k + 2 * self.k * self.k;
        let flat: Vec<f64> = (0..dim)
            .map(|c| quantile_sorted(&self.column(c), 0.5))
            .collect();
        HawkesParams::unflatten(self.k, &flat)
    }

    /// Equal-tailed empirical intervals at `level`.
    pub fn intervals(&self, level: f64) -> Result<ParamIntervals> {
        let dim = self.k + 2 * self.k * self.k;
        let tail = 0.5 * (1.0 - level);
        let flat: Vec<Interval> = (0..dim)
            .map(|c| {
                let col = self.column(c);
                Interval {
                    lo: quantile_sorted(&col, tail),
                    hi: quantile_sorted(&col, 1.0 - tail),
                }
            })
            .collect();
        ParamIntervals::from_flat(self.k, &flat)
    }

    /// Column names matching the flattened layout.
    pub fn column_names(&self) -> Vec<alloc::string::String> {
        let k = self.k;
        let mut names: Vec<_> = (0..k).map(|l| alloc::format!("xi_mu_{l}")).collect();
        for p in ["alpha", "beta"] {
            for a in 0..k {
                for b in 0..k {
                    names.push(alloc::format!("xi_{p}_{a}_{b}"));
                }
            }
        }
        names
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thinning_bounds_memory() {
        let mut c = SampleChain::new(1, 100);
        for it in 0..10_000u64 {
            c.offer(it, &[0.0, 0.0, 0.0]);
        }
        assert!(c.len() < 100);
        assert!(c.stride > 1);
        assert!(c.iterations.windows(2).all(|w| w[1] - w[0] == c.stride));
        c.finish(5_000, 9_999, &[0.0, 0.0, 0.0]);
        assert!(c.burn_in < c.len());
        assert!(c.iterations[c.burn_in] >= 5_000);
    }

    #[test]
    fn burn_in_never_empties_chain() {
        let mut c = SampleChain::new(1, 10);
        c.offer(0, &[1.0, 1.0, 1.0]);
        c.finish(1, 0, &[1.0, 1.0, 1.0]);
        assert_eq!(c.kept().len(), 1);
    }

    #[test]
    fn summaries() {
        let mut c = SampleChain::new(1, 1000);
        for it in 0..5u64 {
            let x = (it as f64 + 1.0).ln();
            c.offer(it, &[x, x, x]);
        }
        c.finish(0, 4, &[5f64.ln(); 3]);
        let m = c.mean().unwrap();
        assert!((m.mu[0] - 3.0).abs() < 1e-12);
        assert!((c.median().unwrap().mu[0] - 3.0).abs() < 1e-12);
        let iv = c.intervals(0.5).unwrap();
        assert!((iv.mu[0].lo - 2.0).abs() < 1e-12 && (iv.mu[0].hi - 4.0).abs() < 1e-12);
        assert_eq!(c.column_names().len(), 3);
    }
}
