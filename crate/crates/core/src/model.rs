//! Event data, model parameters and priors.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::gamma::Gamma;
use crate::matrix::Matrix;

/// Marked event times `(t_i, d_i)` on `[0, T]` with `K` dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct EventSequence {
    times: Vec<f64>,
    dims: Vec<usize>,
    horizon: f64,
    k: usize,
    counts: Vec<usize>,
}

impl EventSequence {
    /// Validates and builds a sequence. Times must be non-decreasing; equal
    /// times are allowed only in distinct dimensions.
    pub fn new(times: Vec<f64>, dims: Vec<usize>, horizon: f64, k: usize) -> Result<Self> {
        if times.len() != dims.len() {
            return Err(HawkesError::DimensionMismatch {
                expected: times.len(),
                found: dims.len(),
            });
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(HawkesError::InvalidHorizon(horizon));
        }
        if k == 0 {
            return Err(HawkesError::Empty("dimension set"));
        }
        let mut counts = alloc::vec![0usize; k];
        let mut group_start = 0;
        for i in 0..times.len() {
            let (t, d) = (times[i], dims[i]);
            if !t.is_finite() {
                return Err(HawkesError::NonFiniteTime { index: i, time: t });
            }
            if d >= k {
                return Err(HawkesError::DimensionOutOfRange {
                    index: i,
                    dim: d,
                    k,
                });
            }
            if !(0.0..=horizon).contains(&t) {
                return Err(HawkesError::OutOfHorizon {
                    index: i,
                    time: t,
                    horizon,
                });
            }
            if i > 0 {
                if t < times[i - 1] {
                    return Err(HawkesError::UnsortedTimes { index: i, time: t });
                }
                if t > times[i - 1] {
                    group_start = i;
                } else if dims[group_start..i].contains(&d) {
                    return Err(HawkesError::DuplicateEvent {
                        index: i,
                        dim: d,
                        time: t,
                    });
                }
            }
            counts[d] += 1;
        }
        Ok(EventSequence {
            times,
            dims,
            horizon,
            k,
            counts,
        })
    }

    pub fn empty(horizon: f64, k: usize) -> Result<Self> {
        EventSequence::new(Vec::new(), Vec::new(), horizon, k)
    }

    /// Builds from already validated parts (sub-windows of a valid sequence).
    pub(crate) fn from_parts_unchecked(
        times: Vec<f64>,
        dims: Vec<usize>,
        horizon: f64,
        k: usize,
    ) -> Self {
        let mut counts = alloc::vec![0usize; k];
        for &d in &dims {
            counts[d] += 1;
        }
        EventSequence {
            times,
            dims,
            horizon,
            k,
            counts,
        }
    }

    /// Same events observed over a longer (or equal) horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        EventSequence::new(self.times.clone(), self.dims.clone(), horizon, self.k)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.times.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    #[inline]
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        self.k
    }

    /// Per-dimension event counts `n_k`.
    #[inline]
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.times.iter().copied().zip(self.dims.iter().copied())
    }

    /// Indices of the events in each dimension, in time order.
    pub fn indices_by_dim(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.counts.iter().map(|&c| Vec::with_capacity(c)).collect();
        for (i, &d) in self.dims.iter().enumerate() {
            out[d].push(i);
        }
        out
    }
}

/// Model parameters `theta = (mu, alpha, beta)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HawkesParams {
    pub mu: Vec<f64>,
    pub alpha: Matrix,
    pub beta: Matrix,
}

impl HawkesParams {
    pub fn new(mu: Vec<f64>, alpha: Matrix, beta: Matrix) -> Result<Self> {
        let p = HawkesParams { mu, alpha, beta };
        p.validate()?;
        Ok(p)
    }

    /// Same value in every entry.
    pub fn uniform(k: usize, mu: f64, alpha: f64, beta: f64) -> Result<Self> {
        HawkesParams::new(
            alloc::vec![mu; k],
            Matrix::from_elem(k, alpha),
            Matrix::from_elem(k, beta),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.mu.len();
        if k == 0 {
            return Err(HawkesError::Empty("mu"));
        }
        for m in [&self.alpha, &self.beta] {
            if m.dim() != k {
                return Err(HawkesError::DimensionMismatch {
                    expected: k,
                    found: m.dim(),
                });
            }
        }
        for &m in &self.mu {
            if !(m > 0.0 && m.is_finite()) {
                return Err(HawkesError::InvalidParameter {
                    name: "mu",
                    value: m,
                });
            }
        }
        for &a in self.alpha.iter() {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(HawkesError::InvalidParameter {
                    name: "alpha",
                    value: a,
                });
            }
        }
        for &b in self.beta.iter() {
            if !(b > 0.0 && b.is_finite()) {
                return Err(HawkesError::InvalidParameter {
                    name: "beta",
                    value: b,
                });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        self.mu.len()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.alpha.spectral_radius()
    }

    /// Flattened `(mu, alpha, beta)`: `K + 2K^2` entries.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.mu.clone();
        v.extend_from_slice(self.alpha.as_slice());
        v.extend_from_slice(self.beta.as_slice());
        v
    }

    pub fn unflatten(k: usize, v: &[f64]) -> Result<Self> {
        if v.len() != k + 2 * k * k {
            return Err(HawkesError::DimensionMismatch {
                expected: k + 2 * k * k,
                found: v.len(),
            });
        }
        let mu = v[..k].to_vec();
        let alpha = Matrix::from_fn(k, |a, b| v[k + a * k + b]);
        let beta = Matrix::from_fn(k, |a, b| v[k + k * k + a * k + b]);
        HawkesParams::new(mu, alpha, beta)
    }

    /// Stationary mean rate per dimension, `(I - A^T)^{-1} mu`, by fixed-point
    /// iteration (requires spectral radius < 1).
    pub fn stationary_rates(&self) -> Result<Vec<f64>> {
        let rho = self.spectral_radius();
        if rho >= 1.0 {
            return Err(HawkesError::NonStationary(rho));
        }
        let k = self.dimension();
        let mut x = self.mu.clone();
        for _ in 0..100_000 {
            let mut next = self.mu.clone();
            for l in 0..k {
                for src in 0..k {
                    next[l] += self.alpha[(src, l)] * x[src];
                }
            }
            let diff = next
                .iter()
                .zip(&x)
                .map(|(a, b)| crate::math::abs(a - b))
                .fold(0.0, f64::max);
            x = next;
            if diff < 1e-14 * x.iter().copied().fold(0.0, f64::max) {
                break;
            }
        }
        Ok(x)
    }
}

/// Independent Gamma priors: `mu_l ~ Gamma(a_l, b_l)`,
/// `alpha_kl ~ Gamma(e_kl, f_kl)`, `beta_kl ~ Gamma(w_kl, s_kl)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaPriorSet {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub e: Matrix,
    pub f: Matrix,
    pub w: Matrix,
    pub s: Matrix,
}

impl GammaPriorSet {
    /// Same hyperparameters for every entry.
    pub fn uniform(k: usize, a: f64, b: f64, e: f64, f: f64, w: f64, s: f64) -> Result<Self> {
        let p = GammaPriorSet {
            a: alloc::vec![a; k],
            b: alloc::vec![b; k],
            e: Matrix::from_elem(k, e),
            f: Matrix::from_elem(k, f),
            w: Matrix::from_elem(k, w),
            s: Matrix::from_elem(k, s),
        };
        p.validate()?;
        Ok(p)
    }

    /// `a = 2, b = 4, e = 2, f = 4, w = 2, s = 0.5`.
    pub fn standard(k: usize) -> Self {
        GammaPriorSet::uniform(k, 2.0, 4.0, 2.0, 4.0, 2.0, 0.5).expect("positive hyperparameters")
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.a.len();
        if k == 0 {
            return Err(HawkesError::Empty("prior set"));
        }
        if self.b.len() != k {
            return Err(HawkesError::DimensionMismatch {
                expected: k,
                found: self.b.len(),
            });
        }
        for m in [&self.e, &self.f, &self.w, &self.s] {
            if m.dim() != k {
                return Err(HawkesError::DimensionMismatch {
                    expected: k,
                    found: m.dim(),
                });
            }
        }
        let all = self
            .a
            .iter()
            .chain(&self.b)
            .chain(self.e.iter())
            .chain(self.f.iter());
        for &v in all.chain(self.w.iter()).chain(self.s.iter()) {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HawkesError::InvalidParameter {
                    name: "prior hyperparameter",
                    value: v,
                });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        self.a.len()
    }

    pub fn mu_prior(&self, l: usize) -> Gamma {
        Gamma {
            shape: self.a[l],
            rate: self.b[l],
        }
    }

    pub fn alpha_prior(&self, k: usize, l: usize) -> Gamma {
        Gamma {
            shape: self.e[(k, l)],
            rate: self.f[(k, l)],
        }
    }

    pub fn beta_prior(&self, k: usize, l: usize) -> Gamma {
        Gamma {
            shape: self.w[(k, l)],
            rate: self.s[(k, l)],
        }
    }

    /// Prior mode where it exists, prior mean otherwise (shape <= 1).
    pub fn center(&self) -> HawkesParams {
        let pick = |g: Gamma| if g.shape > 1.0 { g.mode() } else { g.mean() };
        let k = self.dimension();
        HawkesParams {
            mu: (0..k).map(|l| pick(self.mu_prior(l))).collect(),
            alpha: Matrix::from_fn(k, |a, b| pick(self.alpha_prior(a, b))),
            beta: Matrix::from_fn(k, |a, b| pick(self.beta_prior(a, b))),
        }
    }

    /// Log prior density at `theta` (alpha entries must be positive).
    pub fn ln_density(&self, theta: &HawkesParams) -> f64 {
        let k = self.dimension();
        let mut acc = 0.0;
        for l in 0..k {
            acc += self.mu_prior(l).ln_pdf(theta.mu[l]);
        }
        for a in 0..k {
            for b in 0..k {
                acc += self.alpha_prior(a, b).ln_pdf(theta.alpha[(a, b)]);
                acc += self.beta_prior(a, b).ln_pdf(theta.beta[(a, b)]);
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn sequence_validation() {
        assert!(EventSequence::new(vec![0.5, 0.5], vec![0, 1], 1.0, 2).is_ok());
        assert!(matches!(
            EventSequence::new(vec![0.5, 0.5], vec![1, 1], 1.0, 2),
            Err(HawkesError::DuplicateEvent { index: 1, .. })
        ));
        assert!(matches!(
            EventSequence::new(vec![0.5, 0.5, 0.5], vec![1, 0, 1], 1.0, 2),
            Err(HawkesError::DuplicateEvent { index: 2, .. })
        ));
        assert!(matches!(
            EventSequence::new(vec![0.5, 0.4], vec![0, 0], 1.0, 1),
            Err(HawkesError::UnsortedTimes { index: 1, .. })
        ));
        assert!(EventSequence::new(vec![1.5], vec![0], 1.0, 1).is_err());
        assert!(EventSequence::new(vec![0.5], vec![2], 1.0, 2).is_err());
        assert!(EventSequence::new(vec![f64::NAN], vec![0], 1.0, 1).is_err());
        let s = EventSequence::new(vec![0.1, 0.2, 0.3], vec![0, 2, 0], 1.0, 3).unwrap();
        assert_eq!(s.counts(), &[2, 0, 1]);
        assert_eq!(s.counts().iter().sum::<usize>(), s.len());
    }

    #[test]
    fn params_validation() {
        assert!(HawkesParams::uniform(2, 0.5, 0.0, 4.0).is_ok());
        assert!(HawkesParams::uniform(2, 0.0, 0.3, 4.0).is_err());
        assert!(HawkesParams::uniform(2, 0.5, -0.1, 4.0).is_err());
        assert!(HawkesParams::uniform(2, 0.5, 0.3, 0.0).is_err());
    }

    #[test]
    fn dense_stationary_rate() {
        let p = HawkesParams::uniform(3, 0.5, 0.3, 4.0).unwrap();
        let total: f64 = p.stationary_rates().unwrap().iter().sum();
        assert!((total - 15.0).abs() < 1e-9);
    }

    #[test]
    fn prior_center_is_mode() {
        let c = GammaPriorSet::standard(2).center();
        assert_eq!(c.mu, vec![0.25, 0.25]);
        assert_eq!(c.alpha[(0, 1)], 0.25);
        assert_eq!(c.beta[(1, 0)], 2.0);
    }

    #[test]
    fn flatten_roundtrip() {
        let p = HawkesParams::new(
            vec![0.1, 0.2],
            Matrix::from_fn(2, |a, b| 0.1 * (a + 2 * b + 1) as f64),
            Matrix::from_fn(2, |a, b| 1.0 + (a * 2 + b) as f64),
        )
        .unwrap();
        assert_eq!(HawkesParams::unflatten(2, &p.flatten()).unwrap(), p);
    }
}
