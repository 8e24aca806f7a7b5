//! Estimation metrics, likelihood comparisons across subsampling ratios,
//! time-rescaling diagnostics and the compensator information-loss ratio.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::fit::{FitResult, ParamIntervals};
use crate::math::{abs, exp, expm1, ln, sqrt};
use crate::model::{EventSequence, HawkesParams};
use crate::quad::integrate;
use crate::scan::scan_target;

/// `int_0^inf (a1 b1 e^{-b1 t} - a2 b2 e^{-b2 t})^2 dt`.
pub fn kernel_ise(a1: f64, b1: f64, a2: f64, b2: f64) -> f64 {
    let v = a1 * a1 * b1 / 2.0 + a2 * a2 * b2 / 2.0 - 2.0 * a1 * a2 * b1 * b2 / (b1 + b2);
    v.max(0.0)
}

/// Average over kernel pairs of the root integrated squared error. With
/// `mask_zero_truth` only pairs whose true `alpha` is non-zero count.
pub fn rmise(truth: &HawkesParams, est: &HawkesParams, mask_zero_truth: bool) -> f64 {
    let k = truth.dimension();
    let (mut acc, mut n) = (0.0, 0usize);
    for a in 0..k {
        for b in 0..k {
            if mask_zero_truth && truth.alpha[(a, b)] <= 0.0 {
                continue;
            }
            acc += sqrt(kernel_ise(
                truth.alpha[(a, b)],
                truth.beta[(a, b)],
                est.alpha[(a, b)],
                est.beta[(a, b)],
            ));
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        acc / n as f64
    }
}

/// Mean absolute error of `ln mu`.
pub fn mae_mu(truth: &[f64], est: &[f64]) -> Result<f64> {
    if truth.len() != est.len() {
        return Err(HawkesError::DimensionMismatch {
            expected: truth.len(),
            found: est.len(),
        });
    }
    let mut acc = 0.0;
    for (&t, &e) in truth.iter().zip(est) {
        if !(e > 0.0) {
            return Err(HawkesError::InvalidParameter {
                name: "estimated mu",
                value: e,
            });
        }
        if !(t > 0.0) {
            return Err(HawkesError::InvalidParameter {
                name: "true mu",
                value: t,
            });
        }
        acc += abs(ln(t) - ln(e));
    }
    Ok(acc / truth.len() as f64)
}

/// Interval score at central level `level`: width plus
/// `2 / (1 - level)` times the distance by which `x` falls outside.
pub fn interval_score(lo: f64, hi: f64, x: f64, level: f64) -> f64 {
    let penalty = 2.0 / (1.0 - level);
    let mut s = hi - lo;
    if x < lo {
        s += penalty * (lo - x);
    }
    if x > hi {
        s += penalty * (x - hi);
    }
    s
}

/// Mean interval score over all `K + 2K^2` parameters.
pub fn mean_interval_score(intervals: &ParamIntervals, truth: &HawkesParams, level: f64) -> f64 {
    let iv = intervals.flatten();
    let t = truth.flatten();
    iv.iter()
        .zip(&t)
        .map(|(i, &x)| interval_score(i.lo, i.hi, x, level))
        .sum::<f64>()
        / t.len() as f64
}

/// Average coverage rate and average interval width over all parameters.
pub fn coverage_and_width(intervals: &ParamIntervals, truth: &HawkesParams) -> (f64, f64) {
    let iv = intervals.flatten();
    let t = truth.flatten();
    let n = t.len() as f64;
    let covered = iv.iter().zip(&t).filter(|(i, &x)| i.contains(x)).count() as f64;
    let width = iv.iter().map(|i| i.width()).sum::<f64>();
    (covered / n, width / n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub rmise: f64,
    pub mae_mu: f64,
    /// Interval metrics are absent for point estimators.
    pub is95: Option<f64>,
    pub acr: Option<f64>,
    pub aiw: Option<f64>,
}

pub fn estimation_report(
    truth: &HawkesParams,
    fit: &FitResult,
    mask_zero_truth: bool,
) -> Result<EstimationReport> {
    let est = &fit.estimate;
    if est.dimension() != truth.dimension() {
        return Err(HawkesError::DimensionMismatch {
            expected: truth.dimension(),
            found: est.dimension(),
        });
    }
    let (is95, acr, aiw) = match &fit.intervals {
        Some(iv) => {
            let (acr, aiw) = coverage_and_width(iv, truth);
            (
                Some(mean_interval_score(iv, truth, 0.95)),
                Some(acr),
                Some(aiw),
            )
        }
        None => (None, None, None),
    };
    Ok(EstimationReport {
        rmise: rmise(truth, est, mask_zero_truth),
        mae_mu: mae_mu(&truth.mu, &est.mu)?,
        is95,
        acr,
        aiw,
    })
}

/// One run's exact observed log-likelihood.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdlRecord {
    pub dataset: u64,
    pub kappa: f64,
    pub init: u64,
    pub odl: f64,
}

/// Best observed log-likelihood over inits per `(dataset, kappa)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitComparison {
    bodl: BTreeMap<(u64, u64), f64>,
}

impl FitComparison {
    pub fn bodl(&self, dataset: u64, kappa: f64) -> Option<f64> {
        self.bodl.get(&(dataset, kappa.to_bits())).copied()
    }

    /// `BODL(kappa1) / BODL(kappa2)` on one dataset.
    pub fn rbodl(&self, dataset: u64, kappa1: f64, kappa2: f64) -> Option<f64> {
        Some(self.bodl(dataset, kappa1)? / self.bodl(dataset, kappa2)?)
    }

    pub fn datasets(&self) -> Vec<u64> {
        let mut d: Vec<u64> = self.bodl.keys().map(|&(d, _)| d).collect();
        d.dedup();
        d
    }

    pub fn kappas(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.bodl.keys().map(|&(_, b)| f64::from_bits(b)).collect();
        k.sort_by(|a, b| a.total_cmp(b));
        k.dedup();
        k
    }

    /// Mean RBODL across datasets having both ratios.
    pub fn mean_rbodl(&self, kappa: f64, reference: f64) -> Option<f64> {
        let v: Vec<f64> = self
            .datasets()
            .into_iter()
            .filter_map(|d| self.rbodl(d, kappa, reference))
            .collect();
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    }
}

/// Non-finite log-likelihoods (failed runs) are ignored.
pub fn bodl_rbodl(runs: &[OdlRecord]) -> FitComparison {
    let mut bodl = BTreeMap::new();
    for r in runs.iter().filter(|r| r.odl.is_finite()) {
        let e = bodl
            .entry((r.dataset, r.kappa.to_bits()))
            .or_insert(f64::NEG_INFINITY);
        if r.odl > *e {
            *e = r.odl;
        }
    }
    FitComparison { bodl }
}

/// Kolmogorov-Smirnov distance to Uniform(0, 1) with its asymptotic
/// p-value (Stephens' small-sample adjustment).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_uniform(values: &[f64]) -> KsTest {
    let n = values.len();
    if n == 0 {
        return KsTest {
            n,
            statistic: 0.0,
            p_value: 1.0,
        };
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &z) in v.iter().enumerate() {
        let z = z.clamp(0.0, 1.0);
        d = d.max((i + 1) as f64 / nf - z).max(z - i as f64 / nf);
    }
    let en = sqrt(nf);
    KsTest {
        n,
        statistic: d,
        p_value: kolmogorov_q((en + 0.12 + 0.11 / en) * d),
    }
}

/// `Q_KS(x) = 2 sum_{j >= 1} (-1)^{j-1} exp(-2 j^2 x^2)`.
fn kolmogorov_q(x: f64) -> f64 {
    if x < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = exp(-2.0 * jf * jf * x * x);
        sum += sign * term;
        if term < 1e-16 * abs(sum) || term < 1e-300 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Rescaled inter-arrival times of one dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaledDimension {
    pub dim: usize,
    /// `z_i = 1 - exp(-(Lambda(t_i) - Lambda(t_{i-1})))`, in event order.
    pub z: Vec<f64>,
    pub ks: KsTest,
}

impl RescaledDimension {
    /// `(empirical, theoretical)` quantile pairs for a uniform QQ plot.
    pub fn qq_pairs(&self) -> Vec<(f64, f64)> {
        let mut z = self.z.clone();
        z.sort_by(|a, b| a.total_cmp(b));
        let n = z.len() as f64;
        z.into_iter()
            .enumerate()
            .map(|(i, v)| (v, (i as f64 + 0.5) / n))
            .collect()
    }
}

/// Exact compensator `Lambda_l(t_i)` at every event of dimension `l`.
pub fn compensator_at_events(seq: &EventSequence, params: &HawkesParams, l: usize) -> Vec<f64> {
    let k = seq.dimension();
    let by_dim = seq.indices_by_dim();
    let times = seq.times();
    let mut out = Vec::with_capacity(seq.counts()[l]);
    scan_target(seq, &params.beta, l, |i, a| {
        let t = times[i];
        let mut lam = params.mu[l] * t;
        for src in 0..k {
            let before = by_dim[src].partition_point(|&j| times[j] < t) as f64;
            lam += params.alpha[(src, l)] * (before - a[src]);
        }
        out.push(lam);
    });
    out
}

/// Time-rescaling transform and KS test for every dimension.
pub fn time_rescaling(
    seq: &EventSequence,
    params: &HawkesParams,
) -> Result<Vec<RescaledDimension>> {
    params.validate()?;
    if params.dimension() != seq.dimension() {
        return Err(HawkesError::DimensionMismatch {
            expected: seq.dimension(),
            found: params.dimension(),
        });
    }
    Ok((0..seq.dimension())
        .map(|l| {
            let lam = compensator_at_events(seq, params, l);
            let mut prev = 0.0;
            let z: Vec<f64> = lam
                .iter()
                .map(|&v| {
                    let z = -expm1(-(v - prev));
                    prev = v;
                    z
                })
                .collect();
            let ks = ks_uniform(&z);
            RescaledDimension { dim: l, z, ks }
        })
        .collect())
}

/// Quadrature value of the information loss ratio
/// `phi(delta, T) = T^-1 int_0^T [1 - (1 - e^{-beta u}) / c(u)] du`, where
/// `u = T - t` and `c(u) = beta u` for `u < delta`, one otherwise.
pub fn info_loss_ratio(beta: f64, delta: f64, horizon: f64) -> Result<f64> {
    for (name, v) in [("beta", beta), ("delta", delta), ("horizon", horizon)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(HawkesError::InvalidParameter { name, value: v });
        }
    }
    if delta >= horizon {
        return Err(HawkesError::InvalidParameter {
            name: "delta",
            value: delta,
        });
    }
    let near = |u: f64| {
        let s = beta * u;
        if s < 1e-8 {
            // 1 - (1 - e^-s)/s = s/2 - s^2/6 + ...
            s / 2.0 - s * s / 6.0
        } else {
            1.0 + expm1(-s) / s
        }
    };
    let a = integrate(near, 0.0, delta, 1e-15, 1e-12, 200);
    let b = integrate(|u| exp(-beta * u), delta, horizon, 1e-15, 1e-12, 500);
    Ok((a.value + b.value) / horizon)
}

/// Two-part analytic bound on `|phi(delta, T)|`.
pub fn info_loss_bound(beta: f64, delta: f64, horizon: f64) -> f64 {
    -expm1(-beta * (horizon - delta)) / (beta * horizon) + beta * delta * delta / (4.0 * horizon)
}
