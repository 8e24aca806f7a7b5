//! Latent branching structure: hard parent assignments and soft
//! responsibilities.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::math::exp;
use crate::matrix::Matrix;
use crate::model::{EventSequence, HawkesParams};
use crate::scan::scan;

/// One parent per event; `parents[i] == i` marks an immigrant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branching {
    parents: Vec<usize>,
}

impl Branching {
    pub fn new(parents: Vec<usize>, seq: &EventSequence) -> Result<Self> {
        let b = Branching { parents };
        b.validate(seq)?;
        Ok(b)
    }

    pub fn all_immigrants(n: usize) -> Self {
        Branching {
            parents: (0..n).collect(),
        }
    }

    pub(crate) fn from_unchecked(parents: Vec<usize>) -> Self {
        Branching { parents }
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn is_immigrant(&self, i: usize) -> bool {
        self.parents[i] == i
    }

    /// Parents must precede their child strictly in time.
    pub fn validate(&self, seq: &EventSequence) -> Result<()> {
        if self.parents.len() != seq.len() {
            return Err(HawkesError::DimensionMismatch {
                expected: seq.len(),
                found: self.parents.len(),
            });
        }
        let t = seq.times();
        for (i, &j) in self.parents.iter().enumerate() {
            if j != i && (j > i || t[j] >= t[i]) {
                return Err(HawkesError::InvalidParent {
                    child: i,
                    parent: j,
                });
            }
        }
        Ok(())
    }

    /// Counts `|I_l|`, `|O_kl|` and summed lags of the assignment.
    pub fn summary(&self, seq: &EventSequence) -> BranchingSummary {
        let k = seq.dimension();
        let mut out = BranchingSummary::zeros(k);
        let (t, d) = (seq.times(), seq.dims());
        for (i, &j) in self.parents.iter().enumerate() {
            if j == i {
                out.immigrants[d[i]] += 1.0;
            } else {
                out.offspring[(d[j], d[i])] += 1.0;
                out.lag[(d[j], d[i])] += t[i] - t[j];
            }
        }
        out
    }
}

/// Expected (or counted) branching statistics of a sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchingSummary {
    /// `sum_{d_i = l} p_ii`.
    pub immigrants: Vec<f64>,
    /// `sum_{d_i = l, d_j = k, j < i} p_ij`.
    pub offspring: Matrix,
    /// `sum_{d_i = l, d_j = k, j < i} p_ij (t_i - t_j)`.
    pub lag: Matrix,
}

impl BranchingSummary {
    pub fn zeros(k: usize) -> Self {
        BranchingSummary {
            immigrants: alloc::vec![0.0; k],
            offspring: Matrix::from_elem(k, 0.0),
            lag: Matrix::from_elem(k, 0.0),
        }
    }
}

/// Unnormalised responsibility weights: `base_l` for the immigrant option
/// and `scale_kl exp(-rate_kl (t_i - t_j))` for each earlier event.
///
/// EM uses `(mu, alpha beta, beta)`; variational inference uses the
/// geometric-mean weights of its Gamma factors.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponsibilityKernel {
    pub base: Vec<f64>,
    pub scale: Matrix,
    pub rate: Matrix,
}

impl ResponsibilityKernel {
    pub fn from_params(params: &HawkesParams) -> Self {
        let k = params.dimension();
        ResponsibilityKernel {
            base: params.mu.clone(),
            scale: Matrix::from_fn(k, |a, b| params.alpha[(a, b)] * params.beta[(a, b)]),
            rate: params.beta.clone(),
        }
    }

    /// Aggregated responsibilities in O(n K^2) without forming rows.
    pub fn summarize(&self, seq: &EventSequence) -> BranchingSummary {
        let k = seq.dimension();
        let mut out = BranchingSummary::zeros(k);
        scan(seq, &self.rate, true, |v| {
            let l = v.dim;
            let mut z = self.base[l];
            for src in 0..k {
                z += self.scale[(src, l)] * v.a[src];
            }
            out.immigrants[l] += self.base[l] / z;
            for src in 0..k {
                let w = self.scale[(src, l)] / z;
                out.offspring[(src, l)] += w * v.a[src];
                out.lag[(src, l)] += w * v.d[src];
            }
        });
        out
    }

    /// Dense rows (O(n^2) memory); for small sequences and tests.
    pub fn rows(&self, seq: &EventSequence) -> BranchingProbs {
        let (t, d) = (seq.times(), seq.dims());
        let mut rows = Vec::with_capacity(seq.len());
        for i in 0..seq.len() {
            let l = d[i];
            let mut row = alloc::vec![0.0; i + 1];
            let mut z = self.base[l];
            row[i] = self.base[l];
            for j in 0..i {
                if t[j] < t[i] {
                    let w = self.scale[(d[j], l)] * exp(-self.rate[(d[j], l)] * (t[i] - t[j]));
                    row[j] = w;
                    z += w;
                }
            }
            for w in &mut row {
                *w /= z;
            }
            rows.push(row);
        }
        BranchingProbs { rows }
    }
}

/// Row-stochastic lower-triangular responsibilities; row `i` has `i + 1`
/// entries and entry `i` is the immigrant probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchingProbs {
    pub rows: Vec<Vec<f64>>,
}

impl BranchingProbs {
    pub fn summary(&self, seq: &EventSequence) -> BranchingSummary {
        let mut out = BranchingSummary::zeros(seq.dimension());
        let (t, d) = (seq.times(), seq.dims());
        for (i, row) in self.rows.iter().enumerate() {
            out.immigrants[d[i]] += row[i];
            for (j, &p) in row[..i].iter().enumerate() {
                out.offspring[(d[j], d[i])] += p;
                out.lag[(d[j], d[i])] += p * (t[i] - t[j]);
            }
        }
        out
    }
}

/// EM responsibilities `p_ij` (dense).
pub fn branching_probs(seq: &EventSequence, params: &HawkesParams) -> BranchingProbs {
    ResponsibilityKernel::from_params(params).rows(seq)
}
