//! Forward recursion over decaying excitation sums.
//!
//! For every (source `k`, target `l`) pair with decay rate `r_kl` it keeps
//! `A_kl(t) = sum_{t_j < t, d_j = k} exp(-r_kl (t - t_j))` and optionally
//! `D_kl(t) = sum (t - t_j) exp(-r_kl (t - t_j))`. Advancing by a gap `g`
//! maps `A -> A e^{-rg}` and `D -> (D + g A) e^{-rg}`. Events sharing a time
//! are visited before any of them is added, so ties never excite each other.

use alloc::vec::Vec;

use crate::math::exp;
use crate::matrix::Matrix;
use crate::model::EventSequence;

/// Per-event view handed to the visitor: sums for the event's own target
/// dimension, indexed by source dimension.
pub(crate) struct Visit<'a> {
    pub index: usize,
    pub time: f64,
    pub dim: usize,
    pub a: &'a [f64],
    pub d: &'a [f64],
}

pub(crate) fn scan<F: FnMut(Visit<'_>)>(
    seq: &EventSequence,
    rates: &Matrix,
    with_lag: bool,
    mut visit: F,
) {
    let k = seq.dimension();
    // target-major storage so a target's column is contiguous
    let rate_t: Vec<f64> = (0..k * k).map(|i| rates[(i % k, i / k)]).collect();
    let mut a = alloc::vec![0.0; k * k];
    let mut d = alloc::vec![0.0; k * k];
    let times = seq.times();
    let dims = seq.dims();
    let n = times.len();
    let mut now = if n > 0 { times[0] } else { 0.0 };
    let mut i = 0;
    while i < n {
        let t = times[i];
        let gap = t - now;
        if gap > 0.0 {
            for idx in 0..k * k {
                if a[idx] == 0.0 {
                    continue;
                }
                let decay = exp(-rate_t[idx] * gap);
                if with_lag {
                    d[idx] = (d[idx] + gap * a[idx]) * decay;
                }
                a[idx] *= decay;
            }
            now = t;
        }
        let mut j = i;
        while j < n && times[j] == t {
            let l = dims[j];
            visit(Visit {
                index: j,
                time: t,
                dim: l,
                a: &a[l * k..(l + 1) * k],
                d: &d[l * k..(l + 1) * k],
            });
            j += 1;
        }
        for &src in &dims[i..j] {
            for l in 0..k {
                a[l * k + src] += 1.0;
            }
        }
        i = j;
    }
}

/// Single-target variant: sums only for target `l`, visiting events of
/// dimension `l`.
pub(crate) fn scan_target<F: FnMut(usize, &[f64])>(
    seq: &EventSequence,
    rates: &Matrix,
    l: usize,
    mut visit: F,
) {
    let k = seq.dimension();
    let rate: Vec<f64> = (0..k).map(|src| rates[(src, l)]).collect();
    let mut a = alloc::vec![0.0; k];
    let times = seq.times();
    let dims = seq.dims();
    let n = times.len();
    let mut now = if n > 0 { times[0] } else { 0.0 };
    let mut i = 0;
    while i < n {
        let t = times[i];
        let gap = t - now;
        if gap > 0.0 {
            for src in 0..k {
                if a[src] != 0.0 {
                    a[src] *= exp(-rate[src] * gap);
                }
            }
            now = t;
        }
        let mut j = i;
        while j < n && times[j] == t {
            if dims[j] == l {
                visit(j, &a);
            }
            j += 1;
        }
        for &src in &dims[i..j] {
            a[src] += 1.0;
        }
        i = j;
    }
}
