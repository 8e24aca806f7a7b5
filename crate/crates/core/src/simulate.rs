//! Synthetic data: Ogata thinning and the two benchmark scenarios.

use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::math::exp;
use crate::matrix::Matrix;
use crate::model::{EventSequence, HawkesParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityLevel {
    /// 90% of off-diagonal entries are zero.
    High,
    /// 80%.
    Medium,
    /// 50%.
    Low,
}

impl SparsityLevel {
    /// Number of zero off-diagonal entries out of `K (K - 1)`.
    pub fn zero_count(&self, off_diagonal: usize) -> usize {
        let pct = match self {
            SparsityLevel::High => 90,
            SparsityLevel::Medium => 80,
            SparsityLevel::Low => 50,
        };
        // integer arithmetic so 90% of 90 is exactly 81
        off_diagonal * pct / 100
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// `K = 3`, `mu = 0.5`, `alpha = 0.3`, `beta = 4` everywhere.
    Dense3,
    /// `K = 10`, `mu = 0.1`, `beta = 4`, diagonal `alpha = 0.4`, surviving
    /// off-diagonal entries `0.1`, the rest zero.
    Sparse10(SparsityLevel),
    Custom(HawkesParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub horizon: f64,
    pub seed: u64,
}

const PATTERN_STREAM: u64 = 1;
const MAX_PATTERN_ATTEMPTS: usize = 10_000;

/// True parameters of a scenario. The sparse zero pattern depends on `seed`
/// (a separate RNG stream from event simulation); a pattern whose excitation
/// matrix is not stable is redrawn from the same stream.
pub fn scenario_params(kind: &ScenarioKind, seed: u64) -> Result<HawkesParams> {
    match kind {
        ScenarioKind::Dense3 => HawkesParams::uniform(3, 0.5, 0.3, 4.0),
        ScenarioKind::Custom(p) => {
            p.validate()?;
            Ok(p.clone())
        }
        ScenarioKind::Sparse10(level) => {
            let k = 10;
            let off: Vec<(usize, usize)> = (0..k)
                .flat_map(|a| (0..k).map(move |b| (a, b)))
                .filter(|(a, b)| a != b)
                .collect();
            let zeros = level.zero_count(off.len());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(PATTERN_STREAM);
            let mut last = 0.0;
            for _ in 0..MAX_PATTERN_ATTEMPTS {
                let mut alpha = Matrix::from_fn(k, |a, b| if a == b { 0.4 } else { 0.1 });
                for idx in sample(&mut rng, off.len(), zeros) {
                    alpha[off[idx]] = 0.0;
                }
                last = alpha.spectral_radius();
                if last < 1.0 {
                    return HawkesParams::new(
                        alloc::vec![0.1; k],
                        alpha,
                        Matrix::from_elem(k, 4.0),
                    );
                }
            }
            Err(HawkesError::NonStationary(last))
        }
    }
}

/// Simulates a scenario: parameters from [`scenario_params`], events by
/// thinning, both deterministic in `spec.seed`.
pub fn simulate(spec: &ScenarioSpec) -> Result<(EventSequence, HawkesParams)> {
    let params = scenario_params(&spec.kind, spec.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let seq = simulate_hawkes(&params, spec.horizon, &mut rng)?;
    Ok((seq, params))
}

/// Ogata thinning on `[0, horizon]`.
///
/// Between events the total intensity only decays, so its value just after
/// the last accepted event bounds it until the next candidate.
pub fn simulate_hawkes<R: Rng + ?Sized>(
    params: &HawkesParams,
    horizon: f64,
    rng: &mut R,
) -> Result<EventSequence> {
    params.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(HawkesError::InvalidHorizon(horizon));
    }
    let rho = params.spectral_radius();
    if rho >= 1.0 {
        return Err(HawkesError::NonStationary(rho));
    }
    let k = params.dimension();
    // excitation[l * k + src]: current contribution of source src to target l
    let mut excitation = alloc::vec![0.0; k * k];
    let jump: Vec<f64> = (0..k * k)
        .map(|i| {
            let (l, src) = (i / k, i % k);
            params.alpha[(src, l)] * params.beta[(src, l)]
        })
        .collect();
    let decay: Vec<f64> = (0..k * k).map(|i| params.beta[(i % k, i / k)]).collect();
    let base: f64 = params.mu.iter().sum();
    let mut times = Vec::new();
    let mut dims = Vec::new();
    let mut now = 0.0;
    let mut rates = alloc::vec![0.0; k];
    loop {
        let upper = base + excitation.iter().sum::<f64>();
        let wait: f64 = Exp1.sample(rng);
        let t = now + wait / upper;
        if t > horizon {
            break;
        }
        let gap = t - now;
        for i in 0..k * k {
            if excitation[i] != 0.0 {
                excitation[i] *= exp(-decay[i] * gap);
            }
        }
        now = t;
        let mut total = 0.0;
        for l in 0..k {
            rates[l] = params.mu[l] + excitation[l * k..(l + 1) * k].iter().sum::<f64>();
            total += rates[l];
        }
        let u = rng.random::<f64>() * upper;
        if u >= total {
            continue;
        }
        let mut acc = 0.0;
        let mut chosen = k - 1;
        for (l, &r) in rates.iter().enumerate() {
            acc += r;
            if u < acc {
                chosen = l;
                break;
            }
        }
        if times.last() == Some(&t) && dims.last() == Some(&chosen) {
            // a measure-zero collision; drop rather than create a duplicate
            continue;
        }
        times.push(t);
        dims.push(chosen);
        for l in 0..k {
            excitation[l * k + chosen] += jump[l * k + chosen];
        }
    }
    EventSequence::new(times, dims, horizon, k)
}
