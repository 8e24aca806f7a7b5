//! The thinning simulator against an independent cluster construction, and
//! time-rescaling diagnostics on simulated data.

use mhp_core::metrics::{ks_uniform, time_rescaling};
use mhp_core::simulate::simulate_hawkes;
use mhp_core::{simulate, HawkesParams, Matrix, ScenarioKind, ScenarioSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};

/// Per-dimension counts from the branching (cluster) representation:
/// Poisson immigrants, each event begetting Poisson(alpha_kl) children at
/// Exp(beta_kl) delays.
fn cluster_counts(p: &HawkesParams, horizon: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = p.dimension();
    let mut counts = vec![0; k];
    let mut stack: Vec<(usize, f64)> = Vec::new();
    for l in 0..k {
        let n = Poisson::new(p.mu[l] * horizon).unwrap().sample(rng) as usize;
        for _ in 0..n {
            stack.push((l, rng.random::<f64>() * horizon));
        }
    }
    while let Some((d, t)) = stack.pop() {
        counts[d] += 1;
        for l in 0..k {
            let a = p.alpha[(d, l)];
            if a <= 0.0 {
                continue;
            }
            let kids = Poisson::new(a).unwrap().sample(rng) as usize;
            let delay = Exp::new(p.beta[(d, l)]).unwrap();
            for _ in 0..kids {
                let c = t + delay.sample(rng);
                if c < horizon {
                    stack.push((l, c));
                }
            }
        }
    }
    counts
}

#[test]
fn thinning_and_cluster_samplers_agree_on_mean_counts() {
    let p = HawkesParams::new(
        vec![0.5, 0.3],
        Matrix::from_rows(vec![vec![0.3, 0.1], vec![0.2, 0.2]]).unwrap(),
        Matrix::from_rows(vec![vec![2.0, 1.0], vec![3.0, 2.5]]).unwrap(),
    )
    .unwrap();
    let (horizon, reps) = (1000.0, 40);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut thin = [0.0; 2];
    let mut cluster = [0.0; 2];
    for _ in 0..reps {
        let seq = simulate_hawkes(&p, horizon, &mut rng).unwrap();
        let c = cluster_counts(&p, horizon, &mut rng);
        for l in 0..2 {
            thin[l] += seq.counts()[l] as f64 / reps as f64;
            cluster[l] += c[l] as f64 / reps as f64;
        }
    }
    let stationary = p.stationary_rates().unwrap();
    for l in 0..2 {
        let expect = stationary[l] * horizon;
        assert!(
            (thin[l] - cluster[l]).abs() < 0.04 * expect,
            "dim {l}: {} vs {}",
            thin[l],
            cluster[l]
        );
        assert!(
            (thin[l] - expect).abs() < 0.04 * expect,
            "dim {l}: {} vs {expect}",
            thin[l]
        );
    }
}

#[test]
fn poisson_rescaling_is_uniform() {
    let p = HawkesParams::uniform(1, 0.8, 0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let seq = simulate_hawkes(&p, 2000.0, &mut rng).unwrap();
    let r = time_rescaling(&seq, &p).unwrap();
    assert!(r[0].ks.p_value > 0.01, "{:?}", r[0].ks);
}

#[test]
fn doubled_baseline_inflates_rescaled_gaps() {
    let (seq, truth) = simulate(&ScenarioSpec {
        kind: ScenarioKind::Dense3,
        horizon: 300.0,
        seed: 4,
    })
    .unwrap();
    let mut wrong = truth.clone();
    for m in &mut wrong.mu {
        *m *= 2.0;
    }
    for dim in time_rescaling(&seq, &wrong).unwrap() {
        let mean = dim.z.iter().sum::<f64>() / dim.z.len() as f64;
        assert!(mean > 0.5, "dim {}: mean z {mean}", dim.dim);
    }
}

#[test]
fn ks_rejects_a_shifted_sample() {
    let z: Vec<f64> = (0..500)
        .map(|i| 0.3 + 0.7 * (i as f64 + 0.5) / 500.0)
        .collect();
    assert!(ks_uniform(&z).p_value < 1e-6);
}
