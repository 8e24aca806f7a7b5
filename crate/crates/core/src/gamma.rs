//! Gamma special functions and the shape/rate Gamma distribution.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::math::{abs, exp, ln, ln_gamma, powf, sqrt};

/// Digamma function for `x > 0`.
pub fn digamma(x: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return if x == f64::INFINITY {
            f64::INFINITY
        } else {
            f64::NAN
        };
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 14.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // asymptotic series, Bernoulli coefficients
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    acc + ln(x) - 0.5 * inv - tail
}

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Regularised lower incomplete gamma function `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    if x < a + 1.0 {
        series(a, x)
    } else {
        1.0 - continued_fraction(a, x)
    }
}

/// Regularised upper incomplete gamma function `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x < a + 1.0 {
        1.0 - series(a, x)
    } else {
        continued_fraction(a, x)
    }
}

fn prefactor(a: f64, x: f64) -> f64 {
    exp(-x + a * ln(x) - ln_gamma(a))
}

fn series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if abs(del) < abs(sum) * EPS {
            break;
        }
    }
    sum * prefactor(a, x)
}

// modified Lentz
fn continued_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if abs(d) < TINY {
            d = TINY;
        }
        c = b + an / c;
        if abs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if abs(del - 1.0) < EPS {
            break;
        }
    }
    prefactor(a, x) * h
}

/// Inverse of `P(a, .)`: the `p` quantile of a unit-rate Gamma(a).
pub fn gamma_p_inverse(a: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let a1 = a - 1.0;
    let gln = ln_gamma(a);
    let (lna1, afac) = if a > 1.0 {
        let lna1 = ln(a1);
        (lna1, exp(a1 * (lna1 - 1.0) - gln))
    } else {
        (0.0, 0.0)
    };
    // starting guess
    let mut x = if a > 1.0 {
        let pp = if p < 0.5 { p } else { 1.0 - p };
        let t = sqrt(-2.0 * ln(pp));
        let mut z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
        if p < 0.5 {
            z = -z;
        }
        let w = 1.0 - 1.0 / (9.0 * a) - z / (3.0 * sqrt(a));
        (a * w * w * w).max(1e-3)
    } else {
        let t = 1.0 - a * (0.253 + a * 0.12);
        if p < t {
            powf(p / t, 1.0 / a)
        } else {
            1.0 - ln(1.0 - (p - t) / (1.0 - t))
        }
    };
    // Halley iterations, guarded so x stays positive
    for _ in 0..100 {
        if x <= 0.0 {
            return 0.0;
        }
        let err = gamma_p(a, x) - p;
        let dens = if a > 1.0 {
            afac * exp(-(x - a1) + a1 * (ln(x) - lna1))
        } else {
            exp(-x + a1 * ln(x) - gln)
        };
        if dens == 0.0 {
            break;
        }
        let u = err / dens;
        let step = u / (1.0 - 0.5 * (u * (a1 / x - 1.0)).min(1.0));
        let prev = x;
        x -= step;
        if x <= 0.0 {
            x = 0.5 * prev;
        }
        if abs(x - prev) < 1e-15 * x {
            break;
        }
    }
    x
}

/// Gamma distribution with shape/rate parameterisation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    pub shape: f64,
    pub rate: f64,
}

impl Gamma {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(HawkesError::InvalidParameter {
                name: "gamma shape",
                value: shape,
            });
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(HawkesError::InvalidParameter {
                name: "gamma rate",
                value: rate,
            });
        }
        Ok(Gamma { shape, rate })
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    /// Mode, or zero when the shape is at most one.
    pub fn mode(&self) -> f64 {
        ((self.shape - 1.0) / self.rate).max(0.0)
    }

    /// `E[ln X]`.
    pub fn mean_ln(&self) -> f64 {
        digamma(self.shape) - ln(self.rate)
    }

    pub fn entropy(&self) -> f64 {
        self.shape - ln(self.rate) + ln_gamma(self.shape) + (1.0 - self.shape) * digamma(self.shape)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shape * ln(self.rate) - ln_gamma(self.shape) + (self.shape - 1.0) * ln(x)
            - self.rate * x
    }

    pub fn cdf(&self, x: f64) -> f64 {
        gamma_p(self.shape, self.rate * x)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        gamma_p_inverse(self.shape, p) / self.rate
    }

    /// `E[exp(-x X)] = (1 + x / rate)^(-shape)` for `x >= 0`.
    pub fn laplace(&self, x: f64) -> f64 {
        exp(-self.shape * crate::math::ln1p(x / self.rate))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // shape and rate were validated on construction
        rand_distr::Gamma::new(self.shape, 1.0 / self.rate)
            .expect("validated gamma parameters")
            .sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Gamma as Oracle};

    #[test]
    fn digamma_reference_values() {
        let euler = 0.577_215_664_901_532_9;
        assert!((digamma(1.0) + euler).abs() < 1e-14);
        assert!((digamma(0.5) + euler + 2.0 * 2f64.ln()).abs() < 1e-13);
        // psi(n + 1) = psi(n) + 1/n
        assert!((digamma(4.0) - (1.0 + 0.5 + 1.0 / 3.0 - euler)).abs() < 1e-14);
    }

    #[test]
    fn incomplete_gamma_edges() {
        assert_eq!(gamma_p(2.0, 0.0), 0.0);
        // shape 1 is the exponential law
        for &x in &[0.1, 1.0, 5.0, 30.0] {
            assert!((gamma_p(1.0, x) - (1.0 - (-x as f64).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn entropy_of_exponential() {
        // Exp(rate) entropy = 1 - ln(rate)
        let g = Gamma::new(1.0, 3.0).unwrap();
        assert!((g.entropy() - (1.0 - 3f64.ln())).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn digamma_matches_statrs(x in 1e-3f64..500.0) {
            let ours = digamma(x);
            let theirs = statrs::function::gamma::digamma(x);
            prop_assert!((ours - theirs).abs() <= 1e-11 * (1.0 + theirs.abs()));
        }

        #[test]
        fn digamma_recurrence(x in 0.01f64..50.0) {
            prop_assert!((digamma(x + 1.0) - digamma(x) - 1.0 / x).abs() < 1e-10 * (1.0 + 1.0 / x));
        }

        #[test]
        fn cdf_matches_statrs(shape in 0.05f64..2000.0, rate in 0.01f64..100.0, q in 0.0f64..1.0) {
            let oracle = Oracle::new(shape, rate).unwrap();
            let x = oracle.inverse_cdf(q.clamp(1e-6, 1.0 - 1e-6));
            let ours = Gamma::new(shape, rate).unwrap().cdf(x);
            prop_assert!((ours - oracle.cdf(x)).abs() < 1e-10);
        }

        #[test]
        fn quantile_inverts_cdf(shape in 0.05f64..5000.0, rate in 0.01f64..100.0, p in 1e-6f64..(1.0 - 1e-6)) {
            let g = Gamma::new(shape, rate).unwrap();
            let x = g.quantile(p);
            prop_assert!((g.cdf(x) - p).abs() < 1e-9 * p, "cdf(q(p)) = {} vs {}", g.cdf(x), p);
            // the oracle's own inverse is unreliable in the far tails, its cdf is not
            let oracle = Oracle::new(shape, rate).unwrap();
            if x > 1e-250 {
                prop_assert!((oracle.cdf(x) - p).abs() <= 1e-8 * p, "{} vs {}", oracle.cdf(x), p);
            }
        }
    }
}
