//! Deterministic seeded random generation for the simulator, plus the
//! chi-squared quantiles used by the test.
//!
//! Streams are backed by ChaCha8 with an explicit 64-bit stream id, so
//! replication `r` of a run always sees the same draws no matter how work is
//! scheduled across threads. Samplers are implemented directly on top of the
//! raw 64-bit output: Box-Muller for normals, Marsaglia-Tsang for Gamma,
//! the Michael-Schucany-Haas transform for inverse Gaussian, and
//! exponential-spacing counting for Poisson.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One reproducible stream of randomness, owned by exactly one worker.
///
/// Identical `(seed, stream_id)` pairs yield bit-identical sample sequences;
/// distinct stream ids give statistically independent streams.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            rng,
            seed,
            stream_id,
        }
    }

    /// Uniform draw on `[0, 1)` with 53 random bits.
    pub fn uniform01(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw on `(0, 1]`; safe to feed into `ln`.
    fn uniform_pos(&mut self) -> f64 {
        1.0 - self.uniform01()
    }

    /// Standard normal draw (Box-Muller, cosine branch).
    pub fn sample_normal(&mut self) -> f64 {
        let u1 = self.uniform_pos();
        let u2 = self.uniform01();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Gamma draw with the shape-rate convention: mean `shape/rate`.
    ///
    /// Marsaglia-Tsang squeeze for `shape >= 1`, boosted through
    /// `Gamma(shape + 1)` for `shape < 1`.
    pub fn sample_gamma(&mut self, shape: f64, rate: f64) -> f64 {
        debug_assert!(shape > 0.0 && rate > 0.0);
        if shape < 1.0 {
            let g = self.sample_gamma(shape + 1.0, rate);
            let u = self.uniform_pos();
            return g * u.powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let z = self.sample_normal();
            let t = 1.0 + c * z;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u = self.uniform_pos();
            let z2 = z * z;
            if u < 1.0 - 0.0331 * z2 * z2 {
                return d * v / rate;
            }
            if u.ln() < 0.5 * z2 + d * (1.0 - v + v.ln()) {
                return d * v / rate;
            }
        }
    }

    /// Inverse Gaussian draw under the `(delta, gamma)` parametrization with
    /// mean `delta/gamma` and variance `delta/gamma^3`
    /// (Michael-Schucany-Haas transform: one normal plus one uniform).
    pub fn sample_inverse_gaussian(&mut self, delta: f64, gamma: f64) -> f64 {
        debug_assert!(delta > 0.0 && gamma > 0.0);
        let mu = delta / gamma;
        let lambda = delta * delta;
        let z = self.sample_normal();
        let y = mu * z * z;
        let mu_2l = mu / (2.0 * lambda);
        let x = mu + mu_2l * (y - (4.0 * lambda * y + y * y).sqrt());
        let u = self.uniform01();
        if u <= mu / (mu + x) {
            x
        } else {
            mu * mu / x
        }
    }

    /// Difference of two independent inverse Gaussian draws,
    /// `IG(d1, g1) - IG(d2, g2)`.
    pub fn sample_bilateral_ig(&mut self, d1: f64, g1: f64, d2: f64, g2: f64) -> f64 {
        self.sample_inverse_gaussian(d1, g1) - self.sample_inverse_gaussian(d2, g2)
    }

    /// Poisson count with the given mean, by counting unit-rate exponential
    /// arrivals; exact and free of underflow for any finite mean.
    pub fn sample_poisson_count(&mut self, mean: f64) -> u64 {
        debug_assert!(mean.is_finite() && mean >= 0.0);
        if mean <= 0.0 {
            return 0;
        }
        let mut acc = 0.0;
        let mut count = 0u64;
        loop {
            acc += -self.uniform_pos().ln();
            if acc > mean {
                return count;
            }
            count += 1;
        }
    }
}

/// Upper `q`-percentile of the chi-squared distribution with 2 degrees of
/// freedom: the closed form `-2 ln q`.
pub fn chisq2_upper_quantile(q: f64) -> Result<f64> {
    if q.is_nan() || q <= 0.0 || q >= 1.0 {
        return Err(Error::invalid("q", "significance level must lie in (0, 1)"));
    }
    Ok(-2.0 * q.ln())
}

/// Upper `q`-percentile of the chi-squared distribution with 1 degree of
/// freedom, by bisection on the survival function.
pub fn chisq1_upper_quantile(q: f64) -> Result<f64> {
    if q.is_nan() || q <= 0.0 || q >= 1.0 {
        return Err(Error::invalid("q", "significance level must lie in (0, 1)"));
    }
    // Survival of chi^2(1) at x is Q(1/2, x/2), strictly decreasing in x.
    let surv = |x: f64| reg_gamma_upper(0.5, 0.5 * x);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while surv(hi) > q {
        hi *= 2.0;
        if hi > 1e8 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if surv(mid) > q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Regularized upper incomplete gamma Q(a, x), series/continued-fraction
/// split at `x = a + 1`.
pub(crate) fn reg_gamma_upper(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - lower_series(a, x)
    } else {
        upper_cf(a, x)
    }
}

fn ln_gamma(a: f64) -> f64 {
    // Lanczos (g = 7, n = 9), sufficient for the small positive arguments
    // used here; exact table value for the a = 1/2 fast path.
    if a == 0.5 {
        return 0.5723649429247001;
    }
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if a < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * a).sin()).ln() - ln_gamma(1.0 - a);
    }
    let a = a - 1.0;
    let mut sum = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        sum += c / (a + i as f64);
    }
    let t = a + 7.5;
    0.5 * (std::f64::consts::TAU).ln() + (a + 0.5) * t.ln() - t + sum.ln()
}

fn lower_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..500 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (a * x.ln() - x - ln_gamma(a)).exp()
}

fn upper_cf(a: f64, x: f64) -> f64 {
    // Modified Lentz continued fraction for Q(a, x).
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (a * x.ln() - x - ln_gamma(a)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn moments(draws: impl Iterator<Item = f64>) -> (f64, f64, usize) {
        let mut n = 0usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for d in draws {
            n += 1;
            sum += d;
            sumsq += d * d;
        }
        let mean = sum / n as f64;
        (mean, sumsq / n as f64 - mean * mean, n)
    }

    const N: usize = 1_000_000;

    #[test]
    fn normal_moments() {
        let mut rng = RngStream::new(11, 0);
        let (mean, var, _) = moments((0..N).map(|_| rng.sample_normal()));
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn gamma_moments() {
        let mut rng = RngStream::new(12, 0);
        let (mean, var, _) = moments((0..N).map(|_| rng.sample_gamma(4.0, 1.0)));
        assert!((mean - 4.0).abs() < 0.02, "mean {mean}");
        assert!((var - 4.0).abs() < 0.05, "var {var}");

        let mut rng = RngStream::new(13, 0);
        let (mean, _, _) = moments((0..N).map(|_| rng.sample_gamma(1.0, 2.0)));
        assert!((mean - 0.5).abs() < 0.005, "exp mean {mean}");

        // shape < 1 boost path
        let mut rng = RngStream::new(14, 0);
        let (mean, _, _) = moments((0..N).map(|_| rng.sample_gamma(0.5, 1.0)));
        assert!((mean - 0.5).abs() < 0.01, "shape<1 mean {mean}");
    }

    #[test]
    fn inverse_gaussian_moments() {
        let mut rng = RngStream::new(15, 0);
        let (mean, var, _) = moments((0..N).map(|_| rng.sample_inverse_gaussian(2.0, 1.0)));
        assert!((mean - 2.0).abs() < 0.02, "mean {mean}");
        assert!((var - 2.0).abs() < 0.05, "var {var}");

        let mut rng = RngStream::new(16, 0);
        let (mean, _, _) = moments((0..N).map(|_| rng.sample_inverse_gaussian(4.0, 1.0)));
        assert!((mean - 4.0).abs() < 0.03, "mean {mean}");
    }

    #[test]
    fn bilateral_ig_moments() {
        let mut rng = RngStream::new(17, 0);
        let (mean, var, _) = moments((0..N).map(|_| rng.sample_bilateral_ig(2.0, 1.0, 4.0, 1.0)));
        assert!((mean + 2.0).abs() < 0.03, "mean {mean}");
        assert!((var - 6.0).abs() < 0.1, "var {var}");

        let mut rng = RngStream::new(18, 0);
        let (mean, _, _) = moments((0..N).map(|_| rng.sample_bilateral_ig(3.0, 2.0, 3.0, 2.0)));
        assert!(mean.abs() < 0.01, "symmetric mean {mean}");
    }

    #[test]
    fn poisson_moments() {
        let mut rng = RngStream::new(19, 0);
        assert!((0..1000).all(|_| rng.sample_poisson_count(0.0) == 0));
        let (mean, var, _) = moments((0..N).map(|_| rng.sample_poisson_count(3.0) as f64));
        assert!((mean - 3.0).abs() < 0.01, "mean {mean}");
        assert!((var - 3.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = {
            let mut r = RngStream::new(42, 7);
            (0..64).map(|_| r.uniform01()).collect()
        };
        let b: Vec<f64> = {
            let mut r = RngStream::new(42, 7);
            (0..64).map(|_| r.uniform01()).collect()
        };
        assert_eq!(a, b);
        let c: Vec<f64> = {
            let mut r = RngStream::new(42, 8);
            (0..64).map(|_| r.uniform01()).collect()
        };
        assert_ne!(a, c);
    }

    #[test]
    fn chisq2_quantile_values() {
        assert_relative_eq!(
            chisq2_upper_quantile(0.05).unwrap(),
            5.991464547107982,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            chisq2_upper_quantile(1e-3).unwrap(),
            13.815510557964274,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            chisq2_upper_quantile((-1.0f64).exp()).unwrap(),
            2.0,
            max_relative = 1e-14
        );
        assert!(chisq2_upper_quantile(0.0).is_err());
        assert!(chisq2_upper_quantile(1.0).is_err());
    }

    #[test]
    fn chisq2_quantile_inverts_survival() {
        for q in [0.9, 0.5, 0.1, 0.05, 1e-3, 1e-6] {
            let x = chisq2_upper_quantile(q).unwrap();
            assert_relative_eq!((-x / 2.0).exp(), q, max_relative = 1e-12);
        }
    }

    #[test]
    fn chisq1_quantile_known_values() {
        // Reference values from the standard normal relation
        // chi^2_q(1) = (Phi^{-1}(1 - q/2))^2.
        assert_relative_eq!(
            chisq1_upper_quantile(0.05).unwrap(),
            3.8414588206941227,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            chisq1_upper_quantile(0.5).unwrap(),
            0.45493642311957305,
            max_relative = 1e-9
        );
        for q in [0.3, 0.05, 1e-3] {
            let x = chisq1_upper_quantile(q).unwrap();
            assert_relative_eq!(reg_gamma_upper(0.5, 0.5 * x), q, max_relative = 1e-9);
        }
    }

    // CDF oracle by Simpson quadrature of the density; independent of the
    // samplers under test.
    fn quad_cdf(density: impl Fn(f64) -> f64, lo: f64, grid: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        let mut prev = lo;
        for &g in grid {
            let steps = 64;
            let w = (g - prev) / steps as f64;
            if w > 0.0 {
                for s in 0..steps {
                    let a = prev + s as f64 * w;
                    acc += w / 6.0 * (density(a) + 4.0 * density(a + 0.5 * w) + density(a + w));
                }
            }
            prev = g;
            out.push(acc.min(1.0));
        }
        out
    }

    fn ks_distance(sorted: &[f64], cdf_at_sorted: &[f64]) -> f64 {
        let n = sorted.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &f) in cdf_at_sorted.iter().enumerate() {
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            d = d.max((f - lo).abs()).max((hi - f).abs());
        }
        d
    }

    #[test]
    fn gamma_ks_against_quadrature_cdf() {
        let shape = 4.0;
        let density = |x: f64| {
            if x <= 0.0 {
                0.0
            } else {
                (x.powf(shape - 1.0) * (-x).exp()) / 6.0 // Gamma(4) = 6
            }
        };
        let mut rng = RngStream::new(101, 0);
        let mut draws: Vec<f64> = (0..100_000).map(|_| rng.sample_gamma(shape, 1.0)).collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cdf = quad_cdf(density, 0.0, &draws);
        let d = ks_distance(&draws, &cdf);
        assert!(d < 0.01, "KS distance {d}");
    }

    #[test]
    fn inverse_gaussian_ks_against_quadrature_cdf() {
        let (delta, gamma) = (2.0f64, 1.0f64);
        let norm = delta * (delta * gamma).exp() / (std::f64::consts::TAU).sqrt();
        let density = move |x: f64| {
            if x <= 0.0 {
                0.0
            } else {
                norm * x.powf(-1.5) * (-(delta * delta / x + gamma * gamma * x) / 2.0).exp()
            }
        };
        let mut rng = RngStream::new(102, 0);
        let mut draws: Vec<f64> = (0..100_000)
            .map(|_| rng.sample_inverse_gaussian(delta, gamma))
            .collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cdf = quad_cdf(density, 0.0, &draws);
        let d = ks_distance(&draws, &cdf);
        assert!(d < 0.01, "KS distance {d}");
    }
}
