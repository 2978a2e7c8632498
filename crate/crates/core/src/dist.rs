//! Univariate distributions used by the conditional samplers.

use std::f64::consts::SQRT_2;

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};

/// `P(Z <= x)` for a standard normal `Z`.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `P(Z > x)` for a standard normal `Z`.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

pub fn std_normal_inv_cdf(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

fn std_normal_inv_sf(p: f64) -> f64 {
    SQRT_2 * erfc_inv(2.0 * p)
}

/// `N(mean, var)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub var: f64,
}

impl Gaussian {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.mean + self.var.sqrt() * z
    }

    pub fn cdf(&self, x: f64) -> f64 {
        std_normal_cdf((x - self.mean) / self.var.sqrt())
    }

    /// Restricts this distribution to `[lo, hi]`.
    pub fn truncate(self, lo: f64, hi: f64) -> TruncatedGaussian {
        TruncatedGaussian {
            mean: self.mean,
            var: self.var,
            lo,
            hi,
        }
    }
}

/// `N(mean, var)` conditioned on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedGaussian {
    pub mean: f64,
    pub var: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncatedGaussian {
    /// Inverse-CDF sampling on whichever side of the mean keeps the
    /// interval probability representable; falls back to rejection
    /// sampling when the interval lies too far in a tail.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let sd = self.var.sqrt();
        let a = (self.lo - self.mean) / sd;
        let b = (self.hi - self.mean) / sd;
        let z = if a >= 0.0 {
            upper_tail(a, b, rng)
        } else if b <= 0.0 {
            -upper_tail(-b, -a, rng)
        } else {
            let (pa, pb) = (std_normal_cdf(a), std_normal_cdf(b));
            let u: f64 = rng.random();
            std_normal_inv_cdf(pa + u * (pb - pa))
        };
        (self.mean + sd * z.clamp(a, b)).clamp(self.lo, self.hi)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        let sd = self.var.sqrt();
        let a = (self.lo - self.mean) / sd;
        let b = (self.hi - self.mean) / sd;
        let z = (x - self.mean) / sd;
        if a >= 0.0 {
            let (sa, sb) = (std_normal_sf(a), std_normal_sf(b));
            (sa - std_normal_sf(z)) / (sa - sb)
        } else {
            let (pa, pb) = (std_normal_cdf(a), std_normal_cdf(b));
            (std_normal_cdf(z) - pa) / (pb - pa)
        }
    }
}

/// Standard normal restricted to `[a, b]` with `0 <= a < b`.
fn upper_tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let (sa, sb) = (std_normal_sf(a), std_normal_sf(b));
    if sa > 0.0 && (sa - sb) > 1e-300 && (sa - sb) / sa > 1e-12 {
        let u: f64 = rng.random();
        return std_normal_inv_sf(sa - u * (sa - sb));
    }
    tail_rejection(a, b, rng)
}

/// Rejection sampler for a standard normal on `[a, b]`, `a` far in the
/// upper tail: uniform proposals on short intervals, translated
/// exponential proposals otherwise.
fn tail_rejection<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b - a < 1.0 / a.max(1.0) {
        loop {
            let z = a + (b - a) * rng.random::<f64>();
            if rng.random::<f64>().ln() <= 0.5 * (a * a - z * z) {
                return z;
            }
        }
    }
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    let exp = Exp::new(rate).expect("positive rate");
    loop {
        let z = a + exp.sample(rng);
        if z <= b && rng.random::<f64>().ln() <= -0.5 * (z - rate) * (z - rate) {
            return z;
        }
    }
}

/// Inverse gamma with density proportional to `x^{-shape-1} exp(-scale / x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseGamma {
    pub shape: f64,
    pub scale: f64,
}

impl InverseGamma {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // 1 / X with X ~ Gamma(shape, rate = scale)
        let g = Gamma::new(self.shape, 1.0 / self.scale).expect("positive shape and scale");
        1.0 / g.sample(rng)
    }

    /// `scale / (shape - 1)` for `shape > 1`.
    pub fn mean(&self) -> f64 {
        if self.shape > 1.0 {
            self.scale / (self.shape - 1.0)
        } else {
            f64::INFINITY
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            statrs::function::gamma::gamma_ur(self.shape, self.scale / x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn normal_quantiles() {
        assert!((std_normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-11);
        assert!((std_normal_inv_cdf(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((std_normal_sf(8.0) / 6.220_960_574_271_74e-16 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn truncated_draws_stay_inside_and_match_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (mean, var) in [(0.0, 1.0), (0.99, 1e-4), (1.3, 0.01), (-5.0, 0.5), (30.0, 1.0)] {
            let tg = Gaussian { mean, var }.truncate(-1.0, 1.0);
            let xs: Vec<f64> = (0..20_000).map(|_| tg.sample(&mut rng)).collect();
            assert!(xs.iter().all(|x| (-1.0..=1.0).contains(x)));
            if mean.abs() < 10.0 {
                let d = ks(xs, |x| tg.cdf(x));
                assert!(d < 0.015, "mean {mean} var {var}: KS {d}");
            }
        }
    }

    #[test]
    fn far_tail_uses_rejection() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tg = Gaussian {
            mean: 0.0,
            var: 1e-4,
        }
        .truncate(0.5, 1.0);
        let xs: Vec<f64> = (0..2000).map(|_| tg.sample(&mut rng)).collect();
        assert!(xs.iter().all(|x| (0.5..=1.0).contains(x)));
        // Mass concentrates within a few sd/a of the lower bound
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(mean - 0.5 < 1e-3, "{mean}");
    }

    #[test]
    fn inverse_gamma_mean_and_cdf() {
        let ig = InverseGamma {
            shape: 52.01,
            scale: 0.01,
        };
        assert!((ig.mean() - 0.01 / 51.01).abs() < 1e-18);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..20_000).map(|_| ig.sample(&mut rng)).collect();
        assert!(ks(xs, |x| ig.cdf(x)) < 0.015);
    }
}
