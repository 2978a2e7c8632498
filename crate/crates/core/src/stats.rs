//! Small summary-statistics helpers with deterministic reduction order.

/// Pairwise (cascade) summation; the result depends only on the order of
/// `xs`, not on how the caller produced it.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (xs.len() - 1) as f64
}

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7, the R default). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Type 7 quantile of an unsorted sample.
pub fn quantile(xs: &[f64], prob: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, prob)
}

/// Mean together with the equal-tailed interval at `level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn from_sample(xs: &[f64], level: f64) -> Self {
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        let tail = 0.5 * (1.0 - level);
        Interval {
            mean: mean(xs),
            lower: quantile_sorted(&v, tail),
            upper: quantile_sorted(&v, 1.0 - tail),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_matches_r() {
        // quantile(1:10, c(.025, .5, .975)) in R
        let xs: Vec<f64> = (1..=10).rev().map(f64::from).collect();
        assert!((quantile(&xs, 0.025) - 1.225).abs() < 1e-12);
        assert!((quantile(&xs, 0.5) - 5.5).abs() < 1e-12);
        assert!((quantile(&xs, 0.975) - 9.775).abs() < 1e-12);
        assert_eq!(quantile(&[3.0], 0.9), 3.0);
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let xs = vec![0.1; 100_000];
        assert!((pairwise_sum(&xs) - 10_000.0).abs() < 1e-9);
        assert_eq!(variance(&[2.0, 4.0, 6.0]), 4.0);
    }

    #[test]
    fn interval_brackets_mean() {
        let xs: Vec<f64> = (0..1001).map(|i| i as f64 / 1000.0).collect();
        let iv = Interval::from_sample(&xs, 0.95);
        assert!((iv.lower - 0.025).abs() < 1e-12 && (iv.upper - 0.975).abs() < 1e-12);
        assert!(iv.contains(iv.mean));
    }
}
