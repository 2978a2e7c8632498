//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use stochmort::model::{ModelKind, StatePath, StaticParams, SystemMatrices};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Exact joint moments of `(phi_0..phi_n, y_1..y_n)` stacked time-major:
/// `phi_t` occupies `t*d .. (t+1)*d` and `y_t` occupies `(t-1)*p .. t*p`.
pub struct JointGaussian {
    pub d: usize,
    pub p: usize,
    pub n: usize,
    pub mean_phi: DVector<f64>,
    pub mean_y: DVector<f64>,
    pub cov_phi: DMatrix<f64>,
    pub cov_phi_y: DMatrix<f64>,
    pub cov_y: DMatrix<f64>,
}

impl JointGaussian {
    pub fn new(sys: &SystemMatrices, m0: &DVector<f64>, c0: &DMatrix<f64>, n: usize) -> Self {
        let d = sys.trans_matrix.nrows();
        let p = sys.obs_matrix.nrows();
        let lam = &sys.trans_matrix;

        let mut mean_phi = DVector::zeros(d * (n + 1));
        let mut marg = Vec::with_capacity(n + 1);
        let mut mu = m0.clone();
        let mut pc = c0.clone();
        for t in 0..=n {
            if t > 0 {
                mu = lam * &mu + &sys.trans_intercept;
                pc = lam * &pc * lam.transpose() + &sys.trans_noise_cov;
            }
            mean_phi.rows_mut(t * d, d).copy_from(&mu);
            marg.push(pc.clone());
        }

        let mut cov_phi = DMatrix::zeros(d * (n + 1), d * (n + 1));
        for (s, m) in marg.iter().enumerate() {
            let mut block = m.clone();
            for t in s..=n {
                if t > s {
                    block = &block * lam.transpose();
                }
                cov_phi.view_mut((s * d, t * d), (d, d)).copy_from(&block);
                cov_phi.view_mut((t * d, s * d), (d, d)).copy_from(&block.transpose());
            }
        }

        let b = &sys.obs_matrix;
        let mut mean_y = DVector::zeros(p * n);
        let mut cov_phi_y = DMatrix::zeros(d * (n + 1), p * n);
        let mut cov_y = DMatrix::zeros(p * n, p * n);
        for t in 1..=n {
            let m = &sys.obs_intercept + b * mean_phi.rows((t) * d, d);
            mean_y.rows_mut((t - 1) * p, p).copy_from(&m);
            for s in 0..=n {
                let c = cov_phi.view((s * d, t * d), (d, d)) * b.transpose();
                cov_phi_y.view_mut((s * d, (t - 1) * p), (d, p)).copy_from(&c);
            }
            for s in 1..=n {
                let mut c = b * cov_phi.view((s * d, t * d), (d, d)) * b.transpose();
                if s == t {
                    c += DMatrix::identity(p, p) * sys.obs_noise_var;
                }
                cov_y.view_mut(((s - 1) * p, (t - 1) * p), (p, p)).copy_from(&c);
            }
        }
        JointGaussian {
            d,
            p,
            n,
            mean_phi,
            mean_y,
            cov_phi,
            cov_phi_y,
            cov_y,
        }
    }

    /// `ln N(vec(y); mean_y, cov_y)` for a `p x n` observation matrix.
    pub fn log_density(&self, obs: &DMatrix<f64>) -> f64 {
        let y = DVector::from_column_slice(obs.as_slice());
        let r = y - &self.mean_y;
        let chol = self.cov_y.clone().cholesky().expect("joint covariance is positive definite");
        let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let z = chol.solve(&r);
        -0.5 * ((self.p * self.n) as f64 * LN_2PI + logdet + r.dot(&z))
    }

    /// Mean and covariance of the stacked states given all observations.
    pub fn smoother(&self, obs: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let y = DVector::from_column_slice(obs.as_slice());
        let chol = self.cov_y.clone().cholesky().expect("joint covariance is positive definite");
        let gain = chol.solve(&self.cov_phi_y.transpose()).transpose();
        let mean = &self.mean_phi + &gain * (y - &self.mean_y);
        let cov = &self.cov_phi - &gain * self.cov_phi_y.transpose();
        (mean, cov)
    }

    /// `E[y_t | y_{1:t-1}]` for every `t`, as a `p x n` matrix.
    pub fn predictive_means(&self, obs: &DMatrix<f64>) -> DMatrix<f64> {
        let (p, n) = (self.p, self.n);
        let y = DVector::from_column_slice(obs.as_slice());
        let mut out = DMatrix::zeros(p, n);
        for t in 1..=n {
            let mu_t = self.mean_y.rows((t - 1) * p, p).into_owned();
            let k = (t - 1) * p;
            let f = if k == 0 {
                mu_t
            } else {
                let s11 = self.cov_y.view((0, 0), (k, k)).into_owned();
                let s21 = self.cov_y.view((k, 0), (p, k)).into_owned();
                let r = y.rows(0, k) - self.mean_y.rows(0, k);
                let chol = s11.cholesky().expect("positive definite");
                mu_t + s21 * chol.solve(&r)
            };
            out.set_column(t - 1, &f);
        }
        out
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn random_spd<R: Rng + ?Sized>(rng: &mut R, d: usize, scale: f64, floor: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| normal(rng) * scale);
    &a * a.transpose() + DMatrix::identity(d, d) * floor
}

/// Dense random system with full-rank state noise.
pub fn random_system<R: Rng + ?Sized>(rng: &mut R, d: usize, p: usize) -> SystemMatrices {
    SystemMatrices {
        obs_intercept: DVector::from_fn(p, |_, _| normal(rng)),
        obs_matrix: DMatrix::from_fn(p, d, |_, _| normal(rng)),
        obs_noise_var: rng.random_range(0.1..1.0),
        trans_matrix: DMatrix::from_fn(d, d, |_, _| 0.5 * normal(rng)),
        trans_intercept: DVector::from_fn(d, |_, _| 0.3 * normal(rng)),
        trans_noise_cov: random_spd(rng, d, 0.4, 0.05),
    }
}

pub fn random_prior<R: Rng + ?Sized>(rng: &mut R, d: usize) -> (DVector<f64>, DMatrix<f64>) {
    (DVector::from_fn(d, |_, _| normal(rng)), random_spd(rng, d, 0.6, 0.2))
}

/// Draws `y_1..y_n` from the system started at `phi_0 ~ N(m0, c0)`.
pub fn simulate_obs<R: Rng + ?Sized>(
    rng: &mut R,
    sys: &SystemMatrices,
    m0: &DVector<f64>,
    c0: &DMatrix<f64>,
    n: usize,
) -> DMatrix<f64> {
    let d = m0.len();
    let sqrt = |c: &DMatrix<f64>| {
        c.clone()
            .cholesky()
            .map(|ch| ch.l())
            .unwrap_or_else(|| DMatrix::from_diagonal(&c.diagonal().map(|v| v.max(0.0).sqrt())))
    };
    let mut phi = m0 + sqrt(c0) * DVector::from_fn(d, |_, _| normal(rng));
    let lw = sqrt(&sys.trans_noise_cov);
    let p = sys.obs_matrix.nrows();
    DMatrix::from_columns(
        &(0..n)
            .map(|_| {
                phi = &sys.trans_matrix * &phi + &sys.trans_intercept + &lw * DVector::from_fn(d, |_, _| normal(rng));
                &sys.obs_intercept
                    + &sys.obs_matrix * &phi
                    + DVector::from_fn(p, |_, _| sys.obs_noise_var.sqrt() * normal(rng))
            })
            .collect::<Vec<_>>(),
    )
}

/// Cell-by-cell observation log-likelihood.
pub fn literal_obs_loglik(y: &DMatrix<f64>, params: &StaticParams, path: &StatePath, kind: ModelKind) -> f64 {
    let mut total = 0.0;
    for i in 0..y.nrows() {
        let bg = match kind {
            ModelKind::LeeCarter => 0.0,
            ModelKind::SimplifiedCohort => 1.0,
            ModelKind::FullCohort => params.beta_gamma.as_ref().unwrap()[i],
        };
        for t in 1..=y.ncols() {
            let g = if kind.has_cohort() { path.cohort_at(i, t) } else { 0.0 };
            let mu = params.alpha[i] + params.beta[i] * path.kappa(t) + bg * g;
            total += normal_logpdf(y[(i, t - 1)], mu, params.sigma2_eps);
        }
    }
    total
}

/// Transition log-density of the period factor and the youngest cohort
/// coordinate over `t = 1..n`.
pub fn literal_state_loglik(params: &StaticParams, path: &StatePath, kind: ModelKind) -> f64 {
    let n = path.n_steps();
    let mut total: f64 = (1..=n)
        .map(|t| normal_logpdf(path.kappa(t), path.kappa(t - 1) + params.theta, params.sigma2_kappa))
        .sum();
    if kind.has_cohort() {
        let (eta, lambda, s2) = (params.eta.unwrap(), params.lambda.unwrap(), params.sigma2_gamma.unwrap());
        total += (1..=n)
            .map(|t| normal_logpdf(path.cohort_at(0, t), eta + lambda * path.cohort_at(0, t - 1), s2))
            .sum::<f64>();
    }
    total
}

pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + (x - mean) * (x - mean) / var)
}

pub fn inv_gamma_logpdf(x: f64, shape: f64, scale: f64) -> f64 {
    -(shape + 1.0) * x.ln() - scale / x
}

/// CDF of the density proportional to `exp(logpdf)` on `[lo, hi]`, built
/// by trapezoidal integration on `m` points and linear interpolation.
pub fn grid_cdf(logpdf: impl Fn(f64) -> f64, lo: f64, hi: f64, m: usize) -> impl Fn(f64) -> f64 {
    let h = (hi - lo) / (m - 1) as f64;
    let xs: Vec<f64> = (0..m).map(|k| lo + k as f64 * h).collect();
    let lp: Vec<f64> = xs.iter().map(|&x| logpdf(x)).collect();
    let top = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<f64> = lp.iter().map(|v| (v - top).exp()).collect();
    let mut cum = vec![0.0; m];
    for k in 1..m {
        cum[k] = cum[k - 1] + 0.5 * h * (dens[k] + dens[k - 1]);
    }
    let total = cum[m - 1];
    cum.iter_mut().for_each(|c| *c /= total);
    move |x: f64| {
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let pos = (x - lo) / h;
        let k = (pos.floor() as usize).min(m - 2);
        let w = pos - k as f64;
        cum[k] + w * (cum[k + 1] - cum[k])
    }
}

/// Two-sided Kolmogorov-Smirnov distance of a sample to a CDF.
pub fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

pub fn sample_mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}
