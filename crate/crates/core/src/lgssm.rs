//! Linear-Gaussian state-space engine: Kalman filter, predictive
//! log-likelihood and forward-filtering-backward-sampling (FFBS).

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{sample_mvn, solve_psd, symmetrize};
use crate::model::{StatePath, SystemMatrices};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Moments produced by one filter step at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    /// Filtered mean `m_t`.
    pub m: DVector<f64>,
    /// Filtered covariance `C_t`.
    pub c: DMatrix<f64>,
    /// One-step state prediction `a_t`.
    pub a: DVector<f64>,
    /// One-step state prediction covariance `R_t`.
    pub r: DMatrix<f64>,
    /// Observation prediction `f_t`.
    pub f: DVector<f64>,
    /// Observation prediction covariance `Q_t`.
    pub q: DMatrix<f64>,
    /// `ln N(y_t; f_t, Q_t)`.
    pub log_predictive: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub initial_mean: DVector<f64>,
    pub initial_cov: DMatrix<f64>,
    /// One entry per observation time `t = 1..n`.
    pub steps: Vec<FilterState>,
    pub log_likelihood: f64,
}

impl FilterOutput {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Filtered moments at time `t` in `0..=n`; `t = 0` is the prior.
    pub fn filtered(&self, t: usize) -> (&DVector<f64>, &DMatrix<f64>) {
        if t == 0 {
            (&self.initial_mean, &self.initial_cov)
        } else {
            (&self.steps[t - 1].m, &self.steps[t - 1].c)
        }
    }

    /// In-sample one-step-ahead residuals `y_t - f_t` as a `p x n` matrix.
    pub fn residuals(&self, observations: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = observations.clone();
        for (j, step) in self.steps.iter().enumerate() {
            let mut col = out.column_mut(j);
            col -= &step.f;
        }
        out
    }
}

/// One prediction/update step of the Kalman filter.
pub fn kalman_step(
    m_prev: &DVector<f64>,
    c_prev: &DMatrix<f64>,
    sys: &SystemMatrices,
    y: &DVector<f64>,
) -> Result<FilterState> {
    let lam = &sys.trans_matrix;
    let b = &sys.obs_matrix;
    if y.len() != sys.obs_dim() || m_prev.len() != sys.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "observation has {} entries and state {} but the system is {}x{}",
            y.len(),
            m_prev.len(),
            sys.obs_dim(),
            sys.state_dim()
        )));
    }

    let a = lam * m_prev + &sys.trans_intercept;
    let mut r = lam * c_prev * lam.transpose() + &sys.trans_noise_cov;
    symmetrize(&mut r);

    let f = &sys.obs_intercept + b * &a;
    let s = &r * b.transpose();
    let mut q = b * &s;
    for i in 0..q.nrows() {
        q[(i, i)] += sys.obs_noise_var;
    }
    symmetrize(&mut q);

    let chol = q.clone().cholesky().ok_or_else(|| {
        Error::IllConditioned("observation predictive covariance is not positive definite".into())
    })?;
    let e = y - &f;
    let q_inv_e = chol.solve(&e);
    let m = &a + &s * &q_inv_e;
    let q_inv_st = chol.solve(&s.transpose());
    let mut c = &r - &s * q_inv_st;
    symmetrize(&mut c);

    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let log_predictive = -0.5 * (y.len() as f64 * LN_2PI + log_det + e.dot(&q_inv_e));
    if !log_predictive.is_finite() {
        return Err(Error::IllConditioned(
            "non-finite predictive log-density".into(),
        ));
    }

    Ok(FilterState {
        m,
        c,
        a,
        r,
        f,
        q,
        log_predictive,
    })
}

/// Runs the filter over the columns of `observations` (`p x n`), starting
/// from `phi_0 ~ N(m0, c0)`.
pub fn kalman_filter(
    observations: &DMatrix<f64>,
    sys: &SystemMatrices,
    m0: &DVector<f64>,
    c0: &DMatrix<f64>,
) -> Result<FilterOutput> {
    let mut steps = Vec::with_capacity(observations.ncols());
    let mut log_likelihood = 0.0;
    let (mut m, mut c) = (m0.clone(), c0.clone());
    for j in 0..observations.ncols() {
        let y = observations.column(j).into_owned();
        let step = kalman_step(&m, &c, sys, &y)?;
        log_likelihood += step.log_predictive;
        m.clone_from(&step.m);
        c.clone_from(&step.c);
        steps.push(step);
    }
    Ok(FilterOutput {
        initial_mean: m0.clone(),
        initial_cov: c0.clone(),
        steps,
        log_likelihood,
    })
}

/// State coordinates that the transition copies without noise: row `j` of
/// the transition matrix is the unit vector `e_k` and `Upsilon_jj = 0`, so
/// `phi_t[k] = phi_{t+1}[j] - Theta_j` exactly. Returns `(j, k)` pairs with
/// distinct `k`.
fn deterministic_links(sys: &SystemMatrices) -> Vec<(usize, usize)> {
    let d = sys.state_dim();
    let mut links: Vec<(usize, usize)> = Vec::new();
    for j in 0..d {
        if sys.trans_noise_cov[(j, j)] != 0.0 {
            continue;
        }
        let row = sys.trans_matrix.row(j);
        let nonzero: Vec<usize> = (0..d).filter(|&k| row[k] != 0.0).collect();
        if let [k] = nonzero[..] {
            if row[k] == 1.0 && !links.iter().any(|&(_, kk)| kk == k) {
                links.push((j, k));
            }
        }
    }
    links
}

/// Draws `phi_{0:n}` from its joint smoothing distribution.
///
/// `phi_n ~ N(m_n, C_n)`, then backwards `phi_t ~ N(h_t, H_t)` with
/// `h_t = m_t + C_t L^T R_{t+1}^{-1} (phi_{t+1} - a_{t+1})` and
/// `H_t = C_t - C_t L^T R_{t+1}^{-1} L C_t`. Coordinates that the transition
/// copies without noise are set from `phi_{t+1}` directly, so cohort paths
/// satisfy the shift identity bitwise; the remaining coordinates are drawn
/// from their marginal under `N(h_t, H_t)`.
pub fn ffbs_sample<R: Rng + ?Sized>(
    filter: &FilterOutput,
    sys: &SystemMatrices,
    rng: &mut R,
) -> Result<StatePath> {
    let n = filter.len();
    let d = sys.state_dim();
    let links = deterministic_links(sys);
    let free: Vec<usize> = (0..d)
        .filter(|k| !links.iter().any(|&(_, kk)| kk == *k))
        .collect();
    let regularize = zero_noise_coords(sys);

    let mut states = DMatrix::zeros(d, n + 1);
    let (m_n, c_n) = filter.filtered(n);
    states.set_column(n, &sample_mvn(m_n, c_n, rng));

    for t in (0..n).rev() {
        let next = states.column(t + 1).into_owned();
        let (h, big_h) = backward_step(filter, sys, t, &next, &regularize);

        let mut draw = DVector::zeros(d);
        if !free.is_empty() {
            let h_free = DVector::from_iterator(free.len(), free.iter().map(|&k| h[k]));
            let cov_free = big_h.select_rows(&free).select_columns(&free);
            let sample = sample_mvn(&h_free, &cov_free, rng);
            for (idx, &k) in free.iter().enumerate() {
                draw[k] = sample[idx];
            }
        }
        for &(j, k) in &links {
            draw[k] = next[j] - sys.trans_intercept[j];
        }
        if draw.iter().any(|v| !v.is_finite()) {
            return Err(Error::IllConditioned(format!(
                "non-finite backward draw at t = {t}"
            )));
        }
        states.set_column(t, &draw);
    }
    Ok(StatePath::new(states))
}

/// Backward-pass moments `(h_t, H_t)` given `phi_{t+1}`.
pub fn backward_moments(
    filter: &FilterOutput,
    sys: &SystemMatrices,
    t: usize,
    next: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    backward_step(filter, sys, t, next, &zero_noise_coords(sys))
}

fn zero_noise_coords(sys: &SystemMatrices) -> Vec<usize> {
    (0..sys.state_dim())
        .filter(|&j| sys.trans_noise_cov[(j, j)] == 0.0)
        .collect()
}

fn backward_step(
    filter: &FilterOutput,
    sys: &SystemMatrices,
    t: usize,
    next: &DVector<f64>,
    regularize: &[usize],
) -> (DVector<f64>, DMatrix<f64>) {
    let (m, c) = filter.filtered(t);
    let next_pred = &filter.steps[t];
    let lam_c = &sys.trans_matrix * c;
    // R_{t+1}^{-1} L C_t, i.e. the transposed backward gain
    let gain_t = solve_psd(&next_pred.r, &lam_c, regularize);
    let h = m + gain_t.transpose() * (next - &next_pred.a);
    let mut big_h = c - gain_t.transpose() * &lam_c;
    symmetrize(&mut big_h);
    (h, big_h)
}
