use nalgebra::{DMatrix, DVector};

use super::{ModelKind, ModelSpec, StaticParams};
use crate::error::Result;

/// Linear-Gaussian state-space system
///
/// ```text
/// y_t   = obs_intercept + obs_matrix * phi_t + eps_t,          eps_t ~ N(0, obs_noise_var I)
/// phi_t = trans_matrix * phi_{t-1} + trans_intercept + w_t,    w_t   ~ N(0, trans_noise_cov)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub obs_intercept: DVector<f64>,
    pub obs_matrix: DMatrix<f64>,
    pub obs_noise_var: f64,
    pub trans_matrix: DMatrix<f64>,
    pub trans_intercept: DVector<f64>,
    pub trans_noise_cov: DMatrix<f64>,
}

impl SystemMatrices {
    pub fn state_dim(&self) -> usize {
        self.trans_matrix.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_matrix.nrows()
    }
}

/// Assembles the system matrices of `spec` at parameter value `params`.
///
/// Cohort models use the state `(kappa_t, gamma^{x_1}_t, ..., gamma^{x_p}_t)`:
/// `kappa` is a random walk with drift `theta`, `gamma^{x_1}` an AR(1) with
/// intercept `eta` and coefficient `lambda`, and the remaining rows copy
/// `gamma^{x_{i-1}}_{t-1}` into `gamma^{x_i}_t`.
pub fn build_system(spec: &ModelSpec, params: &StaticParams) -> Result<SystemMatrices> {
    params.check_shape(spec)?;
    let p = spec.n_ages();
    let d = spec.state_dim();
    let obs_intercept = DVector::from_column_slice(&params.alpha);

    let mut obs_matrix = DMatrix::zeros(p, d);
    for i in 0..p {
        obs_matrix[(i, 0)] = params.beta[i];
        if spec.kind.has_cohort() {
            obs_matrix[(i, i + 1)] = params.cohort_loading(spec.kind, i);
        }
    }

    let mut trans_matrix = DMatrix::zeros(d, d);
    let mut trans_intercept = DVector::zeros(d);
    let mut trans_noise_cov = DMatrix::zeros(d, d);
    trans_matrix[(0, 0)] = 1.0;
    trans_intercept[0] = params.theta;
    trans_noise_cov[(0, 0)] = params.sigma2_kappa;
    if spec.kind != ModelKind::LeeCarter {
        trans_matrix[(1, 1)] = params.lambda_or_zero();
        trans_intercept[1] = params.eta_or_zero();
        trans_noise_cov[(1, 1)] = params.sigma2_gamma_or_zero();
        for r in 2..d {
            trans_matrix[(r, r - 1)] = 1.0;
        }
    }

    Ok(SystemMatrices {
        obs_intercept,
        obs_matrix,
        obs_noise_var: params.sigma2_eps,
        trans_matrix,
        trans_intercept,
        trans_noise_cov,
    })
}
