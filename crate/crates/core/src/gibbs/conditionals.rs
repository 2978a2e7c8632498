//! Full conditional distributions of the static parameters given the data
//! and a latent path.
//!
//! Every conditional is conjugate: Gaussian for the intercepts, loadings,
//! drift and AR(1) parameters (truncated to `[-1, 1]` for `lambda`), and
//! inverse gamma for the three variances.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dist::{Gaussian, InverseGamma, TruncatedGaussian};
use crate::error::{Error, Result};
use crate::model::{InvGammaPrior, ModelKind, NormalPrior, StatePath, StaticParams};

/// Which residual enters the `sigma2_gamma` update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CohortVarianceResidual {
    /// `gamma_t - lambda gamma_{t-1} - eta`, matching the state equation.
    #[default]
    WithIntercept,
    /// `gamma_t - lambda gamma_{t-1}`, the intercept-free form.
    WithoutIntercept,
}

/// Data and latent path that the static-parameter conditionals are
/// evaluated against.
#[derive(Debug, Clone, Copy)]
pub struct Conditioning<'a> {
    /// `p x n` log rates.
    pub y: &'a DMatrix<f64>,
    pub path: &'a StatePath,
    pub kind: ModelKind,
}

impl<'a> Conditioning<'a> {
    pub fn new(y: &'a DMatrix<f64>, path: &'a StatePath, kind: ModelKind) -> Self {
        Conditioning { y, path, kind }
    }

    fn n(&self) -> usize {
        self.y.ncols()
    }

    fn p(&self) -> usize {
        self.y.nrows()
    }

    fn obs(&self, i: usize, t: usize) -> f64 {
        self.y[(i, t - 1)]
    }

    fn gamma(&self, i: usize, t: usize) -> f64 {
        if self.kind.has_cohort() {
            self.path.cohort_at(i, t)
        } else {
            0.0
        }
    }

    /// `y_{x,t} - (alpha_x + beta_x kappa_t + beta^gamma_x gamma^x_t)`.
    pub fn residual(&self, params: &StaticParams, i: usize, t: usize) -> f64 {
        self.obs(i, t)
            - (params.alpha[i]
                + params.beta[i] * self.path.kappa(t)
                + params.cohort_loading(self.kind, i) * self.gamma(i, t))
    }

    pub fn alpha(&self, params: &StaticParams, prior: NormalPrior, i: usize) -> Result<Gaussian> {
        let (s2, n) = (params.sigma2_eps, self.n());
        let bg = params.cohort_loading(self.kind, i);
        let sum: f64 = (1..=n)
            .map(|t| self.obs(i, t) - params.beta[i] * self.path.kappa(t) - bg * self.gamma(i, t))
            .sum();
        regression_posterior(prior, sum, n as f64, s2)
    }

    pub fn beta(&self, params: &StaticParams, prior: NormalPrior, i: usize) -> Result<Gaussian> {
        let n = self.n();
        let bg = params.cohort_loading(self.kind, i);
        let (mut xy, mut xx) = (0.0, 0.0);
        for t in 1..=n {
            let k = self.path.kappa(t);
            xy += (self.obs(i, t) - params.alpha[i] - bg * self.gamma(i, t)) * k;
            xx += k * k;
        }
        regression_posterior(prior, xy, xx, params.sigma2_eps)
    }

    pub fn beta_gamma(
        &self,
        params: &StaticParams,
        prior: NormalPrior,
        i: usize,
    ) -> Result<Gaussian> {
        let n = self.n();
        let (mut xy, mut xx) = (0.0, 0.0);
        for t in 1..=n {
            let g = self.gamma(i, t);
            xy += (self.obs(i, t) - params.alpha[i] - params.beta[i] * self.path.kappa(t)) * g;
            xx += g * g;
        }
        regression_posterior(prior, xy, xx, params.sigma2_eps)
    }

    pub fn theta(&self, params: &StaticParams, prior: NormalPrior) -> Result<Gaussian> {
        let n = self.n();
        let sum: f64 = (1..=n).map(|t| self.path.kappa(t) - self.path.kappa(t - 1)).sum();
        regression_posterior(prior, sum, n as f64, params.sigma2_kappa)
    }

    pub fn eta(&self, params: &StaticParams, prior: NormalPrior) -> Result<Gaussian> {
        let n = self.n();
        let lambda = params.lambda_or_zero();
        let sum: f64 = (1..=n)
            .map(|t| self.gamma(0, t) - lambda * self.gamma(0, t - 1))
            .sum();
        regression_posterior(prior, sum, n as f64, params.sigma2_gamma_or_zero())
    }

    pub fn lambda(&self, params: &StaticParams, prior: NormalPrior) -> Result<TruncatedGaussian> {
        let n = self.n();
        let eta = params.eta_or_zero();
        let (mut xy, mut xx) = (0.0, 0.0);
        for t in 1..=n {
            let prev = self.gamma(0, t - 1);
            xy += (self.gamma(0, t) - eta) * prev;
            xx += prev * prev;
        }
        Ok(regression_posterior(prior, xy, xx, params.sigma2_gamma_or_zero())?.truncate(-1.0, 1.0))
    }

    pub fn sigma2_eps(&self, params: &StaticParams, prior: InvGammaPrior) -> InverseGamma {
        let (p, n) = (self.p(), self.n());
        let ss: f64 = (0..p)
            .flat_map(|i| (1..=n).map(move |t| (i, t)))
            .map(|(i, t)| self.residual(params, i, t).powi(2))
            .sum();
        InverseGamma {
            shape: prior.shape + (n * p) as f64 / 2.0,
            scale: prior.scale + 0.5 * ss,
        }
    }

    pub fn sigma2_kappa(&self, params: &StaticParams, prior: InvGammaPrior) -> InverseGamma {
        let n = self.n();
        let ss: f64 = (1..=n)
            .map(|t| (self.path.kappa(t) - self.path.kappa(t - 1) - params.theta).powi(2))
            .sum();
        InverseGamma {
            shape: prior.shape + n as f64 / 2.0,
            scale: prior.scale + 0.5 * ss,
        }
    }

    pub fn sigma2_gamma(
        &self,
        params: &StaticParams,
        prior: InvGammaPrior,
        residual: CohortVarianceResidual,
    ) -> InverseGamma {
        let n = self.n();
        let lambda = params.lambda_or_zero();
        let eta = match residual {
            CohortVarianceResidual::WithIntercept => params.eta_or_zero(),
            CohortVarianceResidual::WithoutIntercept => 0.0,
        };
        let ss: f64 = (1..=n)
            .map(|t| (self.gamma(0, t) - lambda * self.gamma(0, t - 1) - eta).powi(2))
            .sum();
        InverseGamma {
            shape: prior.shape + n as f64 / 2.0,
            scale: prior.scale + 0.5 * ss,
        }
    }
}

/// Posterior of a coefficient `b` in `z_t = b x_t + e_t`, `e_t ~ N(0, noise)`,
/// under the prior `b ~ N(mu, s2)`, given `xz = sum x_t z_t` and
/// `xx = sum x_t^2`.
fn regression_posterior(prior: NormalPrior, xz: f64, xx: f64, noise: f64) -> Result<Gaussian> {
    let denom = prior.var * xx + noise;
    let var = prior.var * noise / denom;
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::IllConditioned(format!(
            "nonpositive conditional posterior variance ({var:e})"
        )));
    }
    Ok(Gaussian {
        mean: (prior.var * xz + prior.mean * noise) / denom,
        var,
    })
}
