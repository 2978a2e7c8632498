//! In-sample residuals and the conditional deviance information criterion.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::PosteriorChain;
use crate::lgssm::kalman_filter;
use crate::model::{build_system, AgeYearWindow, DataPanel, ModelSpec, StatePath, StaticParams};
use crate::stats::pairwise_sum;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// One-step-ahead residuals `e_t = y_t - f_t` on the data window.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualGrid {
    window: AgeYearWindow,
    residuals: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct ResidualGridRepr {
    window: AgeYearWindow,
    /// One row per age, one column per year.
    residuals: Vec<Vec<f64>>,
}

impl ResidualGrid {
    pub fn new(window: AgeYearWindow, residuals: DMatrix<f64>) -> Result<Self> {
        if residuals.shape() != (window.n_ages(), window.n_years()) {
            return Err(Error::DimensionMismatch(format!(
                "residual grid is {}x{}, window is {}x{}",
                residuals.nrows(),
                residuals.ncols(),
                window.n_ages(),
                window.n_years()
            )));
        }
        Ok(ResidualGrid { window, residuals })
    }

    pub fn window(&self) -> &AgeYearWindow {
        &self.window
    }

    pub fn residuals(&self) -> &DMatrix<f64> {
        &self.residuals
    }

    /// Mean absolute residual of every in-window cohort.
    pub fn mean_abs_by_cohort(&self) -> BTreeMap<i32, f64> {
        let mut acc: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
        for (i, age) in self.window.ages().enumerate() {
            for (j, year) in self.window.years().enumerate() {
                let e = acc.entry(year - age).or_default();
                e.0 += self.residuals[(i, j)].abs();
                e.1 += 1;
            }
        }
        acc.into_iter().map(|(c, (s, k))| (c, s / k as f64)).collect()
    }

    /// Long-format heatmap data: `age,year,cohort,residual`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "age,year,cohort,residual")?;
        for (i, age) in self.window.ages().enumerate() {
            for (j, year) in self.window.years().enumerate() {
                writeln!(w, "{age},{year},{},{:?}", year - age, self.residuals[(i, j)])?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let repr = ResidualGridRepr {
            window: self.window,
            residuals: self
                .residuals
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        };
        serde_json::to_value(repr).expect("plain data serializes")
    }

    pub fn from_json(value: serde_json::Value) -> Result<Self> {
        let repr: ResidualGridRepr =
            serde_json::from_value(value).map_err(|e| Error::Data(e.to_string()))?;
        let p = repr.residuals.len();
        let n = repr.residuals.first().map_or(0, Vec::len);
        if repr.residuals.iter().any(|r| r.len() != n) {
            return Err(Error::Data("ragged residual grid".into()));
        }
        let m = DMatrix::from_fn(p, n, |i, j| repr.residuals[i][j]);
        Self::new(repr.window, m)
    }
}

/// Filters the panel once at the posterior mean of the static parameters
/// and returns the in-sample one-step-ahead residuals.
pub fn compute_residuals(panel: &DataPanel, chain: &PosteriorChain) -> Result<ResidualGrid> {
    let psi = chain.mean_params()?;
    let sys = build_system(&chain.spec, &psi)?;
    let (m0, c0) = chain.config.priors.initial_state.resolve(chain.spec.state_dim())?;
    let m0 = DVector::from_vec(m0);
    let c0 = DMatrix::from_diagonal(&DVector::from_vec(c0));
    let filter = kalman_filter(panel.log_rates(), &sys, &m0, &c0)?;
    ResidualGrid::new(*panel.window(), filter.residuals(panel.log_rates()))
}

/// Log-likelihood of the panel given the static parameters and the latent
/// path, with independent Gaussian errors in every cell.
pub fn conditional_loglik(
    panel: &DataPanel,
    psi: &StaticParams,
    path: &StatePath,
    spec: &ModelSpec,
) -> Result<f64> {
    if !(psi.sigma2_eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma2_eps must be positive, got {}",
            psi.sigma2_eps
        )));
    }
    psi.check_shape(spec)?;
    let y = panel.log_rates();
    let (p, n) = y.shape();
    if path.n_steps() != n || path.dim() != spec.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "path has {} steps of dimension {}, expected {n} and {}",
            path.n_steps(),
            path.dim(),
            spec.state_dim()
        )));
    }
    let s2 = psi.sigma2_eps;
    let mut terms = Vec::with_capacity(n);
    for t in 1..=n {
        let k = path.kappa(t);
        let ss: f64 = (0..p)
            .map(|i| {
                let fit = psi.alpha[i]
                    + psi.beta[i] * k
                    + psi.cohort_loading(spec.kind, i) * path.cohort_at(i, t);
                let r = y[(i, t - 1)] - fit;
                r * r
            })
            .sum();
        terms.push(ss);
    }
    Ok(-0.5 * ((n * p) as f64 * (LN_2PI + s2.ln()) + pairwise_sum(&terms) / s2))
}

/// Conditional DIC with `D = -2 ln p(y | psi, phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DicReport {
    pub mean_deviance: f64,
    pub deviance_at_mean: f64,
    #[serde(rename = "pD")]
    pub p_d: f64,
    pub dic: f64,
}

impl DicReport {
    pub fn from_deviances(mean_deviance: f64, deviance_at_mean: f64) -> Self {
        DicReport {
            mean_deviance,
            deviance_at_mean,
            p_d: mean_deviance - deviance_at_mean,
            dic: 2.0 * mean_deviance - deviance_at_mean,
        }
    }
}

/// Deviance of every stored draw, in chain order.
pub fn deviance_trace(panel: &DataPanel, chain: &PosteriorChain) -> Result<Vec<f64>> {
    chain
        .draws
        .par_iter()
        .map(|d| conditional_loglik(panel, &d.params, &d.path, &chain.spec).map(|l| -2.0 * l))
        .collect()
}

/// Averages the deviance over the chain and evaluates it at the
/// coordinate-wise posterior mean of parameters and states.
pub fn compute_dic(panel: &DataPanel, chain: &PosteriorChain) -> Result<DicReport> {
    if chain.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "DIC needs at least two draws, chain has {}",
            chain.len()
        )));
    }
    let devs = deviance_trace(panel, chain)?;
    let mean_dev = pairwise_sum(&devs) / devs.len() as f64;
    let psi = chain.mean_params()?;
    let path = chain.mean_path()?;
    let at_mean = -2.0 * conditional_loglik(panel, &psi, &path, &chain.spec)?;
    Ok(DicReport::from_deviances(mean_dev, at_mean))
}
