//! Gibbs sampler for the joint posterior of the latent path and the static
//! parameters.
//!
//! Each iteration draws the path by FFBS, centers the period and cohort
//! factors, draws and normalises the period loadings, then the cohort
//! loadings (full model only), then the remaining parameters in the fixed
//! order `alpha` (by age), `theta`, `eta`, `lambda`, `sigma2_eps`,
//! `sigma2_kappa`, `sigma2_gamma`.

pub mod conditionals;
mod io;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use conditionals::{CohortVarianceResidual, Conditioning};
pub use io::{read_chain_csv, read_chain_json, write_chain_csv, write_chain_json, DrawRecord};

use crate::error::{Error, Result};
use crate::lgssm::{ffbs_sample, kalman_filter};
use crate::model::{
    build_system, center_states, normalize_sum, DataPanel, Hyperpriors, ModelKind, ModelSpec,
    StatePath, StaticParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    pub seed: u64,
    #[serde(default)]
    pub priors: Hyperpriors,
    /// Starting values; [`default_init`] when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<StaticParams>,
    #[serde(default)]
    pub cohort_variance_residual: CohortVarianceResidual,
}

fn default_thin() -> usize {
    1
}

impl SamplerConfig {
    pub fn new(iterations: usize, burn_in: usize, seed: u64) -> Self {
        SamplerConfig {
            iterations,
            burn_in,
            thin: 1,
            seed,
            priors: Hyperpriors::default(),
            init: None,
            cohort_variance_residual: CohortVarianceResidual::default(),
        }
    }

    /// The 30,000 / 15,000 configuration used for the national fits.
    pub fn reference(seed: u64) -> Self {
        Self::new(30_000, 15_000, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidParameter(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be positive".into()));
        }
        self.priors.validate()
    }

    /// Number of draws a completed run stores.
    pub fn stored_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// One stored state of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub params: StaticParams,
    pub path: StatePath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorChain {
    pub spec: ModelSpec,
    pub config: SamplerConfig,
    pub draws: Vec<Draw>,
}

impl PosteriorChain {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Coordinate-wise posterior mean of the static parameters.
    pub fn mean_params(&self) -> Result<StaticParams> {
        let first = &self
            .draws
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty chain".into()))?
            .params;
        let n = self.draws.len() as f64;
        let avg_vec = |get: &dyn Fn(&StaticParams) -> Option<&Vec<f64>>| -> Option<Vec<f64>> {
            let len = get(first)?.len();
            Some(
                (0..len)
                    .map(|i| self.draws.iter().map(|d| get(&d.params).unwrap()[i]).sum::<f64>() / n)
                    .collect(),
            )
        };
        let avg = |get: &dyn Fn(&StaticParams) -> Option<f64>| -> Option<f64> {
            get(first)?;
            Some(self.draws.iter().map(|d| get(&d.params).unwrap()).sum::<f64>() / n)
        };
        Ok(StaticParams {
            alpha: avg_vec(&|p| Some(&p.alpha)).unwrap(),
            beta: avg_vec(&|p| Some(&p.beta)).unwrap(),
            beta_gamma: avg_vec(&|p| p.beta_gamma.as_ref()),
            theta: avg(&|p| Some(p.theta)).unwrap(),
            eta: avg(&|p| p.eta),
            lambda: avg(&|p| p.lambda),
            sigma2_eps: avg(&|p| Some(p.sigma2_eps)).unwrap(),
            sigma2_kappa: avg(&|p| Some(p.sigma2_kappa)).unwrap(),
            sigma2_gamma: avg(&|p| p.sigma2_gamma),
        })
    }

    /// Coordinate-wise posterior mean of the latent paths.
    pub fn mean_path(&self) -> Result<StatePath> {
        let first = self
            .draws
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty chain".into()))?;
        let mut acc = DMatrix::zeros(first.path.dim(), first.path.n_steps() + 1);
        for d in &self.draws {
            acc += d.path.states();
        }
        acc /= self.draws.len() as f64;
        Ok(StatePath::new(acc))
    }

    /// Values of one scalar summary across the stored draws.
    pub fn trace(&self, f: impl Fn(&Draw) -> f64) -> Vec<f64> {
        self.draws.iter().map(f).collect()
    }
}

/// Starting values: row means for `alpha`, uniform loadings `1/p`,
/// `theta = eta = -0.1`, `lambda = 0.5` and all variances `0.01`.
pub fn default_init(spec: &ModelSpec, panel: &DataPanel) -> StaticParams {
    let p = spec.n_ages();
    let y = panel.log_rates();
    let alpha = (0..p).map(|i| y.row(i).mean()).collect();
    let cohort = spec.kind.has_cohort();
    StaticParams {
        alpha,
        beta: vec![1.0 / p as f64; p],
        beta_gamma: (spec.kind == ModelKind::FullCohort).then(|| vec![1.0 / p as f64; p]),
        theta: -0.1,
        eta: cohort.then_some(-0.1),
        lambda: cohort.then_some(0.5),
        sigma2_eps: 0.01,
        sigma2_kappa: 0.01,
        sigma2_gamma: cohort.then_some(0.01),
    }
}

/// Draws the loadings, intercepts, drift and cohort AR(1) parameters given
/// the (centered) path, imposing `sum beta = 1` and, for the full model,
/// `sum beta_gamma = 1` right after their blocks.
pub fn sample_gaussian_posteriors<R: Rng + ?Sized>(
    y: &DMatrix<f64>,
    path: &StatePath,
    params: &StaticParams,
    priors: &Hyperpriors,
    kind: ModelKind,
    rng: &mut R,
) -> Result<StaticParams> {
    let cond = Conditioning::new(y, path, kind);
    let p = y.nrows();
    let mut next = params.clone();

    for i in 0..p {
        next.beta[i] = cond.beta(&next, priors.beta, i)?.sample(rng);
    }
    normalize_sum(&mut next.beta, "beta")?;

    if kind == ModelKind::FullCohort {
        for i in 0..p {
            let draw = cond.beta_gamma(&next, priors.beta_gamma, i)?.sample(rng);
            next.beta_gamma.as_mut().expect("full cohort loadings")[i] = draw;
        }
        normalize_sum(next.beta_gamma.as_mut().unwrap(), "beta_gamma")?;
    }

    for i in 0..p {
        next.alpha[i] = cond.alpha(&next, priors.alpha, i)?.sample(rng);
    }
    next.theta = cond.theta(&next, priors.theta)?.sample(rng);
    if kind.has_cohort() {
        next.eta = Some(cond.eta(&next, priors.eta)?.sample(rng));
        next.lambda = Some(cond.lambda(&next, priors.lambda)?.sample(rng));
    }
    Ok(next)
}

/// Draws `sigma2_eps`, `sigma2_kappa` and (cohort models) `sigma2_gamma`.
pub fn sample_variance_posteriors<R: Rng + ?Sized>(
    y: &DMatrix<f64>,
    path: &StatePath,
    params: &StaticParams,
    priors: &Hyperpriors,
    kind: ModelKind,
    residual: CohortVarianceResidual,
    rng: &mut R,
) -> StaticParams {
    let cond = Conditioning::new(y, path, kind);
    let mut next = params.clone();
    next.sigma2_eps = cond.sigma2_eps(&next, priors.sigma2_eps).sample(rng);
    next.sigma2_kappa = cond.sigma2_kappa(&next, priors.sigma2_kappa).sample(rng);
    if kind.has_cohort() {
        next.sigma2_gamma = Some(
            cond.sigma2_gamma(&next, priors.sigma2_gamma, residual)
                .sample(rng),
        );
    }
    next
}

/// Runs the sampler and keeps every `thin`-th draw after burn-in.
pub fn run_chain(spec: &ModelSpec, panel: &DataPanel, config: &SamplerConfig) -> Result<PosteriorChain> {
    run_chain_with_progress(spec, panel, config, |_| {})
}

/// [`run_chain`] with a callback invoked after every completed iteration.
pub fn run_chain_with_progress(
    spec: &ModelSpec,
    panel: &DataPanel,
    config: &SamplerConfig,
    mut progress: impl FnMut(usize),
) -> Result<PosteriorChain> {
    config.validate()?;
    if panel.window() != &spec.window {
        return Err(Error::DimensionMismatch(
            "panel window differs from model window".into(),
        ));
    }
    let mut params = config
        .init
        .clone()
        .unwrap_or_else(|| default_init(spec, panel));
    params.validate(spec)?;

    let d = spec.state_dim();
    let (m0, c0) = config.priors.initial_state.resolve(d)?;
    let m0 = DVector::from_vec(m0);
    let c0 = DMatrix::from_diagonal(&DVector::from_vec(c0));
    let y = panel.log_rates();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut draws = Vec::with_capacity(config.stored_draws());

    for iteration in 1..=config.iterations {
        let step = (|| -> Result<(StatePath, StaticParams)> {
            let sys = build_system(spec, &params)?;
            let filter = kalman_filter(y, &sys, &m0, &c0)?;
            let mut path = ffbs_sample(&filter, &sys, &mut rng)?;
            center_states(&mut path, spec)?;
            let next = sample_gaussian_posteriors(y, &path, &params, &config.priors, spec.kind, &mut rng)?;
            let next = sample_variance_posteriors(
                y,
                &path,
                &next,
                &config.priors,
                spec.kind,
                config.cohort_variance_residual,
                &mut rng,
            );
            Ok((path, next))
        })();
        let (path, next) = step.map_err(|e| Error::Sampler {
            iteration,
            source: Box::new(e),
        })?;
        params = next;
        if iteration > config.burn_in && (iteration - config.burn_in).is_multiple_of(config.thin) {
            draws.push(Draw {
                params: params.clone(),
                path,
            });
        }
        progress(iteration);
    }

    Ok(PosteriorChain {
        spec: *spec,
        config: config.clone(),
        draws,
    })
}
