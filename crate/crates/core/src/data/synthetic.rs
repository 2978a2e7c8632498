//! Synthetic panels drawn from the model itself.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::simulate_draw;
use crate::gibbs::{Draw, DrawRecord};
use crate::model::{DataPanel, ModelSpec, StatePath, StaticParams};

/// Simulated panel together with the parameters and latent path that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub spec: ModelSpec,
    pub params: StaticParams,
    /// `phi_0 ..= phi_n`.
    pub path: StatePath,
    pub panel: DataPanel,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct TruthRepr {
    spec: ModelSpec,
    seed: u64,
    #[serde(flatten)]
    record: DrawRecord,
}

impl SyntheticTruth {
    /// Parameters, path and seed; the panel is stored separately.
    pub fn to_json(&self) -> Result<serde_json::Value> {
        let record = DrawRecord::from_draw(
            &Draw {
                params: self.params.clone(),
                path: self.path.clone(),
            },
            &self.spec,
        )?;
        Ok(serde_json::to_value(TruthRepr {
            spec: self.spec,
            seed: self.seed,
            record,
        })
        .expect("plain data serializes"))
    }
}

/// Reads `(spec, params, path, seed)` written by [`SyntheticTruth::to_json`].
pub fn truth_from_json(value: serde_json::Value) -> Result<(ModelSpec, Draw, u64)> {
    let repr: TruthRepr = serde_json::from_value(value).map_err(|e| Error::Data(e.to_string()))?;
    let draw = repr.record.into_draw(&repr.spec)?;
    Ok((repr.spec, draw, repr.seed))
}

/// Simulates `phi_{1:n}` from the state equation started at `phi0`, then
/// `y_{1:n}` from the observation equation. Zero variances give a
/// deterministic panel.
pub fn simulate_panel(
    spec: &ModelSpec,
    params: &StaticParams,
    phi0: &DVector<f64>,
    seed: u64,
) -> Result<SyntheticTruth> {
    params.check_shape(spec)?;
    let variances = [params.sigma2_eps, params.sigma2_kappa, params.sigma2_gamma_or_zero()];
    if variances.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "variances must be finite and non-negative".into(),
        ));
    }
    if phi0.len() != spec.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} entries, expected {}",
            phi0.len(),
            spec.state_dim()
        )));
    }
    let start = Draw {
        params: params.clone(),
        path: StatePath::new(DMatrix::from_column_slice(phi0.len(), 1, phi0.as_slice())),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sim = simulate_draw(spec, &start, spec.n_years(), &mut rng)?;

    let d = spec.state_dim();
    let mut states = DMatrix::zeros(d, spec.n_years() + 1);
    states.set_column(0, phi0);
    states.columns_mut(1, spec.n_years()).copy_from(&sim.factors);
    Ok(SyntheticTruth {
        spec: *spec,
        params: params.clone(),
        path: StatePath::new(states),
        panel: DataPanel::new(spec.window, sim.log_rates)?,
        seed,
    })
}

/// Initial state with `kappa_0 = kappa0` and the `p` cohort entries drawn
/// as consecutive values of the stationary cohort AR(1), oldest cohort
/// first. Requires `|lambda| < 1` for cohort models.
pub fn stationary_initial_state(
    spec: &ModelSpec,
    params: &StaticParams,
    kappa0: f64,
    seed: u64,
) -> Result<DVector<f64>> {
    let mut phi = DVector::zeros(spec.state_dim());
    phi[0] = kappa0;
    if !spec.kind.has_cohort() {
        return Ok(phi);
    }
    let (eta, lambda, s2) = (params.eta_or_zero(), params.lambda_or_zero(), params.sigma2_gamma_or_zero());
    if lambda.abs() >= 1.0 {
        return Err(Error::InvalidParameter(
            "stationary cohort start needs |lambda| < 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, s2.sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let p = spec.n_ages();
    let mut g = eta / (1.0 - lambda)
        + Normal::new(0.0, (s2 / (1.0 - lambda * lambda)).sqrt())
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .sample(&mut rng);
    for r in (1..=p).rev() {
        phi[r] = g;
        g = eta + lambda * g + noise.sample(&mut rng);
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AgeYearWindow, ModelKind};
    use crate::stats::{mean, variance};

    fn params(kind: ModelKind, p: usize, s2: f64) -> StaticParams {
        let cohort = kind.has_cohort();
        StaticParams {
            alpha: (0..p).map(|i| -5.0 + 0.1 * i as f64).collect(),
            beta: vec![1.0 / p as f64; p],
            beta_gamma: (kind == ModelKind::FullCohort).then(|| vec![1.0 / p as f64; p]),
            theta: -0.2,
            eta: cohort.then_some(0.05),
            lambda: cohort.then_some(0.6),
            sigma2_eps: s2,
            sigma2_kappa: s2,
            sigma2_gamma: cohort.then_some(s2),
        }
    }

    #[test]
    fn zero_variances_give_the_deterministic_surface() {
        let w = AgeYearWindow::new(60..=62, 2000..=2005).unwrap();
        let spec = ModelSpec::new(ModelKind::FullCohort, w);
        let ps = params(ModelKind::FullCohort, 3, 0.0);
        let phi0 = DVector::from_vec(vec![0.4, 0.1, 0.2, 0.3]);
        let truth = simulate_panel(&spec, &ps, &phi0, 1).unwrap();
        assert!(truth.path.satisfies_shift_identity_exactly());
        let cohorts = truth.path.extract_cohort_series(&w).unwrap();
        for (i, age) in w.ages().enumerate() {
            for (j, year) in w.years().enumerate() {
                let kappa = 0.4 + (j + 1) as f64 * ps.theta;
                let want = ps.alpha[i] + ps.beta[i] * kappa + ps.beta_gamma.as_ref().unwrap()[i] * cohorts[&(year - age)];
                assert!((truth.panel.get(age, year).unwrap() - want).abs() < 1e-12);
            }
        }
        // pre-window cohorts follow the AR(1) mean recursion
        assert!((truth.path.cohort_at(0, 1) - (0.05 + 0.6 * 0.1)).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_panel() {
        let w = AgeYearWindow::new(60..=64, 2000..=2009).unwrap();
        let spec = ModelSpec::new(ModelKind::SimplifiedCohort, w);
        let ps = params(ModelKind::SimplifiedCohort, 5, 0.01);
        let phi0 = stationary_initial_state(&spec, &ps, 0.0, 3).unwrap();
        let a = simulate_panel(&spec, &ps, &phi0, 9).unwrap();
        let b = simulate_panel(&spec, &ps, &phi0, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.panel, simulate_panel(&spec, &ps, &phi0, 10).unwrap().panel);
        let (spec2, draw, seed) = truth_from_json(a.to_json().unwrap()).unwrap();
        assert_eq!((spec2, seed), (spec, 9));
        assert_eq!((draw.params, draw.path), (a.params, a.path));
    }

    #[test]
    fn kappa_innovation_variance() {
        let w = AgeYearWindow::new(60..=61, 1..=10_000).unwrap();
        let spec = ModelSpec::new(ModelKind::LeeCarter, w);
        let ps = StaticParams {
            sigma2_kappa: 0.04,
            ..params(ModelKind::LeeCarter, 2, 1e-4)
        };
        let truth = simulate_panel(&spec, &ps, &DVector::zeros(1), 17).unwrap();
        let k: Vec<f64> = truth.path.kappas().collect();
        let inc: Vec<f64> = k.windows(2).map(|w| w[1] - w[0]).collect();
        let v = variance(&inc);
        assert!((v / 0.04 - 1.0).abs() < 0.05, "{v}");
        assert!((mean(&inc) - ps.theta).abs() < 4.0 * (0.04f64 / 1e4).sqrt());
    }
}
