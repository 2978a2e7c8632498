//! Identification constraints.
//!
//! The cohort model is invariant under
//! `(alpha, beta, kappa, beta_gamma, gamma) -> (alpha + c1 beta + c2 beta_gamma,
//! beta / c3, c3 (kappa - c1), beta_gamma / c4, c4 (gamma - c2))`, which is
//! removed by `sum beta = 1`, `sum beta_gamma = 1`, `sum_{t=1..n} kappa_t = 0`
//! and `sum_c gamma_c = 0` over the `n + p - 1` in-window cohorts.
//!
//! Centering and normalisation are applied inside the sampler without
//! compensating `alpha` or rescaling the factors.

use super::{ModelKind, ModelSpec, StatePath, StaticParams};
use crate::error::{Error, Result};

/// Centers `kappa` over `t = 1..n` and the cohort factor over the in-window
/// cohorts. The same shift is applied to every stored entry, including
/// `phi_0`, so increments and the shift identity are preserved.
pub fn center_states(path: &mut StatePath, spec: &ModelSpec) -> Result<()> {
    let n = path.n_steps();
    let kappa_mean = (1..=n).map(|t| path.kappa(t)).sum::<f64>() / n as f64;
    let states = path.states_mut();
    for t in 0..=n {
        states[(0, t)] -= kappa_mean;
    }

    if spec.kind.has_cohort() {
        let series = path.extract_cohort_series(&spec.window)?;
        let gamma_mean = series.values().sum::<f64>() / series.len() as f64;
        let states = path.states_mut();
        for v in states.rows_mut(1, spec.n_ages()).iter_mut() {
            *v -= gamma_mean;
        }
    }
    Ok(())
}

/// Divides `values` by their sum.
pub fn normalize_sum(values: &mut [f64], what: &str) -> Result<()> {
    let total: f64 = values.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::DegenerateDraw(format!(
            "cannot normalise {what}: sum is {total}"
        )));
    }
    for v in values.iter_mut() {
        *v /= total;
    }
    Ok(())
}

/// Applies every identification constraint of `spec` to a raw draw.
pub fn apply_constraints(
    mut path: StatePath,
    mut params: StaticParams,
    spec: &ModelSpec,
) -> Result<(StatePath, StaticParams)> {
    center_states(&mut path, spec)?;
    normalize_sum(&mut params.beta, "beta")?;
    if spec.kind == ModelKind::FullCohort {
        if let Some(bg) = params.beta_gamma.as_mut() {
            normalize_sum(bg, "beta_gamma")?;
        }
    }
    Ok((path, params))
}

/// Residuals of the identification constraints: `(sum kappa_{1:n},
/// sum gamma_c, sum beta - 1, sum beta_gamma - 1)`; inapplicable entries
/// are zero.
pub fn constraint_residuals(
    path: &StatePath,
    params: &StaticParams,
    spec: &ModelSpec,
) -> Result<[f64; 4]> {
    let n = path.n_steps();
    let kappa_sum = (1..=n).map(|t| path.kappa(t)).sum::<f64>();
    let gamma_sum = if spec.kind.has_cohort() {
        path.extract_cohort_series(&spec.window)?.values().sum::<f64>()
    } else {
        0.0
    };
    let beta_dev = params.beta.iter().sum::<f64>() - 1.0;
    let bg_dev = match (&params.beta_gamma, spec.kind) {
        (Some(bg), ModelKind::FullCohort) => bg.iter().sum::<f64>() - 1.0,
        _ => 0.0,
    };
    Ok([kappa_sum, gamma_sum, beta_dev, bg_dev])
}
