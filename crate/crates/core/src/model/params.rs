use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AgeYearWindow;
use crate::error::{Error, Result};

/// Which member of the nested model family is being fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Period factor only: `y = alpha_x + beta_x kappa_t`.
    #[serde(rename = "lc")]
    LeeCarter,
    /// Cohort factor enters with unit loading on every age.
    SimplifiedCohort,
    /// Cohort factor with its own age-modulating loadings.
    FullCohort,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::LeeCarter,
        ModelKind::SimplifiedCohort,
        ModelKind::FullCohort,
    ];

    pub fn has_cohort(self) -> bool {
        !matches!(self, ModelKind::LeeCarter)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LeeCarter => "lc",
            ModelKind::SimplifiedCohort => "simplified-cohort",
            ModelKind::FullCohort => "full-cohort",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lc" | "lee-carter" => Ok(ModelKind::LeeCarter),
            "simplified-cohort" | "simplified" => Ok(ModelKind::SimplifiedCohort),
            "full-cohort" | "full" => Ok(ModelKind::FullCohort),
            other => Err(Error::InvalidParameter(format!("unknown model kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub window: AgeYearWindow,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, window: AgeYearWindow) -> Self {
        ModelSpec { kind, window }
    }

    /// 1 for Lee-Carter, `p + 1` for the cohort models.
    pub fn state_dim(&self) -> usize {
        if self.kind.has_cohort() {
            self.window.n_ages() + 1
        } else {
            1
        }
    }

    pub fn n_ages(&self) -> usize {
        self.window.n_ages()
    }

    pub fn n_years(&self) -> usize {
        self.window.n_years()
    }
}

/// Static (non-state) parameters. Fields that do not exist for a model kind
/// are `None`: Lee-Carter has no cohort block, and the simplified cohort
/// model has no cohort loadings (they are fixed at one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_gamma: Option<Vec<f64>>,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub sigma2_eps: f64,
    pub sigma2_kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_gamma: Option<f64>,
}

impl StaticParams {
    /// Loading of the cohort factor at age index `i`: the fitted value for
    /// the full model, one for the simplified model and zero for Lee-Carter.
    pub fn cohort_loading(&self, kind: ModelKind, i: usize) -> f64 {
        match kind {
            ModelKind::LeeCarter => 0.0,
            ModelKind::SimplifiedCohort => 1.0,
            ModelKind::FullCohort => self.beta_gamma.as_ref().map_or(1.0, |b| b[i]),
        }
    }

    pub fn eta_or_zero(&self) -> f64 {
        self.eta.unwrap_or(0.0)
    }

    pub fn lambda_or_zero(&self) -> f64 {
        self.lambda.unwrap_or(0.0)
    }

    pub fn sigma2_gamma_or_zero(&self) -> f64 {
        self.sigma2_gamma.unwrap_or(0.0)
    }

    /// Checks that the populated fields match `spec`.
    pub fn check_shape(&self, spec: &ModelSpec) -> Result<()> {
        let p = spec.n_ages();
        let mismatch = |what: &str| Err(Error::DimensionMismatch(what.to_string()));
        if self.alpha.len() != p {
            return mismatch(&format!("alpha has {} entries, expected {p}", self.alpha.len()));
        }
        if self.beta.len() != p {
            return mismatch(&format!("beta has {} entries, expected {p}", self.beta.len()));
        }
        match spec.kind {
            ModelKind::LeeCarter => {
                if self.beta_gamma.is_some()
                    || self.eta.is_some()
                    || self.lambda.is_some()
                    || self.sigma2_gamma.is_some()
                {
                    return mismatch("Lee-Carter parameters must not carry a cohort block");
                }
            }
            ModelKind::SimplifiedCohort | ModelKind::FullCohort => {
                if self.eta.is_none() || self.lambda.is_none() || self.sigma2_gamma.is_none() {
                    return mismatch("cohort models need eta, lambda and sigma2_gamma");
                }
                match (&self.beta_gamma, spec.kind) {
                    (Some(bg), ModelKind::FullCohort) if bg.len() != p => {
                        return mismatch(&format!(
                            "beta_gamma has {} entries, expected {p}",
                            bg.len()
                        ))
                    }
                    (None, ModelKind::FullCohort) => {
                        return mismatch("full cohort model needs beta_gamma")
                    }
                    (Some(_), ModelKind::SimplifiedCohort) => {
                        return mismatch("simplified cohort model fixes beta_gamma at one")
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Shape check plus positivity of variances and `|lambda| <= 1`.
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        self.check_shape(spec)?;
        let all = self
            .alpha
            .iter()
            .chain(&self.beta)
            .chain(self.beta_gamma.iter().flatten())
            .chain([&self.theta, &self.sigma2_eps, &self.sigma2_kappa])
            .chain(self.eta.iter())
            .chain(self.lambda.iter())
            .chain(self.sigma2_gamma.iter());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite parameter value".into()));
        }
        if self.sigma2_eps <= 0.0 {
            return Err(Error::InvalidParameter("sigma2_eps must be positive".into()));
        }
        if self.sigma2_kappa < 0.0 || self.sigma2_gamma.is_some_and(|v| v < 0.0) {
            return Err(Error::InvalidParameter(
                "state innovation variances must be nonnegative".into(),
            ));
        }
        if self.lambda.is_some_and(|l| l.abs() > 1.0) {
            return Err(Error::InvalidParameter("lambda must lie in [-1, 1]".into()));
        }
        Ok(())
    }
}

/// `N(mean, var)` prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub var: f64,
}

/// Inverse-gamma prior with mean `scale / (shape - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvGammaPrior {
    pub shape: f64,
    pub scale: f64,
}

/// Gaussian prior on the initial state `phi_0`. A single-entry mean or
/// variance is broadcast to every state coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePrior {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl StatePrior {
    pub fn isotropic(mean: f64, var: f64) -> Self {
        StatePrior {
            mean: vec![mean],
            var: vec![var],
        }
    }

    pub fn resolve(&self, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let expand = |v: &[f64], what: &str| -> Result<Vec<f64>> {
            match v.len() {
                1 => Ok(vec![v[0]; dim]),
                k if k == dim => Ok(v.to_vec()),
                k => Err(Error::DimensionMismatch(format!(
                    "initial state {what} has {k} entries, state dimension is {dim}"
                ))),
            }
        };
        Ok((expand(&self.mean, "mean")?, expand(&self.var, "variance")?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperpriors {
    pub alpha: NormalPrior,
    pub beta: NormalPrior,
    pub beta_gamma: NormalPrior,
    pub theta: NormalPrior,
    pub eta: NormalPrior,
    /// Truncated to `[-1, 1]`.
    pub lambda: NormalPrior,
    pub sigma2_eps: InvGammaPrior,
    pub sigma2_kappa: InvGammaPrior,
    pub sigma2_gamma: InvGammaPrior,
    pub initial_state: StatePrior,
}

impl Default for Hyperpriors {
    /// Vague priors: `N(0, 10)`, `IG(2.01, 0.01)`, `phi_0 ~ N(0, 10 I)`.
    fn default() -> Self {
        let normal = NormalPrior {
            mean: 0.0,
            var: 10.0,
        };
        let ig = InvGammaPrior {
            shape: 2.01,
            scale: 0.01,
        };
        Hyperpriors {
            alpha: normal,
            beta: normal,
            beta_gamma: normal,
            theta: normal,
            eta: normal,
            lambda: normal,
            sigma2_eps: ig,
            sigma2_kappa: ig,
            sigma2_gamma: ig,
            initial_state: StatePrior::isotropic(0.0, 10.0),
        }
    }
}

impl Hyperpriors {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("beta_gamma", self.beta_gamma),
            ("theta", self.theta),
            ("eta", self.eta),
            ("lambda", self.lambda),
        ] {
            if !(p.var > 0.0) || !p.mean.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "prior for {name} needs finite mean and positive variance"
                )));
            }
        }
        for (name, p) in [
            ("sigma2_eps", self.sigma2_eps),
            ("sigma2_kappa", self.sigma2_kappa),
            ("sigma2_gamma", self.sigma2_gamma),
        ] {
            if !(p.shape > 0.0 && p.scale > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "inverse-gamma prior for {name} needs positive shape and scale"
                )));
            }
        }
        if self.initial_state.var.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter(
                "initial state covariance must be positive definite".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window() -> AgeYearWindow {
        AgeYearWindow::new(0..=2, 0..=3).unwrap()
    }

    fn full() -> StaticParams {
        StaticParams {
            alpha: vec![0.0; 3],
            beta: vec![1.0 / 3.0; 3],
            beta_gamma: Some(vec![1.0 / 3.0; 3]),
            theta: -0.1,
            eta: Some(0.0),
            lambda: Some(0.5),
            sigma2_eps: 0.01,
            sigma2_kappa: 0.01,
            sigma2_gamma: Some(0.01),
        }
    }

    #[test]
    fn state_dim_per_kind() {
        let w = window();
        assert_eq!(ModelSpec::new(ModelKind::LeeCarter, w).state_dim(), 1);
        assert_eq!(ModelSpec::new(ModelKind::SimplifiedCohort, w).state_dim(), 4);
        assert_eq!(ModelSpec::new(ModelKind::FullCohort, w).state_dim(), 4);
    }

    #[test]
    fn shape_checks_follow_kind() {
        let w = window();
        let p = full();
        assert!(p.validate(&ModelSpec::new(ModelKind::FullCohort, w)).is_ok());
        assert!(p.check_shape(&ModelSpec::new(ModelKind::SimplifiedCohort, w)).is_err());
        assert!(p.check_shape(&ModelSpec::new(ModelKind::LeeCarter, w)).is_err());

        let mut bad = full();
        bad.alpha.pop();
        assert!(bad.check_shape(&ModelSpec::new(ModelKind::FullCohort, w)).is_err());

        let mut bad = full();
        bad.lambda = Some(1.5);
        assert!(bad.validate(&ModelSpec::new(ModelKind::FullCohort, w)).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert!("apc".parse::<ModelKind>().is_err());
    }

    #[test]
    fn default_priors_are_vague() {
        let h = Hyperpriors::default();
        h.validate().unwrap();
        assert_eq!(h.alpha.var, 10.0);
        assert_eq!(h.sigma2_eps.shape, 2.01);
        assert_eq!(h.sigma2_eps.scale, 0.01);
        let (m, v) = h.initial_state.resolve(4).unwrap();
        assert_eq!(m, vec![0.0; 4]);
        assert_eq!(v, vec![10.0; 4]);
        assert!(StatePrior {
            mean: vec![0.0; 2],
            var: vec![1.0]
        }
        .resolve(3)
        .is_err());
    }
}
