use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::AgeYearWindow;
use crate::error::{Error, Result};

/// Tolerance used when reading cohort values out of a path.
pub const SHIFT_TOLERANCE: f64 = 1e-9;

/// Latent state trajectory `phi_0, ..., phi_n`, stored column-wise.
///
/// For cohort models row 0 is the period factor `kappa_t` and row `i + 1`
/// is `gamma^{x_i}_t`, the cohort factor of the cohort aged `x_i` at time
/// `t`. Lee-Carter paths have the single row `kappa_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePath {
    states: DMatrix<f64>,
}

impl StatePath {
    pub fn new(states: DMatrix<f64>) -> Self {
        StatePath { states }
    }

    pub fn from_columns(columns: &[DVector<f64>]) -> Self {
        StatePath {
            states: DMatrix::from_columns(columns),
        }
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.states
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.states
    }

    pub fn dim(&self) -> usize {
        self.states.nrows()
    }

    /// Number of observation times `n`; the path holds `n + 1` states.
    pub fn n_steps(&self) -> usize {
        self.states.ncols() - 1
    }

    pub fn state(&self, t: usize) -> DVector<f64> {
        self.states.column(t).into_owned()
    }

    pub fn kappa(&self, t: usize) -> f64 {
        self.states[(0, t)]
    }

    pub fn kappas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.states.ncols()).map(move |t| self.states[(0, t)])
    }

    pub fn has_cohort(&self) -> bool {
        self.dim() > 1
    }

    /// `gamma^{x_i}_t` for age index `i` (0-based) and time `t` in `0..=n`;
    /// zero for Lee-Carter paths.
    pub fn cohort_at(&self, age_index: usize, t: usize) -> f64 {
        if self.has_cohort() {
            self.states[(age_index + 1, t)]
        } else {
            0.0
        }
    }

    /// Largest deviation from `gamma^{x_i}_t = gamma^{x_{i-1}}_{t-1}`.
    pub fn max_shift_violation(&self) -> (f64, usize, usize) {
        let mut worst = (0.0, 0, 0);
        if !self.has_cohort() {
            return worst;
        }
        let p = self.dim() - 1;
        for t in 1..self.states.ncols() {
            for i in 1..p {
                let d = (self.states[(i + 1, t)] - self.states[(i, t - 1)]).abs();
                if d > worst.0 || d.is_nan() {
                    worst = (d, i, t);
                }
            }
        }
        worst
    }

    /// True when every shifted cohort entry is a bitwise copy.
    pub fn satisfies_shift_identity_exactly(&self) -> bool {
        if !self.has_cohort() {
            return true;
        }
        let p = self.dim() - 1;
        (1..self.states.ncols()).all(|t| {
            (1..p).all(|i| self.states[(i + 1, t)].to_bits() == self.states[(i, t - 1)].to_bits())
        })
    }

    pub fn check_shift_identity(&self, tol: f64) -> Result<()> {
        let (diff, age_index, time) = self.max_shift_violation();
        if diff > tol || diff.is_nan() {
            return Err(Error::CorruptedPath {
                age_index,
                time,
                diff,
            });
        }
        Ok(())
    }

    /// One value per in-window cohort `t1 - xp ..= tn - x1`, each read from
    /// the latest year in which that cohort is observed.
    pub fn extract_cohort_series(&self, window: &AgeYearWindow) -> Result<BTreeMap<i32, f64>> {
        self.check_window(window)?;
        self.check_shift_identity(SHIFT_TOLERANCE)?;
        Ok(window
            .cohorts()
            .map(|c| {
                let (i, t) = latest_cell(window, c);
                (c, self.states[(i + 1, t)])
            })
            .collect())
    }

    /// All `n + p` cohort values stored in the path: the in-window cohorts
    /// plus the one cohort `t1 - 1 - xp` that only appears in `phi_0`.
    /// Ordered by increasing cohort.
    pub fn all_cohort_values(&self, window: &AgeYearWindow) -> Result<Vec<f64>> {
        let series = self.extract_cohort_series(window)?;
        let p = window.n_ages();
        let mut out = Vec::with_capacity(series.len() + 1);
        out.push(self.states[(p, 0)]);
        out.extend(series.into_values());
        Ok(out)
    }

    /// Rebuilds a cohort-model path from `kappa_{0:n}` and the `n + p`
    /// cohort values returned by [`StatePath::all_cohort_values`].
    pub fn from_factors(window: &AgeYearWindow, kappa: &[f64], cohorts: &[f64]) -> Result<Self> {
        let (p, n) = (window.n_ages(), window.n_years());
        if kappa.len() != n + 1 || cohorts.len() != n + p {
            return Err(Error::DimensionMismatch(format!(
                "need {} kappa and {} cohort values, got {} and {}",
                n + 1,
                n + p,
                kappa.len(),
                cohorts.len()
            )));
        }
        let first = window.first_cohort() - 1;
        let states = DMatrix::from_fn(p + 1, n + 1, |r, t| {
            if r == 0 {
                kappa[t]
            } else {
                let i = r - 1;
                let c = window.first_year() - 1 + t as i32 - (window.first_age() + i as i32);
                cohorts[(c - first) as usize]
            }
        });
        Ok(StatePath { states })
    }

    /// Lee-Carter path from `kappa_{0:n}`.
    pub fn from_kappa(kappa: &[f64]) -> Self {
        StatePath {
            states: DMatrix::from_row_slice(1, kappa.len(), kappa),
        }
    }

    fn check_window(&self, window: &AgeYearWindow) -> Result<()> {
        if !self.has_cohort() {
            return Err(Error::DimensionMismatch(
                "path has no cohort component".into(),
            ));
        }
        if self.dim() != window.n_ages() + 1 || self.n_steps() != window.n_years() {
            return Err(Error::DimensionMismatch(format!(
                "path is {}x{} but window needs {}x{}",
                self.dim(),
                self.states.ncols(),
                window.n_ages() + 1,
                window.n_years() + 1
            )));
        }
        Ok(())
    }
}

/// `(age index, time index)` of the latest cell holding cohort `c`.
fn latest_cell(window: &AgeYearWindow, c: i32) -> (usize, usize) {
    let age = window.last_age().min(window.last_year() - c);
    let year = c + age;
    (
        (age - window.first_age()) as usize,
        (year - window.first_year()) as usize + 1,
    )
}
