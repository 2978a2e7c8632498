use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contiguous grid of single-year ages and calendar years.
///
/// Cohorts are indexed by year of birth `c = year - age`; a window with `p`
/// ages and `n` years spans `n + p - 1` cohorts, from `t1 - xp` to `tn - x1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WindowRepr", into = "WindowRepr")]
pub struct AgeYearWindow {
    first_age: i32,
    n_ages: usize,
    first_year: i32,
    n_years: usize,
}

#[derive(Serialize, Deserialize)]
struct WindowRepr {
    ages: [i32; 2],
    years: [i32; 2],
}

impl TryFrom<WindowRepr> for AgeYearWindow {
    type Error = Error;

    fn try_from(r: WindowRepr) -> Result<Self> {
        AgeYearWindow::new(r.ages[0]..=r.ages[1], r.years[0]..=r.years[1])
    }
}

impl From<AgeYearWindow> for WindowRepr {
    fn from(w: AgeYearWindow) -> Self {
        WindowRepr {
            ages: [w.first_age(), w.last_age()],
            years: [w.first_year(), w.last_year()],
        }
    }
}

impl AgeYearWindow {
    pub fn new(ages: RangeInclusive<i32>, years: RangeInclusive<i32>) -> Result<Self> {
        let (a0, a1) = (*ages.start(), *ages.end());
        let (y0, y1) = (*years.start(), *years.end());
        if a1 <= a0 {
            return Err(Error::InvalidWindow(format!(
                "need at least two ages, got {a0}:{a1}"
            )));
        }
        if y1 <= y0 {
            return Err(Error::InvalidWindow(format!(
                "need at least two years, got {y0}:{y1}"
            )));
        }
        if a0 < 0 {
            return Err(Error::InvalidWindow(format!("negative age {a0}")));
        }
        Ok(AgeYearWindow {
            first_age: a0,
            n_ages: (a1 - a0 + 1) as usize,
            first_year: y0,
            n_years: (y1 - y0 + 1) as usize,
        })
    }

    /// Builds a window from explicit lists, which must be strictly increasing
    /// with unit spacing.
    pub fn from_lists(ages: &[i32], years: &[i32]) -> Result<Self> {
        check_contiguous("ages", ages)?;
        check_contiguous("years", years)?;
        Self::new(ages[0]..=ages[ages.len() - 1], years[0]..=years[years.len() - 1])
    }

    /// The 65-95 by 1970-2010 window used for the national studies.
    pub fn reference() -> Self {
        Self::new(65..=95, 1970..=2010).expect("static window")
    }

    pub fn n_ages(&self) -> usize {
        self.n_ages
    }

    pub fn n_years(&self) -> usize {
        self.n_years
    }

    pub fn n_cohorts(&self) -> usize {
        self.n_ages + self.n_years - 1
    }

    pub fn first_age(&self) -> i32 {
        self.first_age
    }

    pub fn last_age(&self) -> i32 {
        self.first_age + self.n_ages as i32 - 1
    }

    pub fn first_year(&self) -> i32 {
        self.first_year
    }

    pub fn last_year(&self) -> i32 {
        self.first_year + self.n_years as i32 - 1
    }

    pub fn ages(&self) -> impl DoubleEndedIterator<Item = i32> + Clone {
        self.first_age..=self.last_age()
    }

    pub fn years(&self) -> impl DoubleEndedIterator<Item = i32> + Clone {
        self.first_year..=self.last_year()
    }

    /// Cohorts (years of birth) in increasing order.
    pub fn cohorts(&self) -> RangeInclusive<i32> {
        self.first_cohort()..=self.last_cohort()
    }

    pub fn first_cohort(&self) -> i32 {
        self.first_year - self.last_age()
    }

    pub fn last_cohort(&self) -> i32 {
        self.last_year() - self.first_age
    }

    /// Year of birth of the cell `(age, year)`.
    pub fn cohort_index(&self, age: i32, year: i32) -> Result<i32> {
        if !self.contains(age, year) {
            return Err(Error::OutOfWindow { age, year });
        }
        Ok(year - age)
    }

    pub fn contains(&self, age: i32, year: i32) -> bool {
        (self.first_age..=self.last_age()).contains(&age)
            && (self.first_year..=self.last_year()).contains(&year)
    }

    pub fn age_index(&self, age: i32) -> Option<usize> {
        (self.first_age..=self.last_age())
            .contains(&age)
            .then(|| (age - self.first_age) as usize)
    }

    pub fn year_index(&self, year: i32) -> Option<usize> {
        (self.first_year..=self.last_year())
            .contains(&year)
            .then(|| (year - self.first_year) as usize)
    }
}

fn check_contiguous(what: &str, values: &[i32]) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::InvalidWindow(format!(
            "{what}: need at least two entries, got {}",
            values.len()
        )));
    }
    for w in values.windows(2) {
        if w[1] != w[0] + 1 {
            return Err(Error::InvalidWindow(format!(
                "{what} must be contiguous and increasing: {} followed by {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Log crude death rates on an [`AgeYearWindow`]: entry `(i, j)` is
/// `ln(D / E)` for age `x_i` in year `t_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPanel {
    window: AgeYearWindow,
    log_rates: DMatrix<f64>,
}

impl DataPanel {
    pub fn new(window: AgeYearWindow, log_rates: DMatrix<f64>) -> Result<Self> {
        if log_rates.nrows() != window.n_ages() || log_rates.ncols() != window.n_years() {
            return Err(Error::DimensionMismatch(format!(
                "panel is {}x{} but window has {} ages and {} years",
                log_rates.nrows(),
                log_rates.ncols(),
                window.n_ages(),
                window.n_years()
            )));
        }
        if let Some(k) = log_rates.iter().position(|v| !v.is_finite()) {
            let (i, j) = (k % log_rates.nrows(), k / log_rates.nrows());
            return Err(Error::Data(format!(
                "non-finite log rate at age {}, year {}",
                window.first_age() + i as i32,
                window.first_year() + j as i32
            )));
        }
        Ok(DataPanel { window, log_rates })
    }

    pub fn window(&self) -> &AgeYearWindow {
        &self.window
    }

    /// `p x n` matrix; column `j` is the observation vector for year `t_j`.
    pub fn log_rates(&self) -> &DMatrix<f64> {
        &self.log_rates
    }

    pub fn get(&self, age: i32, year: i32) -> Option<f64> {
        let i = self.window.age_index(age)?;
        let j = self.window.year_index(year)?;
        Some(self.log_rates[(i, j)])
    }

    /// The block of this panel covering `window`, which must lie inside
    /// the panel's own window.
    pub fn restrict(&self, window: &AgeYearWindow) -> Result<DataPanel> {
        let corners = [
            (window.first_age(), window.first_year()),
            (window.last_age(), window.last_year()),
        ];
        for (age, year) in corners {
            if !self.window.contains(age, year) {
                return Err(Error::OutOfWindow { age, year });
            }
        }
        let i0 = self.window.age_index(window.first_age()).unwrap();
        let j0 = self.window.year_index(window.first_year()).unwrap();
        let block = self
            .log_rates
            .view((i0, j0), (window.n_ages(), window.n_years()))
            .into_owned();
        DataPanel::new(*window, block)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cohort_index_matches_grid_layout() {
        // ages 1..3, years 1..4 as in the small worked grid
        let w = AgeYearWindow::new(1..=3, 1..=4).unwrap();
        assert_eq!(w.cohort_index(2, 3).unwrap(), 1);
        assert_eq!(w.cohort_index(1, 1).unwrap(), 0);
        assert_eq!(w.cohort_index(3, 1).unwrap(), -2);
        assert_eq!(w.n_cohorts(), 6);
        assert_eq!(w.cohorts(), -2..=3);
        assert!(matches!(
            w.cohort_index(4, 1),
            Err(Error::OutOfWindow { age: 4, year: 1 })
        ));
        assert!(w.cohort_index(1, 5).is_err());
    }

    #[test]
    fn reference_window_cohorts() {
        let w = AgeYearWindow::reference();
        assert_eq!(w.n_ages(), 31);
        assert_eq!(w.n_years(), 41);
        assert_eq!(w.n_cohorts(), 71);
        assert_eq!(w.first_cohort(), 1875);
        assert_eq!(w.last_cohort(), 1945);
    }

    #[test]
    #[allow(clippy::reversed_empty_ranges)]
    fn rejects_degenerate_and_gapped_windows() {
        assert!(AgeYearWindow::new(65..=65, 1970..=1980).is_err());
        assert!(AgeYearWindow::new(65..=70, 1980..=1970).is_err());
        assert!(AgeYearWindow::from_lists(&[60, 61, 63], &[2000, 2001]).is_err());
        assert!(AgeYearWindow::from_lists(&[61, 60], &[2000, 2001]).is_err());
        let w = AgeYearWindow::from_lists(&[60, 61, 62], &[2000, 2001]).unwrap();
        assert_eq!(w.n_ages(), 3);
    }

    #[test]
    fn panel_checks_shape_and_finiteness() {
        let w = AgeYearWindow::new(0..=1, 0..=2).unwrap();
        assert!(DataPanel::new(w, DMatrix::zeros(2, 2)).is_err());
        let mut m = DMatrix::zeros(2, 3);
        m[(1, 2)] = f64::NAN;
        let err = DataPanel::new(w, m).unwrap_err().to_string();
        assert!(err.contains("age 1, year 2"), "{err}");
    }

    #[test]
    fn restrict_selects_the_block() {
        let w = AgeYearWindow::new(60..=63, 2000..=2004).unwrap();
        let panel = DataPanel::new(w, DMatrix::from_fn(4, 5, |i, j| (10 * i + j) as f64)).unwrap();
        let sub = AgeYearWindow::new(61..=62, 2002..=2004).unwrap();
        let r = panel.restrict(&sub).unwrap();
        assert_eq!(r.get(61, 2002), Some(12.0));
        assert_eq!(r.get(62, 2004), Some(24.0));
        assert_eq!(panel.restrict(&w).unwrap(), panel);
        let outside = AgeYearWindow::new(62..=64, 2000..=2001).unwrap();
        assert!(matches!(panel.restrict(&outside), Err(Error::OutOfWindow { age: 64, .. })));
    }

    #[test]
    fn window_serde_round_trip() {
        let w = AgeYearWindow::reference();
        let s = serde_json::to_string(&w).unwrap();
        assert_eq!(s, r#"{"ages":[65,95],"years":[1970,2010]}"#);
        let back: AgeYearWindow = serde_json::from_str(&s).unwrap();
        assert_eq!(back, w);
        assert!(serde_json::from_str::<AgeYearWindow>(r#"{"ages":[65,65],"years":[1,2]}"#).is_err());
    }
}
