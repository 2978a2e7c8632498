//! Posterior predictive simulation of future factors and log death rates.
//!
//! For every stored draw the state equation is iterated `k` steps past the
//! end of the data and an observation is drawn at each step. Noise is drawn
//! only for coordinates with positive variance, so the shifted cohort
//! entries are copied exactly and the Lee-Carter model consumes the same
//! random numbers as a cohort model whose cohort variance is zero.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gibbs::{Draw, PosteriorChain};
use crate::model::{build_system, ModelSpec};
use crate::stats::{mean, quantile_sorted};

/// Central credible level of the forecast intervals.
pub const LEVEL: f64 = 0.95;

/// Simulated future of one posterior draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastDraw {
    /// `p x k`; column `j` is the log-rate vector in year `t_n + j + 1`.
    pub log_rates: DMatrix<f64>,
    /// `d x k` projected states.
    pub factors: DMatrix<f64>,
}

/// Cell-wise mean and equal-tailed 95% interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryGrid {
    pub mean: DMatrix<f64>,
    pub lower: DMatrix<f64>,
    pub upper: DMatrix<f64>,
}

impl SummaryGrid {
    /// Summarises `values(draw)`, each of the same shape.
    fn from_draws(n_draws: usize, shape: (usize, usize), values: impl Fn(usize, usize, usize) -> f64) -> Self {
        let (r, c) = shape;
        let mut grid = SummaryGrid {
            mean: DMatrix::zeros(r, c),
            lower: DMatrix::zeros(r, c),
            upper: DMatrix::zeros(r, c),
        };
        let tail = 0.5 * (1.0 - LEVEL);
        let mut cell = vec![0.0; n_draws];
        for i in 0..r {
            for j in 0..c {
                for (l, v) in cell.iter_mut().enumerate() {
                    *v = values(l, i, j);
                }
                grid.mean[(i, j)] = mean(&cell);
                cell.sort_by(f64::total_cmp);
                grid.lower[(i, j)] = quantile_sorted(&cell, tail);
                grid.upper[(i, j)] = quantile_sorted(&cell, 1.0 - tail);
            }
        }
        grid
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub spec: ModelSpec,
    pub horizon: usize,
    pub seed: u64,
    pub draws: Vec<ForecastDraw>,
    /// Summary of the log rates.
    pub log_rates: SummaryGrid,
    /// Summary of the rates `exp(y)`, computed draw by draw.
    pub rates: SummaryGrid,
}

impl ForecastResult {
    /// Forecast years `t_n + 1 ..= t_n + k`.
    pub fn years(&self) -> impl Iterator<Item = i32> + Clone {
        let last = self.spec.window.last_year();
        (1..=self.horizon as i32).map(move |j| last + j)
    }

    /// Per-draw rows `draw,year,age,logRate`.
    pub fn write_draws_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "draw,year,age,logRate")?;
        for (l, d) in self.draws.iter().enumerate() {
            for (j, year) in self.years().enumerate() {
                for (i, age) in self.spec.window.ages().enumerate() {
                    writeln!(w, "{l},{year},{age},{:?}", d.log_rates[(i, j)])?;
                }
            }
        }
        Ok(())
    }

    /// Summary rows `year,age,mean,q02.5,q97.5`; `rates` selects the rate
    /// scale instead of log rates.
    pub fn write_summary_csv<W: Write>(&self, mut w: W, rates: bool) -> std::io::Result<()> {
        let g = if rates { &self.rates } else { &self.log_rates };
        writeln!(w, "year,age,mean,q02.5,q97.5")?;
        for (j, year) in self.years().enumerate() {
            for (i, age) in self.spec.window.ages().enumerate() {
                writeln!(
                    w,
                    "{year},{age},{:?},{:?},{:?}",
                    g.mean[(i, j)],
                    g.lower[(i, j)],
                    g.upper[(i, j)]
                )?;
            }
        }
        Ok(())
    }

    /// Projected state coordinate `row` at forecast step `j` (1-based) of
    /// draw `l`.
    pub fn factor(&self, l: usize, row: usize, j: usize) -> f64 {
        self.draws[l].factors[(row, j - 1)]
    }

    /// Value of the cohort factor seen by `age` in forecast year `year`,
    /// for draw `l`, together with that cell's year of birth.
    pub fn cohort_factor_at(&self, l: usize, age: i32, year: i32) -> Result<(i32, f64)> {
        if !self.spec.kind.has_cohort() {
            return Err(Error::InvalidParameter("model has no cohort factor".into()));
        }
        let i = self
            .spec
            .window
            .age_index(age)
            .ok_or(Error::OutOfWindow { age, year })?;
        let j = year - self.spec.window.last_year();
        if j < 1 || j as usize > self.horizon {
            return Err(Error::OutOfWindow { age, year });
        }
        Ok((year - age, self.factor(l, i + 1, j as usize)))
    }
}

/// Projection of one factor with its 95% band.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorBand {
    /// Forecast year for the period factor, year of birth for cohorts.
    pub index: i32,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorProjection {
    pub kappa: Vec<FactorBand>,
    /// Cohorts `t_n - x1 + 1 ..= t_n - x1 + k`; empty for Lee-Carter.
    pub cohorts: Vec<FactorBand>,
}

impl FactorProjection {
    pub fn write_kappa_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_bands(w, "year", &self.kappa)
    }

    pub fn write_cohort_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_bands(w, "cohort", &self.cohorts)
    }
}

fn write_bands<W: Write>(mut w: W, key: &str, bands: &[FactorBand]) -> std::io::Result<()> {
    writeln!(w, "{key},mean,q02.5,q97.5")?;
    for b in bands {
        writeln!(w, "{},{:?},{:?},{:?}", b.index, b.mean, b.lower, b.upper)?;
    }
    Ok(())
}

fn band(index: i32, mut xs: Vec<f64>) -> FactorBand {
    let m = mean(&xs);
    xs.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - LEVEL);
    FactorBand {
        index,
        mean: m,
        lower: quantile_sorted(&xs, tail),
        upper: quantile_sorted(&xs, 1.0 - tail),
    }
}

/// Forecasts `k` years ahead with the chain's own seed.
pub fn forecast(chain: &PosteriorChain, k: usize) -> Result<ForecastResult> {
    forecast_seeded(chain, k, chain.config.seed)
}

/// Forecasts `k` years ahead; draw `l` uses its own stream of a generator
/// keyed on `(seed, k)`, so results do not depend on thread scheduling.
pub fn forecast_seeded(chain: &PosteriorChain, k: usize, seed: u64) -> Result<ForecastResult> {
    if k < 1 {
        return Err(Error::InvalidParameter("forecast horizon must be at least 1".into()));
    }
    if chain.is_empty() {
        return Err(Error::InvalidParameter("empty chain".into()));
    }
    let key = seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let draws: Vec<ForecastDraw> = chain
        .draws
        .par_iter()
        .enumerate()
        .map(|(l, d)| {
            let mut rng = ChaCha8Rng::seed_from_u64(key);
            rng.set_stream(l as u64);
            simulate_draw(&chain.spec, d, k, &mut rng)
        })
        .collect::<Result<_>>()?;

    let shape = (chain.spec.n_ages(), k);
    let log_rates = SummaryGrid::from_draws(draws.len(), shape, |l, i, j| draws[l].log_rates[(i, j)]);
    let rates = SummaryGrid::from_draws(draws.len(), shape, |l, i, j| draws[l].log_rates[(i, j)].exp());
    Ok(ForecastResult {
        spec: chain.spec,
        horizon: k,
        seed,
        draws,
        log_rates,
        rates,
    })
}

/// Iterates one draw's state equation `k` steps from its final state.
pub fn simulate_draw<R: Rng + ?Sized>(
    spec: &ModelSpec,
    draw: &Draw,
    k: usize,
    rng: &mut R,
) -> Result<ForecastDraw> {
    let sys = build_system(spec, &draw.params)?;
    let d = sys.state_dim();
    let p = sys.obs_dim();
    let sd: Vec<f64> = (0..d).map(|j| sys.trans_noise_cov[(j, j)].sqrt()).collect();
    let obs_sd = sys.obs_noise_var.sqrt();

    let mut phi: DVector<f64> = draw.path.state(draw.path.n_steps());
    let mut factors = DMatrix::zeros(d, k);
    let mut log_rates = DMatrix::zeros(p, k);
    for j in 0..k {
        let mut next = &sys.trans_matrix * &phi + &sys.trans_intercept;
        for (r, s) in sd.iter().enumerate() {
            if *s > 0.0 {
                next[r] += s * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let mut y = &sys.obs_intercept + &sys.obs_matrix * &next;
        if obs_sd > 0.0 {
            for v in y.iter_mut() {
                *v += obs_sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        factors.set_column(j, &next);
        log_rates.set_column(j, &y);
        phi = next;
    }
    Ok(ForecastDraw { log_rates, factors })
}

/// Exact mean and variance of `y_{n+j}` given one draw, `j = 1..=k`, by
/// propagating the state moments through the transition: both are `p x k`.
pub fn predictive_moments(spec: &ModelSpec, draw: &Draw, k: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let sys = build_system(spec, &draw.params)?;
    let (d, p) = (sys.state_dim(), sys.obs_dim());
    let mut m: DVector<f64> = draw.path.state(draw.path.n_steps());
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut means = DMatrix::zeros(p, k);
    let mut vars = DMatrix::zeros(p, k);
    for j in 0..k {
        m = &sys.trans_matrix * &m + &sys.trans_intercept;
        cov = &sys.trans_matrix * &cov * sys.trans_matrix.transpose() + &sys.trans_noise_cov;
        means.set_column(j, &(&sys.obs_intercept + &sys.obs_matrix * &m));
        let q = &sys.obs_matrix * &cov * sys.obs_matrix.transpose();
        for i in 0..p {
            vars[(i, j)] = q[(i, i)] + sys.obs_noise_var;
        }
    }
    Ok((means, vars))
}

/// Bands for the projected period factor and for the `k` cohorts born
/// after the last in-window cohort, each read from the youngest-age
/// coordinate in the year it first appears.
pub fn project_factors(result: &ForecastResult) -> FactorProjection {
    let n_draws = result.draws.len();
    let collect = |row: usize, j: usize| -> Vec<f64> { (0..n_draws).map(|l| result.factor(l, row, j)).collect() };
    let kappa = result
        .years()
        .enumerate()
        .map(|(j, year)| band(year, collect(0, j + 1)))
        .collect();
    let cohorts = if result.spec.kind.has_cohort() {
        let last = result.spec.window.last_cohort();
        (1..=result.horizon)
            .map(|j| band(last + j as i32, collect(1, j)))
            .collect()
    } else {
        Vec::new()
    };
    FactorProjection { kappa, cohorts }
}
