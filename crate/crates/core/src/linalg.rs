//! Small dense linear-algebra helpers shared by the filter, the sampler and
//! the forecaster.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

/// Replaces `a` with `(a + a^T) / 2`.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Largest `|a_ij - a_ji|`.
pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Solves `a x = rhs` for symmetric positive semidefinite `a`.
///
/// Cholesky is tried first. If `a` is numerically singular, `1e-12` (scaled
/// by the largest diagonal entry) is added to the diagonal positions listed
/// in `regularize` and Cholesky is retried; as a last resort the system is
/// solved with the eigen-decomposition pseudo-inverse.
pub fn solve_psd(a: &DMatrix<f64>, rhs: &DMatrix<f64>, regularize: &[usize]) -> DMatrix<f64> {
    if let Some(chol) = a.clone().cholesky() {
        return chol.solve(rhs);
    }
    let scale = a.diagonal().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if !regularize.is_empty() {
        let mut reg = a.clone();
        for &k in regularize {
            reg[(k, k)] += 1e-12 * scale;
        }
        if let Some(chol) = reg.cholesky() {
            return chol.solve(rhs);
        }
    }
    pseudo_inverse_sym(a) * rhs
}

/// Moore-Penrose inverse of a symmetric matrix.
pub fn pseudo_inverse_sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = max * 1e-12 * a.nrows() as f64;
    let inv = eig
        .eigenvalues
        .map(|v| if v.abs() > tol { 1.0 / v } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// Returns a factor `l` with `l l^T = cov` for a positive semidefinite
/// covariance: the Cholesky factor when it exists, otherwise
/// `V sqrt(max(D, 0))` from the eigen-decomposition.
pub fn psd_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(chol) = cov.clone().cholesky() {
        return chol.l();
    }
    let eig = SymmetricEigen::new(cov.clone());
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

/// Draws from `N(mean, cov)`.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> DVector<f64> {
    let l = psd_factor(cov);
    let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    mean + l * z
}

/// Log-density of `N(mean, cov)` at `x`; `None` if `cov` is not positive
/// definite.
pub fn mvn_log_density(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Option<f64> {
    let chol = cov.clone().cholesky()?;
    let e = x - mean;
    let sol = chol.solve(&e);
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Some(-0.5 * (x.len() as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + e.dot(&sol)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solve_handles_singular_matrices() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let rhs = DMatrix::from_row_slice(2, 1, &[2.0, 0.0]);
        let x = solve_psd(&a, &rhs, &[]);
        assert!((x[(0, 0)] - 2.0).abs() < 1e-12);
        assert_eq!(x[(1, 0)], 0.0);
        let x = solve_psd(&a, &rhs, &[1]);
        assert!((x[(0, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_covariance_returns_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mean = DVector::from_column_slice(&[1.0, -2.0]);
        let draw = sample_mvn(&mean, &DMatrix::zeros(2, 2), &mut rng);
        assert_eq!(draw, mean);
    }

    #[test]
    fn rank_one_draws_stay_on_the_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        for _ in 0..100 {
            let d = sample_mvn(&DVector::zeros(2), &cov, &mut rng);
            assert!((d[0] - d[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn scalar_log_density() {
        let v = mvn_log_density(
            &DVector::from_element(1, 1.0),
            &DVector::zeros(1),
            &DMatrix::from_element(1, 1, 3.0),
        )
        .unwrap();
        let expected = -0.5 * ((2.0 * std::f64::consts::PI * 3.0).ln() + 1.0 / 3.0);
        assert!((v - expected).abs() < 1e-14);
    }
}
