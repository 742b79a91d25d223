//! Symmetric (parallel) FastICA with the log-cosh contrast.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct IcaFit {
    /// Unmixing matrix applied to centered observations: `s = unmixing * (x - mean)`.
    pub unmixing: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs FastICA on `columns` (one slice per variable, all the same length).
///
/// On non-convergence the last iterate is returned with `converged == false`.
pub fn fast_ica<R: Rng>(columns: &[&[f64]], max_iter: usize, tol: f64, rng: &mut R) -> Result<IcaFit> {
    let p = columns.len();
    let n = columns.first().map_or(0, |c| c.len());
    if p == 0 || n < 2 {
        return Err(Error::InvalidArgument("ICA needs at least one variable and two rows".into()));
    }

    // centered data, p x n
    let mut x = DMatrix::zeros(p, n);
    for (i, col) in columns.iter().enumerate() {
        let m = col.iter().sum::<f64>() / n as f64;
        for (t, v) in col.iter().enumerate() {
            x[(i, t)] = v - m;
        }
    }

    let cov = (&x * x.transpose()) / n as f64;
    let eig = SymmetricEigen::new(cov);
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if eig.eigenvalues.iter().any(|&l| !(l > max_ev * 1e-12)) {
        return Err(Error::Numerical("covariance matrix is singular; variables are collinear".into()));
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let whitening = inv_sqrt * eig.eigenvectors.transpose();
    let z = &whitening * &x;

    let init = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut w = symmetric_decorrelation(&init)?;

    let mut converged = false;
    let mut iterations = 0;
    let mut gz = DMatrix::zeros(p, n);
    for it in 0..max_iter {
        iterations = it + 1;
        let y = &w * &z;
        let mut mean_dg = DVector::zeros(p);
        for k in 0..p {
            let mut acc = 0.0;
            for t in 0..n {
                let g = y[(k, t)].tanh();
                gz[(k, t)] = g;
                acc += 1.0 - g * g;
            }
            mean_dg[k] = acc / n as f64;
        }
        let mut next = (&gz * z.transpose()) / n as f64;
        for k in 0..p {
            for j in 0..p {
                next[(k, j)] -= mean_dg[k] * w[(k, j)];
            }
        }
        let next = symmetric_decorrelation(&next)?;
        let lim = (0..p)
            .map(|k| (next.row(k).dot(&w.row(k)).abs() - 1.0).abs())
            .fold(0.0, f64::max);
        w = next;
        if lim < tol {
            converged = true;
            break;
        }
    }

    Ok(IcaFit { unmixing: w * whitening, iterations, converged })
}

/// `W <- (W W^T)^{-1/2} W`
fn symmetric_decorrelation(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(w * w.transpose());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Numerical("ICA iterate became rank deficient".into()));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose() * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn recovers_mixed_uniform_sources() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4000;
        let s1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s2: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x1: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| a + 0.5 * b).collect();
        let x2: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| 0.3 * a + b).collect();
        let fit = fast_ica(&[&x1, &x2], 1000, 1e-8, &mut rng).unwrap();
        assert!(fit.converged);

        // unmixing * mixing should be a scaled permutation
        let mixing = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.3, 1.0]);
        let prod = &fit.unmixing * mixing;
        for r in 0..2 {
            let (a, b) = (prod[(r, 0)].abs(), prod[(r, 1)].abs());
            let ratio = a.min(b) / a.max(b);
            assert!(ratio < 0.05, "row {r} not separated: {prod}");
        }
    }

    #[test]
    fn collinear_input_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        assert!(fast_ica(&[&a, &b], 100, 1e-6, &mut rng).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Vec<f64> = (0..500).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..500).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fit = fast_ica(&[&a, &b], 1, 1e-15, &mut rng).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
    }
}
