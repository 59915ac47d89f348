//! Small dense helpers shared by the whitening and orthogonalization code.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// `M^{-1/2}` for a symmetric positive definite `M`, via its eigendecomposition.
pub fn inverse_sqrt_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("non-finite entries in W·Wᵀ".into()));
    }
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || min <= max * 1e-15 {
        return Err(Error::Numeric(format!(
            "W·Wᵀ is singular (eigenvalues in [{min:e}, {max:e}])"
        )));
    }
    let inv_sqrt = eig.eigenvalues.map(|d| 1.0 / d.sqrt());
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&inv_sqrt) * q.transpose())
}

/// Symmetric decorrelation `(W·Wᵀ)^{-1/2}·W`.
pub fn symmetric_decorrelation(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = w * w.transpose();
    Ok(inverse_sqrt_spd(&gram)? * w)
}

/// Seeded random orthonormal matrix: Q factor of a Gaussian draw, with the
/// column signs fixed so that diag(R) is positive.
pub fn random_orthonormal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let g: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let qr = g.qr();
        let r = qr.r();
        if (0..n).any(|i| r[(i, i)].abs() < 1e-10) {
            continue;
        }
        let mut q = qr.q();
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        return q;
    }
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}

/// ‖W·Wᵀ − I‖_F.
pub fn orthonormality_error(w: &DMatrix<f64>) -> f64 {
    let n = w.nrows();
    (w * w.transpose() - DMatrix::<f64>::identity(n, n)).norm()
}

/// Sample covariance (divided by the column count) of already-centered rows.
pub fn covariance(centered: &DMatrix<f64>) -> DMatrix<f64> {
    let p = centered.ncols() as f64;
    centered * centered.transpose() / p
}
