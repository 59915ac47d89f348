//! Centering/whitening, the symmetric FastICA fixed-point step and the
//! centralized FastICA baseline.
//!
//! Separation matrices act on *whitened* data; the composite unmixing
//! applied to raw mixtures is `W·V` after subtracting the channel means.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{covariance, random_orthonormal, symmetric_decorrelation};
use crate::signal::{MixtureMatrix, SourceMatrix, DEFAULT_SAMPLE_RATE};

pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 200;

/// Eigenvalues below this fraction of the largest mark a rank-deficient
/// covariance.
const RANK_TOLERANCE: f64 = 1e-12;

/// Per-channel mean plus sphering matrix `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningTransform {
    mean: DVector<f64>,
    sphering: DMatrix<f64>,
}

impl WhiteningTransform {
    pub fn new(mean: DVector<f64>, sphering: DMatrix<f64>) -> Result<Self> {
        if !sphering.is_square() || sphering.nrows() != mean.len() {
            return Err(Error::shape(
                format!("{n}×{n} sphering matrix", n = mean.len()),
                format!("{}×{}", sphering.nrows(), sphering.ncols()),
            ));
        }
        Ok(Self { mean, sphering })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mean: DVector::zeros(n),
            sphering: DMatrix::identity(n, n),
        }
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn sphering(&self) -> &DMatrix<f64> {
        &self.sphering
    }

    pub fn n(&self) -> usize {
        self.mean.len()
    }
}

/// Orthonormal `n×n` unmixing matrix in the whitened space.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationMatrix(DMatrix<f64>);

impl SeparationMatrix {
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::shape(
                "square separation matrix",
                format!("{}×{}", w.nrows(), w.ncols()),
            ));
        }
        Ok(Self(w))
    }

    /// Deterministic random orthonormal starting point.
    pub fn seeded(n: usize, seed: u64) -> Self {
        Self(random_orthonormal(n, seed))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    /// Composite unmixing `W·V` acting on centered raw mixtures.
    pub fn effective(&self, whitening: &WhiteningTransform) -> DMatrix<f64> {
        &self.0 * whitening.sphering()
    }
}

/// Re-expresses `W` (acting on data whitened by `from`) in the basis of `to`,
/// preserving the effective unmixing `W·V` up to re-orthonormalization:
/// `W' = orth(W·V_from·V_to⁻¹)`.
pub fn rebase(
    w: &SeparationMatrix,
    from: &WhiteningTransform,
    to: &WhiteningTransform,
) -> Result<SeparationMatrix> {
    if from.n() != w.n() || to.n() != w.n() {
        return Err(Error::shape(
            format!("whitening transforms of size {}", w.n()),
            format!("{} and {}", from.n(), to.n()),
        ));
    }
    let to_inv = to
        .sphering()
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numeric("sphering matrix is singular".into()))?;
    let carried = w.effective(from) * to_inv;
    Ok(SeparationMatrix(symmetric_decorrelation(&carried)?))
}

/// `Δ = W_new·W_prevᵀ − I` and its sign-invariant scalar reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationDelta {
    pub delta: DMatrix<f64>,
    pub scalar: f64,
}

pub fn fit_whitening(x: &MixtureMatrix) -> Result<WhiteningTransform> {
    let data = x.data();
    if !data.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("mixture contains non-finite samples".into()));
    }
    let mean = data.column_mean();
    let mut centered = data.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let eig = SymmetricEigen::new(covariance(&centered));
    let largest = eig.eigenvalues.max();
    let smallest = eig.eigenvalues.min();
    if !(largest > 0.0) || smallest < RANK_TOLERANCE * largest {
        return Err(Error::Degenerate(format!(
            "covariance is rank deficient (eigenvalues in [{smallest:e}, {largest:e}])"
        )));
    }
    let scale = eig.eigenvalues.map(|d| 1.0 / d.sqrt());
    let sphering = DMatrix::from_diagonal(&scale) * eig.eigenvectors.transpose();
    WhiteningTransform::new(mean, sphering)
}

/// `V·(X − mean)` with the mean broadcast over columns.
pub fn apply_whitening(t: &WhiteningTransform, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != t.n() || x.ncols() == 0 {
        return Err(Error::shape(
            format!("{}×p matrix with p ≥ 1", t.n()),
            format!("{}×{}", x.nrows(), x.ncols()),
        ));
    }
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        col -= t.mean();
    }
    Ok(t.sphering() * centered)
}

/// One symmetric fixed-point update with `g = tanh`:
/// `W⁺ = E[g(WZ)·Zᵀ] − diag(E[g′(WZ)])·W`, then `(W⁺W⁺ᵀ)^{-1/2}·W⁺`.
pub fn newton_step(
    z: &DMatrix<f64>,
    w_prev: &SeparationMatrix,
) -> Result<(SeparationMatrix, IterationDelta)> {
    let n = w_prev.n();
    let p = z.ncols();
    if z.nrows() != n {
        return Err(Error::shape(
            format!("{n}×p whitened data"),
            format!("{}×{}", z.nrows(), p),
        ));
    }
    if p < n {
        return Err(Error::Parameter(format!(
            "newton step needs at least {n} columns, got {p}"
        )));
    }
    if !z.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("whitened data contains non-finite values".into()));
    }

    // Row-major copy of W so each projection reads contiguous memory.
    let w = w_prev.matrix();
    let w_rows: Vec<f64> = (0..n).flat_map(|i| w.row(i).iter().copied().collect::<Vec<_>>()).collect();
    let mut g_zt = vec![0.0; n * n];
    let mut g_prime = vec![0.0; n];
    let mut g = vec![0.0; n];
    for col in z.as_slice().chunks_exact(n) {
        for i in 0..n {
            let wi = &w_rows[i * n..(i + 1) * n];
            let y: f64 = wi.iter().zip(col).map(|(a, b)| a * b).sum();
            let t = y.tanh();
            g[i] = t;
            g_prime[i] += 1.0 - t * t;
        }
        for i in 0..n {
            let gi = g[i];
            let acc = &mut g_zt[i * n..(i + 1) * n];
            for (a, zj) in acc.iter_mut().zip(col) {
                *a += gi * zj;
            }
        }
    }

    let inv_p = 1.0 / p as f64;
    let raw = DMatrix::from_fn(n, n, |i, j| {
        g_zt[i * n + j] * inv_p - g_prime[i] * inv_p * w[(i, j)]
    });
    let w_new = symmetric_decorrelation(&raw)?;
    let delta = &w_new * w.transpose() - DMatrix::<f64>::identity(n, n);
    let scalar = diagonal_scalar(&delta);
    Ok((
        SeparationMatrix(w_new),
        IterationDelta { delta, scalar },
    ))
}

/// max_i | |(W_new·W_prevᵀ)_ii| − 1 |.
pub fn convergence_scalar(w_new: &SeparationMatrix, w_prev: &SeparationMatrix) -> f64 {
    let n = w_new.n();
    diagonal_scalar(&(w_new.matrix() * w_prev.matrix().transpose() - DMatrix::<f64>::identity(n, n)))
}

fn diagonal_scalar(delta: &DMatrix<f64>) -> f64 {
    delta
        .diagonal()
        .iter()
        .map(|d| ((d + 1.0).abs() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Result of iterating Newton steps on a fixed data matrix.
#[derive(Debug, Clone)]
pub(crate) struct Iterated {
    pub w: SeparationMatrix,
    pub iterations: usize,
    pub last_scalar: f64,
    pub converged: bool,
}

/// Newton steps from `w0` until the scalar drops below `tol` or `cap` steps
/// have run. Shared by the baseline and the chain's final node so that both
/// follow the exact same arithmetic.
pub(crate) fn iterate_until_converged(
    z: &DMatrix<f64>,
    w0: SeparationMatrix,
    tol: f64,
    cap: usize,
) -> Result<Iterated> {
    let mut w = w0;
    let mut last_scalar = f64::INFINITY;
    for it in 1..=cap {
        let (next, delta) = newton_step(z, &w)?;
        w = next;
        last_scalar = delta.scalar;
        if delta.scalar < tol {
            return Ok(Iterated {
                w,
                iterations: it,
                last_scalar,
                converged: true,
            });
        }
    }
    Ok(Iterated {
        w,
        iterations: cap,
        last_scalar,
        converged: false,
    })
}

/// Outcome of a centralized FastICA run.
#[derive(Debug, Clone)]
pub struct FastIcaFit {
    pub whitening: WhiteningTransform,
    pub separation: SeparationMatrix,
    pub iterations: usize,
    pub final_scalar: f64,
}

impl FastIcaFit {
    /// Hitting `max_iter` is reported through the count, not as an error.
    pub fn converged(&self, tol: f64) -> bool {
        self.final_scalar < tol
    }
}

/// Whitens the full data, starts from the seeded orthonormal matrix and
/// iterates [`newton_step`] until the convergence scalar is below `tol`.
pub fn fastica(x: &MixtureMatrix, tol: f64, max_iter: usize, seed: u64) -> Result<FastIcaFit> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tol must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::Parameter("max_iter must be at least 1".into()));
    }
    let whitening = fit_whitening(x)?;
    let z = apply_whitening(&whitening, x.data())?;
    let run = iterate_until_converged(&z, SeparationMatrix::seeded(x.n(), seed), tol, max_iter)?;
    Ok(FastIcaFit {
        whitening,
        separation: run.w,
        iterations: run.iterations,
        final_scalar: run.last_scalar,
    })
}

/// `Ŝ = W·V·(X − mean)` over every column of `X`.
pub fn reconstruct(
    w: &SeparationMatrix,
    t: &WhiteningTransform,
    x: &MixtureMatrix,
) -> Result<SourceMatrix> {
    if w.n() != t.n() {
        return Err(Error::shape(
            format!("{n}×{n} separation matrix", n = t.n()),
            format!("{n}×{n}", n = w.n()),
        ));
    }
    let z = apply_whitening(t, x.data())?;
    Ok(SourceMatrix::estimated(w.matrix() * z, DEFAULT_SAMPLE_RATE))
}
