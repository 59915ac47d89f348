//! Scoring of separations against ground truth.
//!
//! ICA recovers sources only up to order and scale, so every score starts by
//! matching estimated rows to true rows.

use itertools::Itertools;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{MixingMatrix, SourceMatrix};

/// Largest row count accepted by the exhaustive permutation search.
pub const MAX_ALIGN_ROWS: usize = 8;

/// Score reported for a residual-free reconstruction.
pub const SDR_CAP_DB: f64 = 100.0;

/// `permutation[i]` is the estimated row matched to true row `i`;
/// `scales[i]` maps that estimated row onto true row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub permutation: Vec<usize>,
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdrScore {
    pub per_source: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub mean: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub count: usize,
}

/// Permutation maximizing `Σ_i score[(i, perm[i])]`, by exhaustive search.
fn best_permutation(score: &DMatrix<f64>) -> Vec<usize> {
    let n = score.nrows();
    let mut best = (f64::NEG_INFINITY, (0..n).collect::<Vec<_>>());
    for perm in (0..n).permutations(n) {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| score[(i, j)]).sum();
        if total > best.0 {
            best = (total, perm);
        }
    }
    best.1
}

fn centered_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter()
        .map(|r| {
            let mean = r.mean();
            r.iter().map(|v| v - mean).collect()
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_pair(s_hat: &SourceMatrix, s_truth: &SourceMatrix) -> Result<()> {
    if s_hat.data().shape() != s_truth.data().shape() {
        let (a, b) = s_truth.data().shape();
        let (c, d) = s_hat.data().shape();
        return Err(Error::shape(format!("{a}×{b}"), format!("{c}×{d}")));
    }
    if s_truth.n() > MAX_ALIGN_ROWS {
        return Err(Error::Parameter(format!(
            "alignment supports at most {MAX_ALIGN_ROWS} sources, got {}",
            s_truth.n()
        )));
    }
    Ok(())
}

/// Matches rows by maximal total absolute correlation, then fits a
/// least-squares scale per matched pair.
pub fn align(s_hat: &SourceMatrix, s_truth: &SourceMatrix) -> Result<Alignment> {
    check_pair(s_hat, s_truth)?;
    let n = s_truth.n();
    let truth = centered_rows(s_truth.data());
    let est = centered_rows(s_hat.data());
    let norms = |rows: &[Vec<f64>], what: &str| -> Result<Vec<f64>> {
        rows.iter()
            .enumerate()
            .map(|(i, r)| {
                let nrm = dot(r, r).sqrt();
                if nrm > 0.0 {
                    Ok(nrm)
                } else {
                    Err(Error::Degenerate(format!("{what} row {i} has zero variance")))
                }
            })
            .collect()
    };
    let truth_norm = norms(&truth, "true source")?;
    let est_norm = norms(&est, "estimated source")?;
    let corr = DMatrix::from_fn(n, n, |i, j| {
        (dot(&truth[i], &est[j]) / (truth_norm[i] * est_norm[j])).abs()
    });
    let permutation = best_permutation(&corr);
    let scales = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let t = s_truth.data().row(i);
            let e = s_hat.data().row(j);
            t.dot(&e) / e.dot(&e)
        })
        .collect();
    Ok(Alignment { permutation, scales })
}

/// Total-residual signal-to-distortion ratio per source, in dB, after
/// alignment. Capped at [`SDR_CAP_DB`].
pub fn sdr(s_hat: &SourceMatrix, s_truth: &SourceMatrix) -> Result<SdrScore> {
    let alignment = align(s_hat, s_truth)?;
    let per_source: Vec<f64> = alignment
        .permutation
        .iter()
        .zip(&alignment.scales)
        .enumerate()
        .map(|(i, (&j, &scale))| {
            let t = s_truth.data().row(i);
            let e = s_hat.data().row(j);
            let signal = t.norm_squared();
            let residual: f64 = t
                .iter()
                .zip(e.iter())
                .map(|(a, b)| (a - scale * b).powi(2))
                .sum();
            if residual <= 0.0 {
                SDR_CAP_DB
            } else {
                (10.0 * (signal / residual).log10()).min(SDR_CAP_DB)
            }
        })
        .collect();
    let mean = per_source.iter().sum::<f64>() / per_source.len() as f64;
    Ok(SdrScore { per_source, mean })
}

fn normalize_rows(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        let nrm = row.norm();
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(Error::Degenerate(format!("unmixing row {i} has zero norm")));
        }
        row /= nrm;
    }
    Ok(out)
}

/// `1 − ⟨P, Q⟩_F / (‖P‖_F·‖Q‖_F)` for matrices that are already aligned.
pub fn frobenius_cosine_distance(p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    1.0 - p.dot(q) / (p.norm() * q.norm())
}

/// Distance between an effective unmixing `W·V` and the true `A⁻¹`.
///
/// Rows of both matrices are scaled to unit norm (ICA fixes no row scale),
/// the rows of `W·V` are permuted and sign-flipped to best match `A⁻¹`, and
/// the Frobenius cosine distance of the result is returned. 0 means
/// identical up to the ICA ambiguities.
pub fn cosine_distance(w_effective: &DMatrix<f64>, a: &MixingMatrix) -> Result<f64> {
    let n = a.n();
    if w_effective.shape() != (n, n) {
        return Err(Error::shape(
            format!("{n}×{n}"),
            format!("{}×{}", w_effective.nrows(), w_effective.ncols()),
        ));
    }
    if n > MAX_ALIGN_ROWS {
        return Err(Error::Parameter(format!(
            "alignment supports at most {MAX_ALIGN_ROWS} rows, got {n}"
        )));
    }
    let target = normalize_rows(&a.inverse()?)?;
    let w = normalize_rows(w_effective)?;
    let score = DMatrix::from_fn(n, n, |i, j| target.row(i).dot(&w.row(j)).abs());
    let perm = best_permutation(&score);
    let mut aligned = DMatrix::zeros(n, n);
    for (i, &j) in perm.iter().enumerate() {
        let sign = if target.row(i).dot(&w.row(j)) < 0.0 { -1.0 } else { 1.0 };
        aligned.row_mut(i).copy_from(&(w.row(j) * sign));
    }
    Ok(frobenius_cosine_distance(&aligned, &target).max(0.0))
}

/// Mean with a normal-approximation 95% interval (`±1.96·s/√n`).
pub fn summarize(values: &[f64]) -> Result<ScoreSummary> {
    if values.is_empty() {
        return Err(Error::Parameter("cannot summarize an empty list".into()));
    }
    let count = values.len();
    let mean = values.iter().sum::<f64>() / count as f64;
    let half = if count == 1 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        1.96 * (var / count as f64).sqrt()
    };
    Ok(ScoreSummary {
        mean,
        ci95_low: mean - half,
        ci95_high: mean + half,
        count,
    })
}
