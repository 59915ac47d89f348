//! Source generation, WAV ingestion and the linear mixing model `X = A·S`.
//!
//! Rows are channels (sources or sensors), columns are time samples. All
//! samples are kept as `f64` regardless of the on-disk bit depth.

mod synth;
mod wav;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::condition_number;

pub use synth::WaveformFamily;
pub use wav::{list_wav_files, load_wav_dir, load_wav_sources, write_wav_pcm16};

/// Default sample rate attached to synthetic sources.
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Largest accepted 2-norm condition number of a generated mixing matrix.
pub const MAX_MIXING_CONDITION: f64 = 1e6;

/// Ground-truth (or estimated) source signals, one row per source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceMatrix {
    data: DMatrix<f64>,
    sample_rate: u32,
}

impl SourceMatrix {
    /// Validates `n ≥ 2`, `m ≥ n`, finite samples and nonzero variance on
    /// every row.
    pub fn new(data: DMatrix<f64>, sample_rate: u32) -> Result<Self> {
        let (n, m) = data.shape();
        if n < 2 {
            return Err(Error::Parameter(format!("need at least 2 sources, got {n}")));
        }
        if m < n {
            return Err(Error::Parameter(format!(
                "need at least as many samples as sources ({n}), got {m}"
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::Parameter("source samples must be finite".into()));
        }
        for (i, row) in data.row_iter().enumerate() {
            let mean = row.mean();
            if row.iter().all(|&v| v == mean) {
                return Err(Error::Degenerate(format!("source row {i} has zero variance")));
            }
        }
        Ok(Self { data, sample_rate })
    }

    /// Wraps a separation estimate. Estimates are not required to satisfy
    /// the ground-truth invariants (a single reconstructed column is valid).
    pub fn estimated(data: DMatrix<f64>, sample_rate: u32) -> Self {
        Self { data, sample_rate }
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn m(&self) -> usize {
        self.data.ncols()
    }

    /// Rows centered to zero mean and scaled to unit peak magnitude.
    pub fn normalized(&self) -> Self {
        let mut data = self.data.clone();
        for mut row in data.row_iter_mut() {
            let mean = row.mean();
            row.add_scalar_mut(-mean);
            let peak = row.amax();
            if peak > 0.0 {
                row /= peak;
            }
        }
        Self {
            data,
            sample_rate: self.sample_rate,
        }
    }
}

/// Observed sensor mixtures, one row per sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureMatrix {
    data: DMatrix<f64>,
}

impl MixtureMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Parameter("mixture matrix must be non-empty".into()));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn m(&self) -> usize {
        self.data.ncols()
    }
}

/// Square mixing operator `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    data: DMatrix<f64>,
}

impl MixingMatrix {
    /// Accepts any square matrix with at least two rows; invertibility is
    /// only guaranteed for matrices produced by [`generate_mixing_matrix`].
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if !data.is_square() || data.nrows() < 2 {
            return Err(Error::shape(
                "square matrix with n ≥ 2",
                format!("{}×{}", data.nrows(), data.ncols()),
            ));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn condition_number(&self) -> f64 {
        condition_number(&self.data)
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        self.data
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numeric("mixing matrix is singular".into()))
    }
}

/// `n` independent non-Gaussian rows of length `m`, centered and scaled to
/// unit peak. Deterministic per `seed`.
pub fn generate_sources(
    n: usize,
    m: usize,
    seed: u64,
    kind: WaveformFamily,
) -> Result<SourceMatrix> {
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 sources, got {n}")));
    }
    if m < n {
        return Err(Error::Parameter(format!(
            "sample count {m} is smaller than source count {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = DMatrix::zeros(n, m);
    for i in 0..n {
        let family = kind.for_row(i);
        let row = family.render(m, DEFAULT_SAMPLE_RATE, &mut rng);
        data.row_mut(i).copy_from_slice(&row);
    }
    SourceMatrix::new(data, DEFAULT_SAMPLE_RATE).map(|s| s.normalized())
}

/// Standard-normal `n×n` matrix, redrawn until its condition number is at
/// most [`MAX_MIXING_CONDITION`].
pub fn generate_mixing_matrix(n: usize, seed: u64) -> Result<MixingMatrix> {
    if n < 2 {
        return Err(Error::Parameter(format!("mixing matrix needs n ≥ 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let a: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        if condition_number(&a) <= MAX_MIXING_CONDITION {
            return MixingMatrix::new(a);
        }
    }
}

/// `X = A·S`.
pub fn mix(a: &MixingMatrix, s: &SourceMatrix) -> Result<MixtureMatrix> {
    if a.n() != s.n() {
        return Err(Error::shape(
            format!("sources with {} rows", a.n()),
            format!("{} rows", s.n()),
        ));
    }
    MixtureMatrix::new(a.data() * s.data())
}

/// Description of where a trial's sources come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub m: usize,
    pub kind: WaveformFamily,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 4,
            m: 160_000,
            kind: WaveformFamily::Mixed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn generated_sources_are_uncorrelated() {
        let s = generate_sources(4, 160_000, 7, WaveformFamily::Mixed).unwrap();
        assert_eq!(s.data().shape(), (4, 160_000));
        let rows: Vec<Vec<f64>> = s.data().row_iter().map(|r| r.iter().copied().collect()).collect();
        for row in &rows {
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            assert!(mean.abs() < 1e-12);
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                let rho = correlation(&rows[i], &rows[j]);
                assert!(rho.abs() < 0.1, "rows {i},{j} correlate: {rho}");
            }
        }
    }

    #[test]
    fn generated_sources_minimum_size() {
        for kind in WaveformFamily::ALL {
            let s = generate_sources(2, 2, 0, kind).unwrap();
            assert_eq!(s.data().shape(), (2, 2));
        }
    }

    #[test]
    fn generated_sources_reject_single_row() {
        assert!(matches!(
            generate_sources(1, 100, 0, WaveformFamily::Mixed),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            generate_sources(4, 3, 0, WaveformFamily::Mixed),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn generated_sources_are_bit_reproducible() {
        let a = generate_sources(3, 5000, 99, WaveformFamily::Mixed).unwrap();
        let b = generate_sources(3, 5000, 99, WaveformFamily::Mixed).unwrap();
        let c = generate_sources(3, 5000, 100, WaveformFamily::Mixed).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn generated_sources_are_non_gaussian() {
        let s = generate_sources(4, 50_000, 3, WaveformFamily::Mixed).unwrap();
        for row in s.data().row_iter() {
            let n = row.len() as f64;
            let var = row.iter().map(|v| v * v).sum::<f64>() / n;
            let m4 = row.iter().map(|v| v.powi(4)).sum::<f64>() / n;
            let excess = m4 / (var * var) - 3.0;
            assert!(excess.abs() > 0.3, "row too Gaussian: excess kurtosis {excess}");
        }
    }

    #[test]
    fn mixing_matrix_is_well_conditioned() {
        let a = generate_mixing_matrix(4, 1).unwrap();
        assert_eq!(a.data().shape(), (4, 4));
        assert!(a.condition_number() <= MAX_MIXING_CONDITION);
        assert!(a.inverse().is_ok());
    }

    #[test]
    fn mixing_matrix_is_seeded() {
        assert_eq!(generate_mixing_matrix(2, 5).unwrap(), generate_mixing_matrix(2, 5).unwrap());
        let draws: Vec<_> = (0..10).map(|s| generate_mixing_matrix(2, s).unwrap()).collect();
        for i in 0..draws.len() {
            for j in (i + 1)..draws.len() {
                assert_ne!(draws[i], draws[j]);
            }
        }
        assert!(generate_mixing_matrix(1, 0).is_err());
    }

    #[test]
    fn mix_identity_and_scaling() {
        let s = generate_sources(3, 50, 4, WaveformFamily::Mixed).unwrap();
        let eye = MixingMatrix::new(DMatrix::identity(3, 3)).unwrap();
        assert_eq!(mix(&eye, &s).unwrap().data(), s.data());
        let two = MixingMatrix::new(DMatrix::identity(3, 3) * 2.0).unwrap();
        let x = mix(&two, &s).unwrap();
        for (a, b) in x.data().iter().zip(s.data().iter()) {
            assert_eq!(*a, 2.0 * b);
        }
    }

    #[test]
    fn mix_matches_triple_loop() {
        let a = generate_mixing_matrix(3, 21).unwrap();
        let s = generate_sources(3, 5, 22, WaveformFamily::Mixed).unwrap();
        let x = mix(&a, &s).unwrap();
        for r in 0..3 {
            for c in 0..5 {
                let mut acc = 0.0;
                for i in 0..3 {
                    acc += a.data()[(r, i)] * s.data()[(i, c)];
                }
                assert!((x.data()[(r, c)] - acc).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mix_rejects_shape_mismatch() {
        let a = generate_mixing_matrix(3, 1).unwrap();
        let s = generate_sources(2, 10, 1, WaveformFamily::Mixed).unwrap();
        assert!(matches!(mix(&a, &s), Err(Error::Shape { .. })));
    }

    #[test]
    fn unmixing_round_trip() {
        let s = generate_sources(4, 2000, 8, WaveformFamily::Mixed).unwrap();
        let mut seed = 0;
        let a = loop {
            let a = generate_mixing_matrix(4, seed).unwrap();
            if a.condition_number() <= 1e3 {
                break a;
            }
            seed += 1;
        };
        let x = mix(&a, &s).unwrap();
        let back = a.inverse().unwrap() * x.data();
        let rel = (&back - s.data()).norm() / s.data().norm();
        assert!(rel < 1e-8, "relative error {rel}");
    }

    #[test]
    fn source_matrix_rejects_silent_row() {
        let mut d = DMatrix::from_fn(2, 10, |_, c| c as f64);
        d.row_mut(1).fill(0.25);
        assert!(matches!(SourceMatrix::new(d, 16_000), Err(Error::Degenerate(_))));
    }
}
