use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Synthetic stand-ins for machine sounds. Every family is strongly
/// non-Gaussian: tones and sawtooths are sub-Gaussian, bursts and Laplacian
/// noise super-Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveformFamily {
    /// Cycles through the concrete families row by row.
    Mixed,
    AmTone,
    Sawtooth,
    Bursts,
    Laplacian,
}

impl WaveformFamily {
    pub const ALL: [WaveformFamily; 5] = [
        WaveformFamily::Mixed,
        WaveformFamily::AmTone,
        WaveformFamily::Sawtooth,
        WaveformFamily::Bursts,
        WaveformFamily::Laplacian,
    ];

    const CYCLE: [WaveformFamily; 4] = [
        WaveformFamily::AmTone,
        WaveformFamily::Sawtooth,
        WaveformFamily::Bursts,
        WaveformFamily::Laplacian,
    ];

    pub(crate) fn for_row(self, row: usize) -> WaveformFamily {
        match self {
            WaveformFamily::Mixed => Self::CYCLE[row % Self::CYCLE.len()],
            other => other,
        }
    }

    pub(crate) fn render<R: Rng>(self, m: usize, rate: u32, rng: &mut R) -> Vec<f64> {
        let fs = f64::from(rate);
        match self {
            WaveformFamily::Mixed => unreachable!("resolved by for_row"),
            WaveformFamily::AmTone => {
                let carrier = rng.random_range(180.0..2200.0) / fs;
                let modulator = rng.random_range(0.7..9.0) / fs;
                let depth = rng.random_range(0.4..0.8);
                let (p1, p2) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
                (0..m)
                    .map(|t| {
                        let t = t as f64;
                        (1.0 + depth * (TAU * modulator * t + p1).sin()) * (TAU * carrier * t + p2).sin()
                    })
                    .collect()
            }
            WaveformFamily::Sawtooth => {
                let period = rng.random_range(37.0..211.0);
                let phase = rng.random_range(0.0..1.0);
                (0..m)
                    .map(|t| {
                        let x = t as f64 / period + phase;
                        2.0 * (x - x.floor()) - 1.0
                    })
                    .collect()
            }
            WaveformFamily::Bursts => {
                // Sparse decaying noise bursts over a faint noise floor.
                let rate = rng.random_range(1.0 / 1200.0..1.0 / 400.0);
                let decay: f64 = rng.random_range(20.0..80.0);
                let mut envelope = 0.0f64;
                (0..m)
                    .map(|_| {
                        if rng.random::<f64>() < rate {
                            envelope = rng.random_range(0.5..1.0);
                        } else {
                            envelope *= (-1.0 / decay).exp();
                        }
                        let noise: f64 = StandardNormal.sample(rng);
                        let floor: f64 = StandardNormal.sample(rng);
                        envelope * noise + 0.01 * floor
                    })
                    .collect()
            }
            WaveformFamily::Laplacian => (0..m)
                .map(|_| {
                    // Inverse CDF of the unit-scale Laplace distribution.
                    let u: f64 = rng.random_range(-0.5..0.5);
                    -u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
                })
                .collect(),
        }
    }
}

impl fmt::Display for WaveformFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WaveformFamily::Mixed => "mixed",
            WaveformFamily::AmTone => "am-tone",
            WaveformFamily::Sawtooth => "sawtooth",
            WaveformFamily::Bursts => "bursts",
            WaveformFamily::Laplacian => "laplacian",
        })
    }
}

impl FromStr for WaveformFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WaveformFamily::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| format!("unknown waveform family `{s}`"))
    }
}
