//! Experiment configuration: JSON file, command-line flags, and the merge.
//!
//! File keys match the long flag names (`"p-break"`, `"wav-dir"`, ...).
//! List-valued flags take arrays in the file. Flags override file values;
//! anything left unset falls back to the defaults below.

use std::path::{Path, PathBuf};

use pica_core::netsim::{ChainConfig, DatasetSpec, Method};
use pica_core::pica::PicaParams;
use pica_core::signal::{SyntheticSpec, WaveformFamily};
use serde::Deserialize;
use thiserror::Error;

pub const THREADS_ENV: &str = "PICA_THREADS";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Unreadable { path: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Raw, partially specified settings, as found in a config file or on the
/// command line.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Overrides {
    pub method: Option<Vec<Method>>,
    pub nodes: Option<Vec<usize>>,
    pub mu0: Option<Vec<f64>>,
    pub alpha0: Option<f64>,
    pub tol: Option<f64>,
    pub p_break: Option<f64>,
    pub max_iter: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub synthetic: Option<bool>,
    pub wav_dir: Option<PathBuf>,
    pub samples: Option<usize>,
    pub link_delay: Option<f64>,
    pub out: Option<PathBuf>,
    pub emit_figures: Option<bool>,
}

impl Overrides {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let unreadable = |reason: String| ConfigError::Unreadable {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| unreadable(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| unreadable(e.to_string()))
    }

    /// `self` wins wherever it is set.
    pub fn over(self, base: Overrides) -> Overrides {
        // A source chosen on the command line replaces the file's choice.
        let (synthetic, wav_dir) = if self.synthetic == Some(true) {
            (Some(true), None)
        } else if self.wav_dir.is_some() {
            (None, self.wav_dir)
        } else {
            (self.synthetic.or(base.synthetic), base.wav_dir)
        };
        Overrides {
            method: self.method.or(base.method),
            nodes: self.nodes.or(base.nodes),
            mu0: self.mu0.or(base.mu0),
            alpha0: self.alpha0.or(base.alpha0),
            tol: self.tol.or(base.tol),
            p_break: self.p_break.or(base.p_break),
            max_iter: self.max_iter.or(base.max_iter),
            trials: self.trials.or(base.trials),
            seed: self.seed.or(base.seed),
            synthetic,
            wav_dir,
            samples: self.samples.or(base.samples),
            link_delay: self.link_delay.or(base.link_delay),
            out: self.out.or(base.out),
            emit_figures: self.emit_figures.or(base.emit_figures),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Synthetic { samples: usize },
    WavDir(PathBuf),
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub nodes: Vec<usize>,
    pub mu0: Vec<f64>,
    pub alpha0: f64,
    pub tol: f64,
    pub p_break: f64,
    pub max_iter: usize,
    pub trials: usize,
    pub seed: u64,
    pub source: SourceSpec,
    pub link_delay: f64,
    pub out: PathBuf,
    pub emit_figures: bool,
    /// Worker cap from the environment; `None` lets the pool decide.
    pub threads: Option<usize>,
}

pub const DEFAULT_NODES: [usize; 5] = [0, 3, 7, 10, 15];
pub const DEFAULT_MU0: f64 = 4130.0;
pub const DEFAULT_TRIALS: usize = 50;
pub const DEFAULT_SAMPLES: usize = 160_000;
pub const DEFAULT_OUT: &str = "results.csv";

impl ExperimentConfig {
    pub fn resolve(o: Overrides, threads_env: Option<&str>) -> Result<Self, ConfigError> {
        let defaults = PicaParams::default();
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));

        let source = match (o.wav_dir, o.synthetic) {
            (Some(_), Some(true)) => return invalid("choose either synthetic or wav-dir".into()),
            (Some(dir), _) => SourceSpec::WavDir(dir),
            (None, _) => SourceSpec::Synthetic {
                samples: o.samples.unwrap_or(DEFAULT_SAMPLES),
            },
        };
        let threads = match threads_env.map(str::trim).filter(|s| !s.is_empty()) {
            None => None,
            Some(v) => match v.parse::<usize>() {
                Ok(n) if n > 0 => Some(n),
                _ => return invalid(format!("{THREADS_ENV} must be a positive integer, got `{v}`")),
            },
        };

        let mut methods = Vec::new();
        for m in o.method.unwrap_or_else(|| vec![Method::Pica, Method::Fastica]) {
            if !methods.contains(&m) {
                methods.push(m);
            }
        }
        let cfg = ExperimentConfig {
            methods,
            nodes: o.nodes.unwrap_or_else(|| DEFAULT_NODES.to_vec()),
            mu0: o.mu0.unwrap_or_else(|| vec![DEFAULT_MU0]),
            alpha0: o.alpha0.unwrap_or(defaults.alpha0),
            tol: o.tol.unwrap_or(defaults.tol),
            p_break: o.p_break.unwrap_or(defaults.grad_threshold),
            max_iter: o.max_iter.unwrap_or(defaults.max_local_iter),
            trials: o.trials.unwrap_or(DEFAULT_TRIALS),
            seed: o.seed.unwrap_or(0),
            source,
            link_delay: o.link_delay.unwrap_or(0.0),
            out: o.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            emit_figures: o.emit_figures.unwrap_or(false),
            threads,
        };
        if cfg.methods.is_empty() || cfg.nodes.is_empty() || cfg.mu0.is_empty() {
            return invalid("method, nodes and mu0 lists must be non-empty".into());
        }
        if cfg.trials == 0 {
            return invalid("trials must be at least 1".into());
        }
        for chain in cfg.grid() {
            chain
                .validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(cfg)
    }

    fn params(&self, mu0: f64) -> PicaParams {
        PicaParams {
            tol: self.tol,
            grad_threshold: self.p_break,
            max_local_iter: self.max_iter,
            mu0,
            alpha0: self.alpha0,
        }
    }

    /// Every (k, μ0) combination, nodes-major.
    pub fn grid(&self) -> Vec<ChainConfig> {
        self.nodes
            .iter()
            .flat_map(|&k| {
                self.mu0.iter().map(move |&mu0| ChainConfig {
                    k,
                    params: self.params(mu0),
                    link_delay: self.link_delay,
                    seed: self.seed,
                })
            })
            .collect()
    }

    pub fn dataset(&self) -> pica_core::Result<DatasetSpec> {
        Ok(match &self.source {
            SourceSpec::Synthetic { samples } => DatasetSpec::Synthetic(SyntheticSpec {
                n: SyntheticSpec::default().n,
                m: *samples,
                kind: WaveformFamily::Mixed,
            }),
            SourceSpec::WavDir(dir) => {
                DatasetSpec::recorded(pica_core::signal::load_wav_dir(dir)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let cfg = ExperimentConfig::resolve(Overrides::default(), None).unwrap();
        assert_eq!(cfg.nodes, DEFAULT_NODES);
        assert_eq!(cfg.methods, [Method::Pica, Method::Fastica]);
        assert_eq!(cfg.source, SourceSpec::Synthetic { samples: DEFAULT_SAMPLES });
        assert_eq!(cfg.grid().len(), DEFAULT_NODES.len());
    }

    #[test]
    fn flags_override_file() {
        let file: Overrides = serde_json::from_str(
            r#"{"nodes": [3, 7], "mu0": [100, 200], "trials": 4, "wav-dir": "/data"}"#,
        )
        .unwrap();
        let cli = Overrides {
            trials: Some(2),
            synthetic: Some(true),
            ..Default::default()
        };
        let cfg = ExperimentConfig::resolve(cli.over(file), None).unwrap();
        assert_eq!(cfg.trials, 2);
        assert_eq!(cfg.nodes, [3, 7]);
        assert!(matches!(cfg.source, SourceSpec::Synthetic { .. }));
        let grid = cfg.grid();
        assert_eq!(grid.len(), 4);
        assert_eq!((grid[1].k, grid[1].params.mu0), (3, 200.0));
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        assert!(serde_json::from_str::<Overrides>(r#"{"nodez": [1]}"#).is_err());
    }

    #[test]
    fn bad_values_are_rejected() {
        let bad = |o: Overrides| ExperimentConfig::resolve(o, None).is_err();
        assert!(bad(Overrides { trials: Some(0), ..Default::default() }));
        assert!(bad(Overrides { alpha0: Some(1.0), ..Default::default() }));
        assert!(bad(Overrides { nodes: Some(vec![]), ..Default::default() }));
        assert!(ExperimentConfig::resolve(Overrides::default(), Some("zero")).is_err());
        assert_eq!(
            ExperimentConfig::resolve(Overrides::default(), Some("3")).unwrap().threads,
            Some(3)
        );
    }
}
