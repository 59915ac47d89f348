//! Forwarding-chain simulation: ingress, `k` intermediate nodes, server.
//!
//! Nodes run sequentially in one process; only their compute sections are
//! timed. An optional fixed per-hop link delay is added to the total.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ica::{fastica, reconstruct};
use crate::metrics::{cosine_distance, sdr, SdrScore};
use crate::pica::{
    initial_state, last_node_process, node_process, update_step, ExitReason, NodeReport,
    PicaParams,
};
use crate::signal::{
    generate_mixing_matrix, generate_sources, mix, MixingMatrix, MixtureMatrix, SourceMatrix,
    SyntheticSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pica,
    Fastica,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pica => "pica",
            Method::Fastica => "fastica",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pica" => Ok(Method::Pica),
            "fastica" => Ok(Method::Fastica),
            other => Err(format!("unknown method `{other}` (expected pica or fastica)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Number of intermediate nodes between the access point and the server.
    pub k: usize,
    pub params: PicaParams,
    /// Seconds added per forwarding hop.
    pub link_delay: f64,
    /// Base seed; trial `t` uses `seed + t`.
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            k: 0,
            params: PicaParams::default(),
            link_delay: 0.0,
            seed: 0,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.link_delay >= 0.0) || !self.link_delay.is_finite() {
            return Err(Error::Parameter(format!(
                "link delay must be a finite non-negative number, got {}",
                self.link_delay
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub method: Method,
    pub trial_seed: u64,
    pub node_reports: Vec<NodeReport>,
    /// `t_p`: node compute times plus link delays, in seconds.
    pub total_processing_time: f64,
    pub final_sdr: SdrScore,
}

impl TrialResult {
    pub fn weighted_work(&self) -> u64 {
        self.node_reports.iter().map(NodeReport::weighted_work).sum()
    }

    /// Work done by the final (full-data) node.
    pub fn server_work(&self) -> u64 {
        self.node_reports.last().map_or(0, NodeReport::weighted_work)
    }

    pub fn intermediate_work(&self) -> u64 {
        self.weighted_work() - self.server_work()
    }

    /// Fraction of weighted work done on the server; 1 when no work at all.
    pub fn server_share(&self) -> f64 {
        let total = self.weighted_work();
        if total == 0 {
            1.0
        } else {
            self.server_work() as f64 / total as f64
        }
    }
}

fn hop_distance(w_eff: &nalgebra::DMatrix<f64>, a: Option<&MixingMatrix>) -> Result<Option<f64>> {
    a.map(|a| cosine_distance(w_eff, a)).transpose()
}

/// Runs the progressive chain on one trial's data.
///
/// Hops whose sampling step would fall below 1 are skipped: once a node
/// sees that, the server takes over on the full mixture. With `k = 0` the
/// chain reduces to the FastICA baseline on the same seed.
pub fn run_chain(
    x: &MixtureMatrix,
    s_truth: &SourceMatrix,
    a: Option<&MixingMatrix>,
    cfg: &ChainConfig,
) -> Result<TrialResult> {
    cfg.validate()?;
    if x.data().shape() != s_truth.data().shape() {
        return Err(Error::shape(
            format!("{}×{}", s_truth.n(), s_truth.m()),
            format!("{}×{}", x.n(), x.m()),
        ));
    }
    let params = &cfg.params;

    let ingress_started = Instant::now();
    let mut state = initial_state(x, params, cfg.k, cfg.seed).map_err(|e| e.at_hop(0))?;
    let ingress_time = ingress_started.elapsed().as_secs_f64();

    let mut reports = Vec::with_capacity(cfg.k + 1);
    for _ in 0..cfg.k {
        if update_step(state.mu, state.alpha)? < 1.0 {
            break;
        }
        let (next, mut report) = node_process(x, &state, params)?;
        report.cosine_distance = hop_distance(&next.w.effective(&next.whitening), a)?;
        reports.push(report);
        state = next;
    }

    let (separation, s_hat, mut report) = last_node_process(x, &state, params)?;
    report.cosine_distance = hop_distance(&separation.effective(), a)?;
    reports.push(report);
    reports[0].wall_time += ingress_time;

    let total_processing_time =
        reports.iter().map(|r| r.wall_time).sum::<f64>() + cfg.k as f64 * cfg.link_delay;
    Ok(TrialResult {
        method: Method::Pica,
        trial_seed: cfg.seed,
        node_reports: reports,
        total_processing_time,
        final_sdr: sdr(&s_hat, s_truth)?,
    })
}

/// Centralized FastICA at the server with the chain's tolerance and
/// final-node iteration budget, so `k = 0` chains match it exactly.
pub fn run_fastica(
    x: &MixtureMatrix,
    s_truth: &SourceMatrix,
    a: Option<&MixingMatrix>,
    cfg: &ChainConfig,
) -> Result<TrialResult> {
    cfg.validate()?;
    let params = &cfg.params;
    let started = Instant::now();
    let fit = fastica(x, params.tol, params.last_node_cap(), cfg.seed)?;
    let s_hat = reconstruct(&fit.separation, &fit.whitening, x)?;
    let wall_time = started.elapsed().as_secs_f64();

    let report = NodeReport {
        hop: 1,
        exit_reason: if fit.converged(params.tol) {
            ExitReason::LastNodeConverged
        } else {
            ExitReason::IterationCap
        },
        iterations: fit.iterations,
        samples_used: x.m(),
        wall_time,
        final_scalar: fit.final_scalar,
        cosine_distance: hop_distance(&fit.separation.effective(&fit.whitening), a)?,
    };
    Ok(TrialResult {
        method: Method::Fastica,
        trial_seed: cfg.seed,
        total_processing_time: wall_time + cfg.k as f64 * cfg.link_delay,
        node_reports: vec![report],
        final_sdr: sdr(&s_hat, s_truth)?,
    })
}

pub fn run_trial(
    method: Method,
    data: &TrialData,
    cfg: &ChainConfig,
) -> Result<TrialResult> {
    match method {
        Method::Pica => run_chain(&data.mixture, &data.sources, Some(&data.mixing), cfg),
        Method::Fastica => run_fastica(&data.mixture, &data.sources, Some(&data.mixing), cfg),
    }
}

/// Where trial sources come from.
#[derive(Debug, Clone)]
pub enum DatasetSpec {
    Synthetic(SyntheticSpec),
    /// Fixed recorded sources; only the mixing matrix varies per trial.
    Recorded(Arc<SourceMatrix>),
}

impl DatasetSpec {
    /// Recorded sources are centered and scaled to unit peak.
    pub fn recorded(sources: SourceMatrix) -> Self {
        DatasetSpec::Recorded(Arc::new(sources.normalized()))
    }

    pub fn n(&self) -> usize {
        match self {
            DatasetSpec::Synthetic(s) => s.n,
            DatasetSpec::Recorded(s) => s.n(),
        }
    }

    pub fn m(&self) -> usize {
        match self {
            DatasetSpec::Synthetic(s) => s.m,
            DatasetSpec::Recorded(s) => s.m(),
        }
    }

    /// Sources, mixing matrix and mixture for one trial seed.
    pub fn trial_data(&self, seed: u64) -> Result<TrialData> {
        let sources = match self {
            DatasetSpec::Synthetic(spec) => generate_sources(spec.n, spec.m, seed, spec.kind)?,
            DatasetSpec::Recorded(s) => (**s).clone(),
        };
        let mixing = generate_mixing_matrix(sources.n(), mixing_seed(seed))?;
        let mixture = mix(&mixing, &sources)?;
        Ok(TrialData {
            sources,
            mixing,
            mixture,
        })
    }
}

/// Decorrelates the mixing-matrix stream from the source stream.
fn mixing_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

#[derive(Debug, Clone)]
pub struct TrialData {
    pub sources: SourceMatrix,
    pub mixing: MixingMatrix,
    pub mixture: MixtureMatrix,
}

/// One (config, trial, method) cell of a sweep. Failed trials keep their
/// error message instead of aborting the sweep.
#[derive(Debug, Clone)]
pub struct ScenarioEntry {
    pub config_index: usize,
    pub config: ChainConfig,
    pub method: Method,
    pub trial_seed: u64,
    pub outcome: std::result::Result<TrialResult, String>,
}

/// Sweeps every config for `trials` seeds (`cfg.seed + t`). All methods of
/// a trial see the same data. Output order is config, then trial, then
/// method, independent of how trials are scheduled on `threads` workers.
pub fn run_scenario(
    methods: &[Method],
    dataset: &DatasetSpec,
    grid: &[ChainConfig],
    trials: usize,
    threads: Option<usize>,
) -> Result<Vec<ScenarioEntry>> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    if methods.is_empty() || grid.is_empty() {
        return Err(Error::Parameter("methods and config grid must be non-empty".into()));
    }
    for cfg in grid {
        cfg.validate()?;
    }

    let jobs: Vec<(usize, u64)> = grid
        .iter()
        .enumerate()
        .flat_map(|(i, cfg)| (0..trials as u64).map(move |t| (i, cfg.seed.wrapping_add(t))))
        .collect();

    let run_job = |&(config_index, trial_seed): &(usize, u64)| -> Vec<ScenarioEntry> {
        let config = ChainConfig {
            seed: trial_seed,
            ..grid[config_index]
        };
        let data = dataset.trial_data(trial_seed);
        methods
            .iter()
            .map(|&method| ScenarioEntry {
                config_index,
                config: grid[config_index],
                method,
                trial_seed,
                outcome: data
                    .as_ref()
                    .map_err(ToString::to_string)
                    .and_then(|d| run_trial(method, d, &config).map_err(|e| e.to_string())),
            })
            .collect()
    };

    let nested: Vec<Vec<ScenarioEntry>> = match threads {
        Some(1) => jobs.iter().map(run_job).collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?
            .install(|| jobs.par_iter().map(run_job).collect()),
        None => jobs.par_iter().map(run_job).collect(),
    };
    Ok(nested.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::WaveformFamily;

    fn synthetic(m: usize) -> DatasetSpec {
        DatasetSpec::Synthetic(SyntheticSpec {
            n: 4,
            m,
            kind: WaveformFamily::Mixed,
        })
    }

    #[test]
    fn method_parsing() {
        assert_eq!("pica".parse::<Method>().unwrap(), Method::Pica);
        assert_eq!(" FastICA".parse::<Method>().unwrap(), Method::Fastica);
        assert!("aeica".parse::<Method>().is_err());
    }

    #[test]
    fn zero_nodes_is_the_baseline() {
        let data = synthetic(20_000).trial_data(3).unwrap();
        let cfg = ChainConfig { k: 0, seed: 3, ..Default::default() };
        let chain = run_trial(Method::Pica, &data, &cfg).unwrap();
        let base = run_trial(Method::Fastica, &data, &cfg).unwrap();
        assert_eq!(chain.node_reports.len(), 1);
        assert_eq!(chain.final_sdr, base.final_sdr);
        assert_eq!(chain.node_reports[0].iterations, base.node_reports[0].iterations);
        assert_eq!(chain.weighted_work(), base.weighted_work());
    }

    #[test]
    fn unit_mu0_puts_everything_on_the_server() {
        let data = synthetic(20_000).trial_data(4).unwrap();
        let params = PicaParams { mu0: 1.0, ..Default::default() };
        let cfg = ChainConfig { k: 7, params, seed: 4, ..Default::default() };
        let chain = run_trial(Method::Pica, &data, &cfg).unwrap();
        assert_eq!(chain.node_reports.len(), 1);
        assert_eq!(chain.server_share(), 1.0);
        let base = run_trial(Method::Fastica, &data, &cfg).unwrap();
        assert_eq!(chain.weighted_work(), base.weighted_work());
    }

    #[test]
    fn chain_reports_are_consistent() {
        let data = synthetic(40_000).trial_data(5).unwrap();
        let cfg = ChainConfig { k: 7, seed: 5, link_delay: 0.002, ..Default::default() };
        let r = run_trial(Method::Pica, &data, &cfg).unwrap();
        assert!(r.node_reports.len() <= cfg.k + 1);
        let last = r.node_reports.last().unwrap();
        assert!(matches!(
            last.exit_reason,
            ExitReason::LastNodeConverged | ExitReason::IterationCap
        ));
        for (i, rep) in r.node_reports.iter().enumerate() {
            assert_eq!(rep.hop, i + 1);
            assert!(rep.samples_used <= 40_000);
            assert!(rep.cosine_distance.is_some());
        }
        for pair in r.node_reports.windows(2) {
            assert!(pair[0].samples_used <= pair[1].samples_used);
        }
        let compute: f64 = r.node_reports.iter().map(|n| n.wall_time).sum();
        assert!((r.total_processing_time - compute - 7.0 * 0.002).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let data = synthetic(2000).trial_data(1).unwrap();
        let other = synthetic(1000).trial_data(1).unwrap();
        let cfg = ChainConfig::default();
        assert!(run_chain(&data.mixture, &other.sources, None, &cfg).is_err());
    }

    #[test]
    fn scenario_enumeration_and_order() {
        let grid = [
            ChainConfig { k: 0, seed: 10, ..Default::default() },
            ChainConfig { k: 3, seed: 20, ..Default::default() },
        ];
        let out = run_scenario(&[Method::Pica], &synthetic(4000), &grid, 3, Some(2)).unwrap();
        assert_eq!(out.len(), 6);
        let seeds: Vec<u64> = out.iter().map(|e| e.trial_seed).collect();
        assert_eq!(seeds, vec![10, 11, 12, 20, 21, 22]);
        let idx: Vec<usize> = out.iter().map(|e| e.config_index).collect();
        assert_eq!(idx, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn scenario_is_deterministic_modulo_timing() {
        let grid = [ChainConfig { k: 3, seed: 7, ..Default::default() }];
        let methods = [Method::Pica, Method::Fastica];
        let a = run_scenario(&methods, &synthetic(8000), &grid, 2, Some(1)).unwrap();
        let b = run_scenario(&methods, &synthetic(8000), &grid, 2, None).unwrap();
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(&b) {
            let (x, y) = (x.outcome.as_ref().unwrap(), y.outcome.as_ref().unwrap());
            assert_eq!(x.method, y.method);
            assert_eq!(x.final_sdr, y.final_sdr);
            assert_eq!(x.node_reports.len(), y.node_reports.len());
            for (p, q) in x.node_reports.iter().zip(&y.node_reports) {
                assert_eq!(
                    (p.hop, p.exit_reason, p.iterations, p.samples_used, p.final_scalar, p.cosine_distance),
                    (q.hop, q.exit_reason, q.iterations, q.samples_used, q.final_scalar, q.cosine_distance)
                );
            }
        }
    }

    #[test]
    fn failed_trials_are_recorded() {
        // Four columns cannot support a 4-channel covariance: every trial
        // fails, but the sweep still returns one entry per cell.
        let grid = [ChainConfig::default()];
        let out = run_scenario(&[Method::Pica, Method::Fastica], &synthetic(4), &grid, 2, Some(1)).unwrap();
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|e| e.outcome.is_err()));
    }

    #[test]
    fn scenario_rejects_zero_trials() {
        let grid = [ChainConfig::default()];
        assert!(run_scenario(&[Method::Pica], &synthetic(100), &grid, 0, None).is_err());
    }
}
