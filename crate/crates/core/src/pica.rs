//! Per-node logic of progressive ICA.
//!
//! Each intermediate node shrinks the sampling step `μ` by the growth factor
//! `α`, takes every `μ`-th column of the mixture, and continues Newton
//! iterations from the separation matrix handed over by its predecessor.
//! It stops on the convergence tolerance (and doubles `α` for the next hop)
//! or when the convergence scalar stops falling fast enough (and halves `α`,
//! never below 2). Once `μ` drops below 1 the subset would be the whole
//! mixture, so the final node iterates on the full data and reconstructs.
//!
//! Every node whitens its own subset. The incoming `W` is re-expressed in
//! the new basis so that the effective unmixing `W·V` carries over between
//! hops; iterating an orthonormal `W` on data whitened for a different
//! subset does not converge to the separating solution.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ica::{
    apply_whitening, fit_whitening, iterate_until_converged, newton_step, rebase, reconstruct,
    SeparationMatrix, WhiteningTransform, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::signal::{MixtureMatrix, SourceMatrix};

/// Local iterations that must run before the slow-gradient test may fire.
pub const WARMUP_ITERATIONS: usize = 3;

/// The final node may run this many times the per-node iteration budget.
pub const LAST_NODE_CAP_FACTOR: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicaParams {
    /// Convergence tolerance on the Newton scalar.
    pub tol: f64,
    /// `P_break` of the slow-gradient test, in (0, 1).
    pub grad_threshold: f64,
    pub max_local_iter: usize,
    /// Initial sampling step `μ_0`.
    pub mu0: f64,
    /// Initial growth factor `α_0`.
    pub alpha0: f64,
}

impl Default for PicaParams {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            grad_threshold: 0.7,
            max_local_iter: DEFAULT_MAX_ITER,
            mu0: 500.0,
            alpha0: 2.0,
        }
    }
}

impl PicaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Parameter(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.grad_threshold > 0.0 && self.grad_threshold < 1.0) {
            return Err(Error::Parameter(format!(
                "grad_threshold must lie in (0, 1), got {}",
                self.grad_threshold
            )));
        }
        if self.max_local_iter == 0 {
            return Err(Error::Parameter("max_local_iter must be at least 1".into()));
        }
        if !(self.mu0 >= 1.0) || !self.mu0.is_finite() {
            return Err(Error::Parameter(format!("mu0 must be ≥ 1, got {}", self.mu0)));
        }
        if !(self.alpha0 >= 2.0) || !self.alpha0.is_finite() {
            return Err(Error::Parameter(format!("alpha0 must be ≥ 2, got {}", self.alpha0)));
        }
        Ok(())
    }

    /// Iteration budget of the final, full-data node.
    pub fn last_node_cap(&self) -> usize {
        self.max_local_iter * LAST_NODE_CAP_FACTOR
    }
}

/// What a node hands to its successor.
#[derive(Debug, Clone)]
pub struct SeparationState {
    pub w: SeparationMatrix,
    /// Sampling step used by the node that produced this state.
    pub mu: f64,
    /// Growth factor the next node divides `mu` by.
    pub alpha: f64,
    /// Whitening basis `w` currently acts in.
    pub whitening: Arc<WhiteningTransform>,
    /// Column stride of the subset `whitening` was fitted on (1 = full data).
    pub whitening_stride: usize,
    /// Index of the node that produced this state (0 = ingress).
    pub hop: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitReason {
    ToleranceReached,
    SlowGradient,
    LastNodeConverged,
    IterationCap,
}

impl ExitReason {
    pub const ALL: [ExitReason; 4] = [
        ExitReason::ToleranceReached,
        ExitReason::SlowGradient,
        ExitReason::LastNodeConverged,
        ExitReason::IterationCap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExitReason::ToleranceReached => "tolerance-reached",
            ExitReason::SlowGradient => "slow-gradient",
            ExitReason::LastNodeConverged => "last-node-converged",
            ExitReason::IterationCap => "iteration-cap",
        }
    }
}

impl fmt::Display for ExitReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExitReason {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ExitReason::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown exit reason `{s}`"))
    }
}

/// Instrumentation for one computing node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub hop: usize,
    pub exit_reason: ExitReason,
    pub iterations: usize,
    pub samples_used: usize,
    /// Seconds spent in sampling, whitening and Newton iterations.
    pub wall_time: f64,
    pub final_scalar: f64,
    /// Distance of this node's effective unmixing to `A⁻¹`, when known.
    pub cosine_distance: Option<f64>,
}

impl NodeReport {
    /// Hardware-independent cost: Newton iterations times columns touched.
    pub fn weighted_work(&self) -> u64 {
        self.iterations as u64 * self.samples_used as u64
    }
}

/// `μ_k = μ_{k−1} / α_k`, kept real-valued.
pub fn update_step(mu_prev: f64, alpha: f64) -> Result<f64> {
    if !(mu_prev > 0.0) {
        return Err(Error::Parameter(format!("sampling step must be positive, got {mu_prev}")));
    }
    if !(alpha >= 2.0) {
        return Err(Error::Parameter(format!("growth factor must be ≥ 2, got {alpha}")));
    }
    Ok(mu_prev / alpha)
}

/// Integer column stride `max(1, round(μ))` for a step `μ ≥ 1`.
pub fn sampling_stride(mu: f64) -> Result<usize> {
    if !(mu >= 1.0) {
        return Err(Error::Parameter(format!(
            "sampling step {mu} < 1: the full mixture must be used instead"
        )));
    }
    Ok((mu.round() as usize).max(1))
}

/// Columns `0, t, 2t, …` of `X` with `t = max(1, round(μ))`.
pub fn sample_columns(x: &MixtureMatrix, mu: f64) -> Result<MixtureMatrix> {
    let step = sampling_stride(mu)?;
    if step == 1 {
        return Ok(x.clone());
    }
    let indices: Vec<usize> = (0..x.m()).step_by(step).collect();
    MixtureMatrix::new(x.data().select_columns(&indices))
}

/// Slow-gradient-reduction test on the scalars seen so far at this node:
/// stop when `Σh < P_break · ½(max h + last h) · |h|`.
pub fn slow_gradient_check(history: &[f64], p_break: f64) -> bool {
    if history.len() < WARMUP_ITERATIONS {
        return false;
    }
    let sum: f64 = history.iter().sum();
    let max = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let last = history[history.len() - 1];
    sum < p_break * 0.5 * (max + last) * history.len() as f64
}

/// Ingress state: seeded orthonormal `W`, `μ_0`, `α_0` and the first
/// whitening basis.
///
/// The basis is fitted on the first intermediate node's subset (step
/// `μ_0/α_0`) when such a node will run, and on the full mixture otherwise,
/// so a chain without intermediate work is exactly the FastICA baseline.
pub fn initial_state(
    x: &MixtureMatrix,
    params: &PicaParams,
    intermediate_nodes: usize,
    seed: u64,
) -> Result<SeparationState> {
    params.validate()?;
    let first_mu = update_step(params.mu0, params.alpha0)?;
    let (whitening, whitening_stride) = if intermediate_nodes > 0 && first_mu >= 1.0 {
        (fit_whitening(&sample_columns(x, first_mu)?)?, sampling_stride(first_mu)?)
    } else {
        (fit_whitening(x)?, 1)
    };
    Ok(SeparationState {
        w: SeparationMatrix::seeded(x.n(), seed),
        mu: params.mu0,
        alpha: params.alpha0,
        whitening: Arc::new(whitening),
        whitening_stride,
        hop: 0,
    })
}

/// Whitening for a subset taken at `stride`, reusing the incoming basis when
/// it was fitted on the same columns.
fn basis_for(
    subset: &MixtureMatrix,
    stride: usize,
    state: &SeparationState,
) -> Result<(Arc<WhiteningTransform>, SeparationMatrix)> {
    if stride == state.whitening_stride {
        return Ok((Arc::clone(&state.whitening), state.w.clone()));
    }
    let fitted = fit_whitening(subset)?;
    let w = rebase(&state.w, &state.whitening, &fitted)?;
    Ok((Arc::new(fitted), w))
}

/// One intermediate node. The caller must only route here when the
/// updated step `state.mu / state.alpha` is at least 1.
pub fn node_process(
    x: &MixtureMatrix,
    state: &SeparationState,
    params: &PicaParams,
) -> Result<(SeparationState, NodeReport)> {
    let hop = state.hop + 1;
    intermediate(x, state, params).map_err(|e| e.at_hop(hop))
}

fn intermediate(
    x: &MixtureMatrix,
    state: &SeparationState,
    params: &PicaParams,
) -> Result<(SeparationState, NodeReport)> {
    let mu = update_step(state.mu, state.alpha)?;
    let stride = sampling_stride(mu)?;
    let started = Instant::now();
    let subset = sample_columns(x, mu)?;
    let (whitening, mut w) = basis_for(&subset, stride, state)?;
    let z = apply_whitening(&whitening, subset.data())?;

    let mut history = Vec::new();
    let (exit_reason, alpha) = loop {
        let (next, delta) = newton_step(&z, &w)?;
        w = next;
        history.push(delta.scalar);
        if delta.scalar < params.tol {
            break (ExitReason::ToleranceReached, state.alpha * 2.0);
        }
        let halved = (state.alpha / 2.0).max(2.0);
        if slow_gradient_check(&history, params.grad_threshold) {
            break (ExitReason::SlowGradient, halved);
        }
        if history.len() >= params.max_local_iter {
            break (ExitReason::IterationCap, halved);
        }
    };
    let wall_time = started.elapsed().as_secs_f64();

    let report = NodeReport {
        hop: state.hop + 1,
        exit_reason,
        iterations: history.len(),
        samples_used: subset.m(),
        wall_time,
        final_scalar: history[history.len() - 1],
        cosine_distance: None,
    };
    let next = SeparationState {
        w,
        mu,
        alpha,
        whitening,
        whitening_stride: stride,
        hop: state.hop + 1,
    };
    Ok((next, report))
}

/// Server-side result: `W` and the whitening basis it acts in.
#[derive(Debug, Clone)]
pub struct FinalSeparation {
    pub w: SeparationMatrix,
    pub whitening: Arc<WhiteningTransform>,
}

impl FinalSeparation {
    /// Composite unmixing `W·V` on centered raw mixtures.
    pub fn effective(&self) -> nalgebra::DMatrix<f64> {
        self.w.effective(&self.whitening)
    }
}

/// The final node: full-data Newton iterations from the incoming `W` until
/// the tolerance is met (or `10 × max_local_iter` steps), then `Ŝ`.
///
/// Returns the final `W` together with the full-data whitening it acts in.
pub fn last_node_process(
    x: &MixtureMatrix,
    state: &SeparationState,
    params: &PicaParams,
) -> Result<(FinalSeparation, SourceMatrix, NodeReport)> {
    let hop = state.hop + 1;
    let run = || -> Result<_> {
        let started = Instant::now();
        let (whitening, w0) = basis_for(x, 1, state)?;
        let z = apply_whitening(&whitening, x.data())?;
        let fit = iterate_until_converged(&z, w0, params.tol, params.last_node_cap())?;
        let s_hat = reconstruct(&fit.w, &whitening, x)?;
        let wall_time = started.elapsed().as_secs_f64();
        let report = NodeReport {
            hop,
            exit_reason: if fit.converged {
                ExitReason::LastNodeConverged
            } else {
                ExitReason::IterationCap
            },
            iterations: fit.iterations,
            samples_used: x.m(),
            wall_time,
            final_scalar: fit.last_scalar,
            cosine_distance: None,
        };
        let separation = FinalSeparation {
            w: fit.w,
            whitening,
        };
        Ok((separation, s_hat, report))
    };
    run().map_err(|e| e.at_hop(hop))
}
