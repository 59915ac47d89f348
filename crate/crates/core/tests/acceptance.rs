//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line to stderr
//! (uncaptured) and then asserts.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use pica_core::ica::{
    apply_whitening, convergence_scalar, fastica, fit_whitening, newton_step, reconstruct,
    SeparationMatrix,
};
use pica_core::linalg::{covariance, orthonormality_error};
use pica_core::metrics::sdr;
use pica_core::netsim::{run_trial, ChainConfig, DatasetSpec, Method, TrialData, TrialResult};
use pica_core::pica::{initial_state, last_node_process, node_process, slow_gradient_check, PicaParams};
use pica_core::signal::{SourceMatrix, SyntheticSpec, WaveformFamily};

fn verdict(criterion: u32, name: &str, pass: bool, detail: String) {
    let line = format!(
        "{} criterion {criterion} ({name}): {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    // Bypasses libtest's capture so the verdict shows in every run.
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

fn data(m: usize, seed: u64) -> TrialData {
    DatasetSpec::Synthetic(SyntheticSpec {
        n: 4,
        m,
        kind: WaveformFamily::Mixed,
    })
    .trial_data(seed)
    .unwrap()
}

fn chain(k: usize, mu0: f64, seed: u64) -> ChainConfig {
    ChainConfig {
        k,
        params: PicaParams {
            mu0,
            alpha0: 2.0,
            ..PicaParams::default()
        },
        link_delay: 0.0,
        seed,
    }
}

/// Paired (pICA, FastICA) results over `trials` seeds.
fn paired(m: usize, k: usize, mu0: f64, trials: u64) -> Vec<(TrialResult, TrialResult)> {
    (0..trials)
        .map(|t| {
            let seed = 1000 + t;
            let d = data(m, seed);
            let cfg = chain(k, mu0, seed);
            (
                run_trial(Method::Pica, &d, &cfg).unwrap(),
                run_trial(Method::Fastica, &d, &cfg).unwrap(),
            )
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn criterion_1_k0_parity() {
    let started = Instant::now();
    let mut identical = 0;
    let seeds = 0..5u64;
    for seed in seeds.clone() {
        let d = data(40_000, seed);
        let params = PicaParams::default();
        let state = initial_state(&d.mixture, &params, 0, seed).unwrap();
        let (_, s_pica, _) = last_node_process(&d.mixture, &state, &params).unwrap();

        let fit = fastica(&d.mixture, params.tol, params.last_node_cap(), seed).unwrap();
        let s_fast = reconstruct(&fit.separation, &fit.whitening, &d.mixture).unwrap();

        let cfg = chain(0, params.mu0, seed);
        let pica = run_trial(Method::Pica, &d, &cfg).unwrap();
        let fast = run_trial(Method::Fastica, &d, &cfg).unwrap();
        if s_pica.data() == s_fast.data()
            && pica.final_sdr == fast.final_sdr
            && pica.weighted_work() == fast.weighted_work()
        {
            identical += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        1,
        "k=0 parity",
        identical == seeds.count() && secs < 5.0,
        format!("{identical}/5 seeds bit-identical, {secs:.2} s"),
    );
}

#[test]
fn criterion_2_accuracy_parity() {
    let runs = paired(40_000, 7, 500.0, 20);
    let sdr_pica = mean(runs.iter().map(|(p, _)| p.final_sdr.mean));
    let sdr_fast = mean(runs.iter().map(|(_, f)| f.final_sdr.mean));
    let gap = (sdr_pica - sdr_fast).abs();
    verdict(
        2,
        "accuracy parity",
        gap <= 1.0 && sdr_pica >= 15.0 && sdr_fast >= 15.0,
        format!("mean SDR pICA {sdr_pica:.2} dB, FastICA {sdr_fast:.2} dB, gap {gap:.3} dB (≤ 1)"),
    );
}

#[test]
fn criterion_3_work_offloading() {
    let runs = paired(160_000, 7, 500.0, 10);
    let offloaded = mean(runs.iter().map(|(p, _)| 1.0 - p.server_share()));
    verdict(
        3,
        "work offloading",
        offloaded >= 0.5,
        format!("{:.1}% of weighted work before the server hop (≥ 50%)", 100.0 * offloaded),
    );
}

#[test]
fn criterion_4_speedup_mechanism() {
    let m = 160_000;
    let runs = paired(m, 15, m as f64 / 40.0, 20);
    let ratio = mean(
        runs.iter()
            .map(|(p, f)| p.weighted_work() as f64 / f.weighted_work() as f64),
    );
    let tp_pica = mean(runs.iter().map(|(p, _)| p.total_processing_time));
    let tp_fast = mean(runs.iter().map(|(_, f)| f.total_processing_time));
    verdict(
        4,
        "speedup mechanism",
        ratio <= 0.85 && tp_pica <= tp_fast,
        format!(
            "work ratio {ratio:.3} (≤ 0.85), t_p pICA {:.1} ms vs FastICA {:.1} ms",
            tp_pica * 1e3,
            tp_fast * 1e3
        ),
    );
}

#[test]
fn criterion_5_mu0_sensitivity() {
    let m = 160_000;
    let trials = 10u64;
    let mut zero_reports = true;
    let mut parity_gap: f64 = 0.0;
    let (mut work_mu1, mut work_mu21) = (0.0, 0.0);
    for t in 0..trials {
        let seed = 2000 + t;
        let d = data(m, seed);
        let at_one = run_trial(Method::Pica, &d, &chain(15, 1.0, seed)).unwrap();
        let base = run_trial(Method::Fastica, &d, &chain(15, 1.0, seed)).unwrap();
        let at_21 = run_trial(Method::Pica, &d, &chain(15, 21.0 * m as f64 / 160_000.0, seed)).unwrap();
        zero_reports &= at_one.node_reports.len() == 1;
        let gap = (at_one.weighted_work() as f64 / base.weighted_work() as f64 - 1.0).abs();
        parity_gap = parity_gap.max(gap);
        work_mu1 += at_one.weighted_work() as f64;
        work_mu21 += at_21.weighted_work() as f64;
    }
    verdict(
        5,
        "mu0 sensitivity",
        zero_reports && parity_gap <= 0.01 && work_mu21 < work_mu1,
        format!(
            "mu0=1: no intermediate reports = {zero_reports}, max work gap vs FastICA {:.2}%; \
             mu0=21 work / mu0=1 work = {:.3}",
            100.0 * parity_gap,
            work_mu21 / work_mu1
        ),
    );
}

#[test]
fn criterion_6_invariant_suite() {
    let mut failures: Vec<String> = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            failures.push(what);
        }
    };

    for seed in 0..5u64 {
        let d = data(20_000, seed);

        let whitening = fit_whitening(&d.mixture).unwrap();
        let z = apply_whitening(&whitening, d.mixture.data()).unwrap();
        let cov_err = (covariance(&z) - DMatrix::<f64>::identity(4, 4)).norm();
        check(cov_err <= 1e-6, format!("seed {seed}: whitened covariance error {cov_err:e}"));

        let mut w = SeparationMatrix::seeded(4, seed);
        for step in 0..25 {
            let (next, delta) = newton_step(&z, &w).unwrap();
            let err = orthonormality_error(next.matrix());
            check(err <= 1e-8, format!("seed {seed} step {step}: ‖WWᵀ−I‖ = {err:e}"));

            let flips = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(4, |i, _| {
                if (i + step) % 2 == 0 { -1.0 } else { 1.0 }
            }));
            let flipped_new = SeparationMatrix::new(&flips * next.matrix()).unwrap();
            let flipped_old = SeparationMatrix::new(&flips * w.matrix()).unwrap();
            let s = delta.scalar;
            let sym = [
                convergence_scalar(&flipped_new, &w),
                convergence_scalar(&next, &flipped_old),
                convergence_scalar(&flipped_new, &flipped_old),
            ];
            check(
                sym.iter().all(|v| (v - s).abs() <= 1e-12),
                format!("seed {seed} step {step}: sign flips change the scalar {s:e} → {sym:?}"),
            );
            w = next;
        }

        let params = PicaParams {
            mu0: 2000.0,
            alpha0: 2.0,
            ..PicaParams::default()
        };
        let mut state = initial_state(&d.mixture, &params, 6, seed).unwrap();
        let mut alpha_product = 1.0;
        while state.mu / state.alpha >= 1.0 {
            alpha_product *= state.alpha;
            let (next, _) = node_process(&d.mixture, &state, &params).unwrap();
            let expected = params.mu0 / alpha_product;
            let rel = (next.mu - expected).abs() / expected;
            check(rel <= 1e-12, format!("seed {seed}: μ = {} vs closed form {expected}", next.mu));
            check(next.alpha >= 2.0, format!("seed {seed}: α = {} < 2", next.alpha));
            state = next;
        }

        let truth = &d.sources;
        let noisy = truth.data() + DMatrix::from_fn(4, truth.m(), |i, j| 1e-3 * ((i * 7 + j) as f64).sin());
        let base = sdr(&SourceMatrix::estimated(noisy.clone(), 16_000), truth).unwrap();
        let perm = [2usize, 0, 3, 1];
        let scales = [-3.5, 0.25, 7.0, -0.01];
        let shuffled = DMatrix::from_fn(4, truth.m(), |i, j| scales[i] * noisy[(perm[i], j)]);
        let moved = sdr(&SourceMatrix::estimated(shuffled, 16_000), truth).unwrap();
        let gap = (moved.mean - base.mean).abs();
        check(gap <= 1e-9, format!("seed {seed}: SDR moved by {gap:e} dB under permutation/scale"));
    }

    check(
        !slow_gradient_check(&[1.0, 1.0, 1.0], 0.9),
        "flat history should continue".into(),
    );
    check(
        slow_gradient_check(&[1.0, 0.1, 0.01], 0.9),
        "decaying history should stop".into(),
    );
    check(!slow_gradient_check(&[0.5], 0.3), "warm-up guard".into());

    let detail = if failures.is_empty() {
        "orthonormality, whitening, μ recursion, α floor, SDR invariance, sign symmetry, \
         slow-gradient arithmetic all hold"
            .to_string()
    } else {
        failures.join("; ")
    };
    verdict(6, "invariant suite", failures.is_empty(), detail);
}

#[test]
fn criterion_7_separation_oracle() {
    let trials = 20u64;
    let good = (0..trials)
        .filter(|&seed| {
            let d = data(SyntheticSpec::default().m, 3000 + seed);
            let fit = fastica(&d.mixture, 1e-4, 2000, seed).unwrap();
            let s_hat = reconstruct(&fit.separation, &fit.whitening, &d.mixture).unwrap();
            sdr(&s_hat, &d.sources).unwrap().mean > 20.0
        })
        .count();
    verdict(
        7,
        "separation oracle",
        good >= 18,
        format!("{good}/{trials} trials above 20 dB mean SDR (≥ 18)"),
    );
}
