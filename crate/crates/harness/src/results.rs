//! Results CSV: one row per trial per method.
//!
//! Columns: `method, k, mu0, alpha0, tol, p_break, max_iter, link_delay,
//! trial_seed, t_p_seconds, weighted_work, server_share, mean_sdr,
//! sdr_per_source, hops, error`.
//!
//! `sdr_per_source` is a `;`-separated list of dB values. `hops` packs one
//! `hop:iterations:samples:exit:wall_s:final_scalar:cosine` record per
//! computing node, `;`-separated, with `-` for an unknown cosine distance.
//! Failed trials leave every result column empty and carry `error`.
//! Floats are written in shortest round-trip form.

use std::io::Write;
use std::path::Path;

use pica_core::metrics::SdrScore;
use pica_core::netsim::{Method, ScenarioEntry, TrialResult};
use pica_core::pica::{ExitReason, NodeReport};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const COLUMNS: [&str; 16] = [
    "method",
    "k",
    "mu0",
    "alpha0",
    "tol",
    "p_break",
    "max_iter",
    "link_delay",
    "trial_seed",
    "t_p_seconds",
    "weighted_work",
    "server_share",
    "mean_sdr",
    "sdr_per_source",
    "hops",
    "error",
];

#[derive(Debug, Error)]
pub enum ResultsError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("{0}: no result rows")]
    Empty(String),
}

/// One CSV row, flattened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub k: usize,
    pub mu0: f64,
    pub alpha0: f64,
    pub tol: f64,
    pub p_break: f64,
    pub max_iter: usize,
    pub link_delay: f64,
    pub trial_seed: u64,
    pub t_p_seconds: Option<f64>,
    pub weighted_work: Option<u64>,
    pub server_share: Option<f64>,
    pub mean_sdr: Option<f64>,
    pub sdr_per_source: String,
    pub hops: String,
    pub error: String,
}

impl ResultRow {
    pub fn from_entry(entry: &ScenarioEntry) -> Self {
        let cfg = &entry.config;
        let mut row = ResultRow {
            method: entry.method,
            k: cfg.k,
            mu0: cfg.params.mu0,
            alpha0: cfg.params.alpha0,
            tol: cfg.params.tol,
            p_break: cfg.params.grad_threshold,
            max_iter: cfg.params.max_local_iter,
            link_delay: cfg.link_delay,
            trial_seed: entry.trial_seed,
            t_p_seconds: None,
            weighted_work: None,
            server_share: None,
            mean_sdr: None,
            sdr_per_source: String::new(),
            hops: String::new(),
            error: String::new(),
        };
        match &entry.outcome {
            Ok(result) => {
                row.t_p_seconds = Some(result.total_processing_time);
                row.weighted_work = Some(result.weighted_work());
                row.server_share = Some(result.server_share());
                row.mean_sdr = Some(result.final_sdr.mean);
                row.sdr_per_source = join(result.final_sdr.per_source.iter());
                row.hops = encode_hops(&result.node_reports);
            }
            Err(e) => row.error = e.clone(),
        }
        row
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_empty()
    }

    /// Rebuilds the trial result a successful row was written from.
    pub fn trial_result(&self) -> Result<TrialResult, String> {
        if !self.is_ok() {
            return Err(format!("trial failed: {}", self.error));
        }
        let per_source = self
            .sdr_per_source
            .split(';')
            .map(|v| v.parse::<f64>().map_err(|e| format!("sdr_per_source `{v}`: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TrialResult {
            method: self.method,
            trial_seed: self.trial_seed,
            node_reports: decode_hops(&self.hops)?,
            total_processing_time: self.t_p_seconds.ok_or("missing t_p_seconds")?,
            final_sdr: SdrScore {
                per_source,
                mean: self.mean_sdr.ok_or("missing mean_sdr")?,
            },
        })
    }
}

fn join<T: ToString>(values: impl Iterator<Item = T>) -> String {
    values.map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

pub fn encode_hops(reports: &[NodeReport]) -> String {
    join(reports.iter().map(|r| {
        let cos = r.cosine_distance.map_or_else(|| "-".to_string(), |c| c.to_string());
        format!(
            "{}:{}:{}:{}:{}:{}:{}",
            r.hop, r.iterations, r.samples_used, r.exit_reason, r.wall_time, r.final_scalar, cos
        )
    }))
}

pub fn decode_hops(packed: &str) -> Result<Vec<NodeReport>, String> {
    if packed.is_empty() {
        return Ok(Vec::new());
    }
    packed
        .split(';')
        .map(|rec| {
            let f: Vec<&str> = rec.split(':').collect();
            if f.len() != 7 {
                return Err(format!("hop record `{rec}` has {} fields, expected 7", f.len()));
            }
            let bad = |what: &str, e: &dyn std::fmt::Display| format!("hop record `{rec}`: {what}: {e}");
            Ok(NodeReport {
                hop: f[0].parse().map_err(|e| bad("hop", &e))?,
                iterations: f[1].parse().map_err(|e| bad("iterations", &e))?,
                samples_used: f[2].parse().map_err(|e| bad("samples", &e))?,
                exit_reason: f[3].parse::<ExitReason>().map_err(|e| bad("exit", &e))?,
                wall_time: f[4].parse().map_err(|e| bad("wall time", &e))?,
                final_scalar: f[5].parse().map_err(|e| bad("scalar", &e))?,
                cosine_distance: match f[6] {
                    "-" => None,
                    v => Some(v.parse().map_err(|e| bad("cosine", &e))?),
                },
            })
        })
        .collect()
}

/// Writes all rows to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<(), ResultsError> {
    let io = |source| ResultsError::Io {
        path: path.display().to_string(),
        source,
    };
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(io)?;
    {
        let mut writer = csv::Writer::from_writer(tmp.as_file_mut());
        for row in rows {
            writer
                .serialize(row)
                .map_err(|e| io(std::io::Error::other(e)))?;
        }
        if rows.is_empty() {
            writer
                .write_record(COLUMNS)
                .map_err(|e| io(std::io::Error::other(e)))?;
        }
        writer.flush().map_err(io)?;
    }
    tmp.as_file_mut().flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Parses a results CSV; errors name the offending line.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, ResultsError> {
    let file = std::fs::File::open(path).map_err(|source| ResultsError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| ResultsError::Parse {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    if headers.iter().ne(COLUMNS.iter().copied()) {
        return Err(ResultsError::Parse {
            line: 1,
            reason: format!(
                "header `{}` does not match expected `{}`",
                headers.iter().collect::<Vec<_>>().join(","),
                COLUMNS.join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for record in reader.deserialize::<ResultRow>() {
        match record {
            Ok(row) => rows.push(row),
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(ResultsError::Parse {
                    line,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(rows)
}
