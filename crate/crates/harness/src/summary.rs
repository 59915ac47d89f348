//! Console summary of a sweep: one line per (method, k, μ0) cell.

use std::fmt::Write as _;

use pica_core::metrics::summarize;

use crate::results::ResultRow;

fn cell(values: &[f64], scale: f64, digits: usize) -> String {
    match summarize(values) {
        Ok(s) => format!(
            "{:.d$} ±{:.d$}",
            s.mean * scale,
            (s.ci95_high - s.mean) * scale,
            d = digits
        ),
        Err(_) => "-".into(),
    }
}

pub fn summary_table(rows: &[ResultRow]) -> String {
    let mut keys: Vec<(String, usize, f64)> = Vec::new();
    for r in rows {
        let key = (r.method.to_string(), r.k, r.mu0);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut out = format!(
        "{:<8} {:>3} {:>9} {:>6} {:>6} {:>18} {:>16} {:>14} {:>12}\n",
        "method", "k", "mu0", "trials", "failed", "t_p [ms]", "SDR [dB]", "work [Msamp]", "server share"
    );
    for (method, k, mu0) in keys {
        let group: Vec<&ResultRow> = rows
            .iter()
            .filter(|r| r.method.as_str() == method && r.k == k && r.mu0 == mu0)
            .collect();
        let ok: Vec<&&ResultRow> = group.iter().filter(|r| r.is_ok()).collect();
        let col = |f: fn(&ResultRow) -> Option<f64>| -> Vec<f64> {
            ok.iter().filter_map(|r| f(r)).collect()
        };
        writeln!(
            out,
            "{:<8} {:>3} {:>9} {:>6} {:>6} {:>18} {:>16} {:>14} {:>12}",
            method,
            k,
            mu0,
            group.len(),
            group.len() - ok.len(),
            cell(&col(|r| r.t_p_seconds), 1e3, 2),
            cell(&col(|r| r.mean_sdr), 1.0, 2),
            cell(&col(|r| r.weighted_work.map(|w| w as f64)), 1e-6, 2),
            cell(&col(|r| r.server_share), 1.0, 3),
        )
        .unwrap();
    }
    out
}
