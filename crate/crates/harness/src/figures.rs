//! Plot data derived from a results CSV.
//!
//! Each `.dat` file is whitespace-delimited with a `#` header. Rows are x
//! values; each method contributes a `mean ci_low ci_high` triple (95%
//! normal interval), `nan` where a method has no data at that x.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pica_core::metrics::summarize;
use pica_core::netsim::Method;

use crate::results::{decode_hops, read_results, ResultRow, ResultsError};

pub const FIGURE_FILES: [&str; 4] = [
    "time_vs_nodes.dat",
    "time_vs_mu0.dat",
    "sdr_vs_method.dat",
    "per_node_cost.dat",
];

/// (x, method, y) observations.
type Points = Vec<(f64, Method, f64)>;

fn render(x_name: &str, points: &Points) -> String {
    let mut methods: Vec<Method> = points.iter().map(|p| p.1).collect();
    methods.sort_by_key(|m| m.as_str());
    methods.dedup();
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let mut out = format!("# {x_name}");
    for m in &methods {
        write!(out, " {m}_mean {m}_ci_low {m}_ci_high").unwrap();
    }
    out.push('\n');
    for x in xs {
        write!(out, "{x}").unwrap();
        for &m in &methods {
            let ys: Vec<f64> = points
                .iter()
                .filter(|p| p.0 == x && p.1 == m)
                .map(|p| p.2)
                .collect();
            match summarize(&ys) {
                Ok(s) => write!(out, " {} {} {}", s.mean, s.ci95_low, s.ci95_high).unwrap(),
                Err(_) => out.push_str(" nan nan nan"),
            }
        }
        out.push('\n');
    }
    out
}

fn sdr_by_method(rows: &[&ResultRow]) -> String {
    let mut out = String::from("# method mean_sdr_db ci_low ci_high\n");
    let mut methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
    methods.sort_by_key(|m| m.as_str());
    methods.dedup();
    for m in methods {
        let ys: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == m)
            .filter_map(|r| r.mean_sdr)
            .collect();
        if let Ok(s) = summarize(&ys) {
            writeln!(out, "{m} {} {} {}", s.mean, s.ci95_low, s.ci95_high).unwrap();
        }
    }
    out
}

/// Builds the four files' contents, in [`FIGURE_FILES`] order.
pub fn figure_data(rows: &[ResultRow]) -> Result<[String; 4], String> {
    let ok: Vec<&ResultRow> = rows.iter().filter(|r| r.is_ok()).collect();
    if ok.is_empty() {
        return Err("no successful trials".into());
    }
    let t_p = |x: fn(&ResultRow) -> f64| -> Points {
        ok.iter()
            .filter_map(|r| r.t_p_seconds.map(|t| (x(r), r.method, t)))
            .collect()
    };
    let mut per_hop = Points::new();
    for r in &ok {
        for report in decode_hops(&r.hops)? {
            per_hop.push((report.hop as f64, r.method, report.wall_time));
        }
    }
    Ok([
        render("nodes", &t_p(|r| r.k as f64)),
        render("mu0", &t_p(|r| r.mu0)),
        sdr_by_method(&ok),
        render("hop", &per_hop),
    ])
}

/// Reads `csv` and writes the plot files into `dir`. Nothing is written
/// unless every file can be built.
pub fn emit_figures(csv: &Path, dir: &Path) -> Result<Vec<PathBuf>, ResultsError> {
    let rows = read_results(csv)?;
    let data = figure_data(&rows)
        .map_err(|_| ResultsError::Empty(csv.display().to_string()))?;
    let mut written = Vec::new();
    for (name, body) in FIGURE_FILES.iter().zip(data) {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|source| ResultsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}
