//! Overhead measurements for obfuscation runs.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, GateCounts};
use crate::qasm::emit;
use crate::sim::{equivalent, simulate, Equivalence, EquivalenceMode, SimError, MAX_UNITARY_QUBITS};
use crate::wrap::SourceBlock;

pub const REPORT_SCHEMA: &str = "qfuscate.report/v1";
/// JSON Schema for a rendered report array.
pub const REPORT_JSON_SCHEMA: &str = include_str!("../schemas/report.schema.json");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Simulations per circuit whose median is reported.
pub const TIMING_RUNS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub method: String,
    pub input_id: String,
    pub depth_before: Option<usize>,
    pub depth_after: Option<usize>,
    pub gate_counts_before: Option<GateCounts>,
    pub gate_counts_after: Option<GateCounts>,
    pub bytes_before: usize,
    pub bytes_after: usize,
    pub sim_wall_time_before_us: Option<u64>,
    pub sim_wall_time_after_us: Option<u64>,
    pub equivalence: Option<Equivalence>,
    pub timestamp_unix: u64,
    pub tool_version: String,
    pub seed: Option<u64>,
}

impl Report {
    fn blank(method: &str, input_id: &str) -> Report {
        Report {
            schema: REPORT_SCHEMA.to_string(),
            method: method.to_string(),
            input_id: input_id.to_string(),
            depth_before: None,
            depth_after: None,
            gate_counts_before: None,
            gate_counts_after: None,
            bytes_before: 0,
            bytes_after: 0,
            sim_wall_time_before_us: None,
            sim_wall_time_after_us: None,
            equivalence: None,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            tool_version: TOOL_VERSION.to_string(),
            seed: None,
        }
    }

    /// Copy with the fields that vary between identical runs cleared.
    pub fn without_timings(&self) -> Report {
        Report {
            sim_wall_time_before_us: None,
            sim_wall_time_after_us: None,
            timestamp_unix: 0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("circuit is invalid: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("unknown report format '{0}' (expected json or table)")]
    UnknownFormat(String),
}

fn median_sim_us(c: &Circuit) -> Result<u64, SimError> {
    let unitary = c.without_non_unitary();
    let mut times = Vec::with_capacity(TIMING_RUNS);
    for _ in 0..TIMING_RUNS {
        let t = Instant::now();
        std::hint::black_box(simulate(&unitary, 0)?);
        times.push(t.elapsed().as_micros() as u64);
    }
    times.sort_unstable();
    Ok(times[TIMING_RUNS / 2])
}

/// Equivalence mode used for reports and output gating: the full unitary
/// when it fits, probe statevectors otherwise.
pub fn gate_mode(n_qubits: usize) -> EquivalenceMode {
    if n_qubits <= MAX_UNITARY_QUBITS {
        EquivalenceMode::Unitary
    } else {
        EquivalenceMode::Statevector
    }
}

/// Measure one circuit-pass run.
pub fn measure_circuit_run(
    c_in: &Circuit,
    c_out: &Circuit,
    method: &str,
    input_id: &str,
    seed: Option<u64>,
) -> Result<Report, MetricsError> {
    for c in [c_in, c_out] {
        if let Some(d) = c.validate().into_iter().find(|d| d.is_error()) {
            return Err(MetricsError::Invalid(d.to_string()));
        }
    }
    let mut r = Report::blank(method, input_id);
    r.seed = seed;
    r.depth_before = Some(c_in.depth());
    r.depth_after = Some(c_out.depth());
    r.gate_counts_before = Some(c_in.gate_count());
    r.gate_counts_after = Some(c_out.gate_count());
    r.bytes_before = emit(c_in).len();
    r.bytes_after = emit(c_out).len();
    r.sim_wall_time_before_us = Some(median_sim_us(c_in)?);
    r.sim_wall_time_after_us = Some(median_sim_us(c_out)?);
    r.equivalence = Some(equivalent(c_in, c_out, gate_mode(c_in.n_qubits()))?);
    Ok(r)
}

/// Measure a control-flow wrapping run. Only the byte fields are filled.
pub fn measure_wrap_run(src: &SourceBlock, emitted: &str, method: &str, input_id: &str) -> Report {
    let mut r = Report::blank(method, input_id);
    r.bytes_before = src.text.len();
    r.bytes_after = emitted.len();
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Table,
}

impl FromStr for ReportFormat {
    type Err = MetricsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "table" => Ok(ReportFormat::Table),
            other => Err(MetricsError::UnknownFormat(other.to_string())),
        }
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn pct(before: usize, after: usize) -> String {
    if before == 0 {
        "-".into()
    } else {
        format!("{:+.1}%", (after as f64 - before as f64) / before as f64 * 100.0)
    }
}

pub fn render_report(reports: &[Report], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(reports).expect("reports serialize"),
        ReportFormat::Table => {
            let header = [
                "method", "input", "depth", "gates", "bytes", "bytes +", "sim us", "equivalent",
            ];
            let rows: Vec<[String; 8]> = reports
                .iter()
                .map(|r| {
                    let total = |g: &Option<GateCounts>| g.as_ref().map(|g| g.total);
                    [
                        r.method.clone(),
                        r.input_id.clone(),
                        format!("{} -> {}", opt(r.depth_before), opt(r.depth_after)),
                        format!("{} -> {}", opt(total(&r.gate_counts_before)), opt(total(&r.gate_counts_after))),
                        format!("{} -> {}", r.bytes_before, r.bytes_after),
                        pct(r.bytes_before, r.bytes_after),
                        format!("{} -> {}", opt(r.sim_wall_time_before_us), opt(r.sim_wall_time_after_us)),
                        r.equivalence
                            .map_or("-".into(), |e| format!("{} ({:.12})", e.equivalent, e.fidelity)),
                    ]
                })
                .collect();
            let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
            for row in &rows {
                for (w, cell) in widths.iter_mut().zip(row) {
                    *w = (*w).max(cell.chars().count());
                }
            }
            let mut out = String::new();
            let line = |cells: Vec<&str>, out: &mut String| {
                let padded: Vec<String> = cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:<w$}"))
                    .collect();
                writeln!(out, "{}", padded.join("  ").trim_end()).unwrap();
            };
            line(header.to_vec(), &mut out);
            for row in &rows {
                line(row.iter().map(String::as_str).collect(), &mut out);
            }
            out
        }
    }
}

/// Parse a JSON array of reports.
pub fn parse_reports(text: &str) -> Result<Vec<Report>, serde_json::Error> {
    serde_json::from_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateKind;

    fn bell() -> Circuit {
        let mut c = Circuit::new(2, 2);
        c.gate(GateKind::H, &[0]).gate(GateKind::Cx, &[0, 1]).measure(0, 0).measure(1, 1);
        c
    }

    #[test]
    fn identity_run_has_zero_deltas() {
        let r = measure_circuit_run(&bell(), &bell(), "none", "bell", None).unwrap();
        assert_eq!(r.depth_before, r.depth_after);
        assert_eq!(r.bytes_before, r.bytes_after);
        let e = r.equivalence.unwrap();
        assert!(e.equivalent);
        assert!((e.fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_and_empty() {
        let r = measure_circuit_run(&bell(), &bell(), "none", "bell", Some(3)).unwrap();
        let text = render_report(std::slice::from_ref(&r), ReportFormat::Json);
        assert_eq!(parse_reports(&text).unwrap(), vec![r]);
        assert_eq!(render_report(&[], ReportFormat::Json), "[]");
    }

    #[test]
    fn table_rows() {
        let src = SourceBlock::new("x = 1\n", "python").unwrap();
        let r = measure_wrap_run(&src, "a much longer emitted program\n", "wrap:bell", "p");
        let t = render_report(&[r.clone(), r], ReportFormat::Table);
        assert_eq!(t.lines().count(), 3);
        assert!(t.lines().nth(1).unwrap().starts_with("wrap:bell"));
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
