use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::BenchReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    /// Whole report, key-addressable.
    #[default]
    Json,
    /// One row per kernel, for rate-versus-edges plots.
    Tsv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "tsv" => Ok(ReportFormat::Tsv),
            other => Err(Error::config(format!("unknown report format {other:?} (json, tsv)"))),
        }
    }
}

pub const TSV_HEADER: &str = "kernel\tname\tscoring\tedges\twork\telapsed_seconds\trate_edges_per_sec";

pub fn emit_report(report: &BenchReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Tsv => {
            let mut s = String::new();
            s.push_str(TSV_HEADER);
            s.push('\n');
            for k in &report.kernels {
                let _ = writeln!(
                    s,
                    "{}\t{}\t{}\t{}\t{}\t{:.9}\t{:.1}",
                    k.kernel, k.name, k.scoring, k.edges, k.work, k.elapsed_seconds, k.rate_edges_per_sec
                );
            }
            s
        }
    }
}

pub fn write_report(report: &BenchReport, format: ReportFormat, path: &Path) -> Result<()> {
    fs::write(path, emit_report(report, format)).map_err(|e| Error::io(path, e))
}

/// Decimal size truncated the way the run-size table prints it: whole MB
/// below a gigabyte, one decimal of GB above.
pub fn human_bytes(bytes: u64) -> String {
    const KB: u64 = 1_000;
    const MB: u64 = 1_000_000;
    const GB: u64 = 1_000_000_000;
    const TB: u64 = 1_000_000_000_000;
    if bytes >= TB {
        format!("{}.{}TB", bytes / TB, (bytes % TB) / (TB / 10))
    } else if bytes >= GB {
        format!("{}.{}GB", bytes / GB, (bytes % GB) / (GB / 10))
    } else if bytes >= MB {
        format!("{}MB", bytes / MB)
    } else if bytes >= KB {
        format!("{}KB", bytes / KB)
    } else {
        format!("{bytes}B")
    }
}

#[cfg(test)]
mod tests {
    use std::path::PathBuf;
    use std::time::Duration;

    use super::super::*;
    use super::*;

    fn report() -> BenchReport {
        BenchReport {
            metadata: RunMetadata {
                timestamp_unix: 1_700_000_000,
                seed: 7,
                scale: 10,
                edge_factor: 16,
                num_vertices: 1024,
                num_edges: 16_384,
                iterations: 20,
                damping: 0.85,
                num_files: 1,
                memory_budget_bytes: 1 << 30,
                data_dir: PathBuf::from("/tmp/data"),
            },
            kernels: vec![
                KernelRecord::new(0, 16_384, 16_384, Duration::from_millis(500)),
                KernelRecord::new(1, 16_384, 16_384, Duration::from_secs(2)),
            ],
            sort: None,
            filter: None,
            pagerank: None,
            invariants: vec![],
            validation: ValidationRecord::skipped(1e-8, None),
            status: RunStatus::Succeeded,
        }
    }

    #[test]
    fn tsv_rows() {
        let tsv = emit_report(&report(), ReportFormat::Tsv);
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], TSV_HEADER);
        assert_eq!(lines[1], "0\tgenerate\tfalse\t16384\t16384\t0.500000000\t32768.0");
        assert_eq!(lines[2], "1\tsort\ttrue\t16384\t16384\t2.000000000\t8192.0");
    }

    #[test]
    fn emission_is_deterministic() {
        let r = report();
        for format in [ReportFormat::Json, ReportFormat::Tsv] {
            assert_eq!(emit_report(&r, format), emit_report(&r.clone(), format));
        }
    }

    #[test]
    fn json_round_trips_and_flags_failure() {
        let mut r = report();
        r.status = RunStatus::Failed {
            stage: "sort".into(),
            message: "boom".into(),
        };
        let json = emit_report(&r, ReportFormat::Json);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["status"]["state"], "failed");
        assert_eq!(value["kernels"][1]["rate_edges_per_sec"], 8192.0);
        assert_eq!(serde_json::from_str::<BenchReport>(&json).unwrap(), r);
    }

    #[test]
    fn unwritable_destination() {
        let err = write_report(&report(), ReportFormat::Json, Path::new("/nonexistent/dir/report.json"));
        assert!(matches!(err, Err(Error::Io { .. })));
    }

    #[test]
    fn format_parsing() {
        assert_eq!("json".parse::<ReportFormat>().unwrap(), ReportFormat::Json);
        assert_eq!("TSV".parse::<ReportFormat>().unwrap(), ReportFormat::Tsv);
        assert!("xml".parse::<ReportFormat>().is_err());
    }

    #[test]
    fn byte_sizes() {
        assert_eq!(human_bytes(25_165_824), "25MB");
        assert_eq!(human_bytes(1_610_612_736), "1.6GB");
        assert_eq!(human_bytes(999), "999B");
    }
}
