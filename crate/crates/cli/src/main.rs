use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use prpipe_core::harness::{self, execute, sizing_advice, Command, RunStatus, DATA_DIR_ENV};
use prpipe_core::{emit_report, BenchConfig, ReportFormat};

/// PageRank pipeline benchmark: generate, sort, filter, rank.
#[derive(Debug, Parser)]
#[command(name = "prpipe", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    #[command(flatten)]
    opts: Opts,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run kernels 0 through 3 back to back.
    Run,
    /// Kernel 0: generate the edge list into <data-dir>/k0-edges.
    Generate,
    /// Kernel 1: sort <data-dir>/k0-edges into <data-dir>/k1-sorted.
    Sort,
    /// Kernel 2: build and filter the matrix from <data-dir>/k1-sorted.
    Filter,
    /// Kernel 3: rebuild the matrix from <data-dir>/k1-sorted and run PageRank.
    Pagerank,
    /// Compare converged PageRank on <data-dir>/k1-sorted with the dense eigenvector.
    Validate,
}

#[derive(Debug, Args)]
struct Opts {
    /// log2 of the number of vertices.
    #[arg(long, global = true, default_value_t = harness::DEFAULT_SCALE)]
    scale: u32,

    /// Average edges per vertex.
    #[arg(long, global = true, default_value_t = 16)]
    edge_factor: u64,

    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Files per stage [default: one per 2^20 edges].
    #[arg(long, global = true)]
    num_files: Option<usize>,

    #[arg(long, global = true, env = DATA_DIR_ENV, default_value = "prpipe-data")]
    data_dir: PathBuf,

    /// Kernel 1 memory budget in bytes, with an optional K/M/G suffix
    /// [default: 25% of RAM].
    #[arg(long, global = true, value_parser = parse_bytes)]
    memory_budget: Option<u64>,

    #[arg(long, global = true, default_value_t = 20)]
    iterations: u32,

    #[arg(long, global = true, default_value_t = 0.85)]
    damping: f64,

    /// Append the dense eigenvector check to `run`.
    #[arg(long, global = true)]
    validate: bool,

    /// Allowed normalized 1-norm distance for validation.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Report format: json or tsv [default: tsv on stdout, json in files].
    #[arg(long, global = true)]
    format: Option<ReportFormat>,

    /// Dump the final rank vector as `label TAB rank` lines.
    #[arg(long, global = true)]
    rank_out: Option<PathBuf>,
}

fn parse_bytes(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let (digits, shift) = match s.chars().last().map(|c| c.to_ascii_uppercase()) {
        Some('K') => (&s[..s.len() - 1], 10),
        Some('M') => (&s[..s.len() - 1], 20),
        Some('G') => (&s[..s.len() - 1], 30),
        Some('T') => (&s[..s.len() - 1], 40),
        _ => (s, 0),
    };
    let value: u64 = digits.parse().map_err(|_| format!("invalid byte count {s:?}"))?;
    value
        .checked_mul(1u64 << shift)
        .filter(|&b| b > 0)
        .ok_or_else(|| format!("byte count {s:?} must be positive and fit in 64 bits"))
}

fn config(opts: &Opts) -> BenchConfig {
    let mut config = BenchConfig::new(opts.scale, opts.seed, &opts.data_dir);
    config.edge_factor = opts.edge_factor;
    config.num_files = opts.num_files;
    config.memory_budget_bytes = opts.memory_budget;
    config.iterations = opts.iterations;
    config.damping = opts.damping;
    config.validate = opts.validate;
    config.validation.tol = opts.tol;
    config.rank_output = opts.rank_out.clone();
    config
}

fn run(cli: Cli) -> Result<bool> {
    let config = config(&cli.opts);
    let command = match cli.command {
        Cmd::Run => Command::Run,
        Cmd::Generate => Command::Generate,
        Cmd::Sort => Command::Sort,
        Cmd::Filter => Command::Filter,
        Cmd::Pagerank => Command::PageRank,
        Cmd::Validate => Command::Validate,
    };
    if matches!(command, Command::Run | Command::Generate) {
        eprintln!("{}", sizing_advice(&config));
    }
    if config.rank_output.is_some() && !matches!(command, Command::Run | Command::PageRank) {
        bail!("--rank-out only applies to `run` and `pagerank`");
    }

    let (report, _) = execute(&config, command)?;
    info!("data directory {}", config.data_dir.display());

    match &cli.opts.output {
        Some(path) => {
            let format = cli.opts.format.unwrap_or(ReportFormat::Json);
            harness::write_report(&report, format, path)
                .with_context(|| format!("writing report to {}", path.display()))?;
            eprint!("{}", emit_report(&report, ReportFormat::Tsv));
        }
        None => print!("{}", emit_report(&report, cli.opts.format.unwrap_or(ReportFormat::Tsv))),
    }

    if let RunStatus::Failed { stage, message } = &report.status {
        eprintln!("error: {stage} failed: {message}");
    }
    for check in report.invariants.iter().filter(|c| !c.passed) {
        eprintln!("error: invariant violated: {}", check.name);
    }
    let v = &report.validation;
    if v.performed {
        eprintln!(
            "validation: {} (distance {:e}, tol {:e})",
            if v.passed { "passed" } else { "FAILED" },
            v.distance.unwrap_or(f64::NAN),
            v.tol
        );
    } else if let Some(note) = &v.note {
        eprintln!("validation skipped: {note}");
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_suffixes() {
        assert_eq!(parse_bytes("1024"), Ok(1024));
        assert_eq!(parse_bytes("64K"), Ok(64 << 10));
        assert_eq!(parse_bytes("1g"), Ok(1 << 30));
        assert!(parse_bytes("0").is_err());
        assert!(parse_bytes("12Q").is_err());
        assert!(parse_bytes("99999999999T").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
