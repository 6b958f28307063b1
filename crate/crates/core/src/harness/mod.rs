//! Pipeline orchestration, stage persistence and throughput records.
//!
//! Each stage writes its manifest only after its kernel has finished, and
//! rerunning a stage removes the manifests of every stage downstream of it.
//! A later kernel therefore never sees partial output of an earlier one,
//! whether the stages run fused in one process or as separate commands.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use log::info;
use serde::{Deserialize, Serialize};

pub use report::{emit_report, human_bytes, write_report, ReportFormat};

use crate::edge_io::{default_num_files, write_edges, EdgeManifest, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::filter::{run_kernel2, FilterStats, Kernel2Output, StochasticMatrix};
use crate::graph_gen::{estimate_memory_bytes, generate_edges, GenConfig, DEFAULT_BYTES_PER_EDGE};
use crate::oracle::{self, dense_pagerank_matrix_capped};
use crate::pagerank::{self, run_kernel3, run_to_convergence, Kernel3Output, PageRankConfig};
use crate::sort::{sort_edges, SortStrategy};
use crate::timing::{rate, Stopwatch};

pub const DEFAULT_SCALE: u32 = 10;
pub const DATA_DIR_ENV: &str = "PRPIPE_DATA_DIR";

/// Share of physical memory used for the default sort budget and for the
/// suggested target scale.
pub const MEMORY_FRACTION: f64 = 0.25;

const FALLBACK_MEMORY_BYTES: u64 = 4 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    /// Allowed normalized 1-norm distance between the two eigenvectors.
    pub tol: f64,
    /// Stopping tolerance for both the sparse and the dense iteration.
    pub solver_tol: f64,
    pub max_iters: u32,
    pub dense_cap: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            tol: oracle::DEFAULT_TOLERANCE,
            solver_tol: 1e-12,
            max_iters: oracle::DEFAULT_MAX_ITERS,
            dense_cap: oracle::DEFAULT_DENSE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub scale: u32,
    pub edge_factor: u64,
    pub seed: u64,
    /// Shards per stage; `None` picks `max(1, ceil(M / 2^20))`.
    pub num_files: Option<usize>,
    pub data_dir: PathBuf,
    /// Kernel 1 budget; `None` is a quarter of physical memory.
    pub memory_budget_bytes: Option<u64>,
    pub iterations: u32,
    pub damping: f64,
    pub validate: bool,
    pub validation: ValidationConfig,
    /// Where to dump the final rank vector, if anywhere.
    pub rank_output: Option<PathBuf>,
}

impl BenchConfig {
    pub fn new(scale: u32, seed: u64, data_dir: impl Into<PathBuf>) -> Self {
        BenchConfig {
            scale,
            edge_factor: crate::graph_gen::DEFAULT_EDGE_FACTOR,
            seed,
            num_files: None,
            data_dir: data_dir.into(),
            memory_budget_bytes: None,
            iterations: pagerank::DEFAULT_ITERATIONS,
            damping: pagerank::DEFAULT_DAMPING,
            validate: false,
            validation: ValidationConfig::default(),
            rank_output: None,
        }
    }

    pub fn gen_config(&self) -> GenConfig {
        GenConfig::new(self.scale, self.seed).with_edge_factor(self.edge_factor)
    }

    pub fn pagerank_config(&self) -> PageRankConfig {
        PageRankConfig {
            damping: self.damping,
            iterations: self.iterations,
            seed: self.seed,
        }
    }

    pub fn validate_config(&self) -> Result<()> {
        self.gen_config().validate()?;
        self.pagerank_config().validate()?;
        if self.num_files == Some(0) {
            return Err(Error::config("num_files must be at least 1"));
        }
        if self.memory_budget_bytes == Some(0) {
            return Err(Error::config("memory budget must be positive"));
        }
        Ok(())
    }

    pub fn memory_budget(&self) -> u64 {
        self.memory_budget_bytes.unwrap_or_else(default_memory_budget)
    }

    fn num_files_for(&self, total_edges: u64) -> usize {
        self.num_files.unwrap_or_else(|| default_num_files(total_edges))
    }
}

/// Physical memory from `/proc/meminfo`, if readable.
pub fn detect_total_memory() -> Option<u64> {
    let info = fs::read_to_string("/proc/meminfo").ok()?;
    let line = info.lines().find(|l| l.starts_with("MemTotal:"))?;
    let kib: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kib * 1024)
}

pub fn default_memory_budget() -> u64 {
    let total = detect_total_memory().unwrap_or(FALLBACK_MEMORY_BYTES);
    ((total as f64 * MEMORY_FRACTION) as u64).max(1)
}

/// Largest scale whose edge data stays within the memory fraction of `ram`.
pub fn target_scale(ram_bytes: u64, edge_factor: u64) -> Option<u32> {
    let limit = (ram_bytes as f64 * MEMORY_FRACTION) as u64;
    (1..63)
        .take_while(|&s| {
            let config = GenConfig::new(s, 0).with_edge_factor(edge_factor);
            estimate_memory_bytes(&config, DEFAULT_BYTES_PER_EDGE).is_ok_and(|b| b <= limit)
        })
        .last()
}

/// One-line footprint summary, printed as advice only.
pub fn sizing_advice(config: &BenchConfig) -> String {
    let gen = config.gen_config();
    let footprint = estimate_memory_bytes(&gen, DEFAULT_BYTES_PER_EDGE)
        .map(human_bytes)
        .unwrap_or_else(|_| "overflow".into());
    match detect_total_memory() {
        Some(ram) => format!(
            "edge data ~{footprint} at scale {}; ~25% of {} RAM suggests scale {}",
            config.scale,
            human_bytes(ram),
            target_scale(ram, config.edge_factor).map_or("-".into(), |s| s.to_string()),
        ),
        None => format!("edge data ~{footprint} at scale {}", config.scale),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Generated,
    Sorted,
}

impl Stage {
    pub fn dir_name(self) -> &'static str {
        match self {
            Stage::Generated => "k0-edges",
            Stage::Sorted => "k1-sorted",
        }
    }

    pub fn dir(self, data_dir: &Path) -> PathBuf {
        data_dir.join(self.dir_name())
    }

    fn downstream(self) -> &'static [Stage] {
        match self {
            Stage::Generated => &[Stage::Generated, Stage::Sorted],
            Stage::Sorted => &[Stage::Sorted],
        }
    }
}

/// Loads a stage's manifest; a missing one names the expected path.
pub fn load_stage(data_dir: &Path, stage: Stage) -> Result<EdgeManifest> {
    EdgeManifest::load(&stage.dir(data_dir).join(MANIFEST_FILE))
}

fn invalidate_from(data_dir: &Path, stage: Stage) -> Result<()> {
    for s in stage.downstream() {
        let path = s.dir(data_dir).join(MANIFEST_FILE);
        match fs::remove_file(&path) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(Error::io(path, e)),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRecord {
    pub kernel: u8,
    pub name: String,
    /// Edges in the pipeline (`M`).
    pub edges: u64,
    /// Edges processed: `M`, or `iterations · M` for kernel 3.
    pub work: u64,
    pub elapsed_seconds: f64,
    pub rate_edges_per_sec: f64,
    /// Kernel 0 is reported but never scored.
    pub scoring: bool,
}

impl KernelRecord {
    pub fn new(kernel: u8, edges: u64, work: u64, elapsed: Duration) -> Self {
        let name = match kernel {
            0 => "generate",
            1 => "sort",
            2 => "filter",
            _ => "pagerank",
        };
        KernelRecord {
            kernel,
            name: name.into(),
            edges,
            work,
            elapsed_seconds: elapsed.as_secs_f64(),
            rate_edges_per_sec: rate(work, elapsed),
            scoring: kernel != 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub timestamp_unix: u64,
    pub seed: u64,
    pub scale: u32,
    pub edge_factor: u64,
    pub num_vertices: u64,
    pub num_edges: u64,
    pub iterations: u32,
    pub damping: f64,
    pub num_files: usize,
    pub memory_budget_bytes: u64,
    pub data_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortPath {
    InMemory,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortSummary {
    pub path: SortPath,
    pub runs: usize,
    pub merge_passes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub total_count: u64,
    pub nnz_built: usize,
    pub nnz_filtered: usize,
    pub max_in_degree: u64,
    pub zeroed_columns: usize,
    pub dangling_rows: usize,
}

impl From<&FilterStats> for FilterSummary {
    fn from(s: &FilterStats) -> Self {
        FilterSummary {
            total_count: s.total_count,
            nnz_built: s.nnz_built,
            nnz_filtered: s.nnz_filtered,
            max_in_degree: s.max_in_degree,
            zeroed_columns: s.zeroed_columns,
            dangling_rows: s.dangling_rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageRankSummary {
    pub initial_mass: f64,
    pub final_mass: f64,
}

/// Invariants checked after each kernel, outside its timed region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub performed: bool,
    pub tol: f64,
    pub passed: bool,
    pub distance: Option<f64>,
    pub sparse_iterations: Option<u32>,
    pub dense_iterations: Option<u32>,
    pub note: Option<String>,
}

impl ValidationRecord {
    fn skipped(tol: f64, note: Option<String>) -> Self {
        ValidationRecord {
            performed: false,
            tol,
            passed: false,
            distance: None,
            sparse_iterations: None,
            dense_iterations: None,
            note,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Succeeded,
    Failed { stage: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub metadata: RunMetadata,
    pub kernels: Vec<KernelRecord>,
    pub sort: Option<SortSummary>,
    pub filter: Option<FilterSummary>,
    pub pagerank: Option<PageRankSummary>,
    pub invariants: Vec<InvariantCheck>,
    pub validation: ValidationRecord,
    pub status: RunStatus,
}

impl BenchReport {
    /// Succeeded, every invariant held and validation (if run) passed.
    pub fn passed(&self) -> bool {
        self.status == RunStatus::Succeeded
            && self.invariants.iter().all(|c| c.passed)
            && (!self.validation.performed || self.validation.passed)
    }

    pub fn kernel(&self, kernel: u8) -> Option<&KernelRecord> {
        self.kernels.iter().find(|k| k.kernel == kernel)
    }

    fn check(&mut self, name: &str, passed: bool) {
        self.invariants.push(InvariantCheck {
            name: name.into(),
            passed,
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// All four kernels fused, plus validation when requested.
    Run,
    Generate,
    Sort,
    Filter,
    /// Rebuilds the matrix from the sorted stage, then runs kernel 3.
    PageRank,
    /// Rebuilds the matrix from the sorted stage and runs the oracle.
    Validate,
}

/// Artifacts of a run that tests and callers may inspect.
#[derive(Debug, Default)]
pub struct RunArtifacts {
    pub generated: Option<EdgeManifest>,
    pub sorted: Option<EdgeManifest>,
    pub matrix: Option<StochasticMatrix>,
    pub rank: Option<pagerank::RankVector>,
    pub mass_history: Vec<f64>,
}

pub fn run_pipeline(config: &BenchConfig) -> Result<BenchReport> {
    execute(config, Command::Run).map(|(report, _)| report)
}

/// Runs `command`. Invalid configuration and missing prerequisite manifests
/// are errors; a kernel failure yields a report whose status is `Failed`.
pub fn execute(config: &BenchConfig, command: Command) -> Result<(BenchReport, RunArtifacts)> {
    config.validate_config()?;
    let gen = config.gen_config();
    let (num_vertices, num_edges) = (gen.num_vertices()?, gen.num_edges()?);

    let prerequisite = match command {
        Command::Run | Command::Generate => None,
        Command::Sort => Some(load_stage(&config.data_dir, Stage::Generated)?),
        Command::Filter | Command::PageRank | Command::Validate => {
            Some(load_stage(&config.data_dir, Stage::Sorted)?)
        }
    };

    let mut report = BenchReport {
        metadata: RunMetadata {
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            seed: config.seed,
            scale: config.scale,
            edge_factor: config.edge_factor,
            num_vertices,
            num_edges,
            iterations: config.iterations,
            damping: config.damping,
            num_files: config.num_files_for(num_edges),
            memory_budget_bytes: config.memory_budget(),
            data_dir: config.data_dir.clone(),
        },
        kernels: Vec::new(),
        sort: None,
        filter: None,
        pagerank: None,
        invariants: Vec::new(),
        validation: ValidationRecord::skipped(config.validation.tol, None),
        status: RunStatus::Succeeded,
    };
    if let Some(m) = &prerequisite {
        report.metadata.scale = m.scale;
        report.metadata.num_vertices = m.num_vertices();
        report.metadata.num_edges = m.total_edges;
        report.metadata.edge_factor = m.total_edges >> m.scale;
        report.metadata.num_files = config.num_files_for(m.total_edges);
    }

    let mut artifacts = RunArtifacts::default();
    if let Err((stage, error)) = run_stages(config, command, prerequisite, &mut report, &mut artifacts) {
        report.status = RunStatus::Failed {
            stage: stage.into(),
            message: error.to_string(),
        };
    }
    Ok((report, artifacts))
}

type StageResult<T> = std::result::Result<T, (&'static str, Error)>;

fn at(stage: &'static str) -> impl FnOnce(Error) -> (&'static str, Error) {
    move |e| (stage, e)
}

fn run_stages(
    config: &BenchConfig,
    command: Command,
    prerequisite: Option<EdgeManifest>,
    report: &mut BenchReport,
    artifacts: &mut RunArtifacts,
) -> StageResult<()> {
    let data_dir = &config.data_dir;
    let mut manifest = prerequisite;

    if matches!(command, Command::Run | Command::Generate) {
        invalidate_from(data_dir, Stage::Generated).map_err(at("generate"))?;
        let (m, record) = kernel0(config).map_err(at("generate"))?;
        info!("kernel 0: {:.3} s", record.elapsed_seconds);
        report.kernels.push(record);
        report.check("generated edge count", m.total_edges == report.metadata.num_edges);
        artifacts.generated = Some(m.clone());
        manifest = Some(m);
        if command == Command::Generate {
            return Ok(());
        }
    }

    if matches!(command, Command::Run | Command::Sort) {
        let input = manifest.take().expect("kernel 1 input");
        invalidate_from(data_dir, Stage::Sorted).map_err(at("sort"))?;
        let out_dir = Stage::Sorted.dir(data_dir);
        let clock = Stopwatch::start();
        let outcome = sort_edges(&input, &out_dir, report.metadata.num_files, report.metadata.memory_budget_bytes)
            .map_err(at("sort"))?;
        let elapsed = clock.elapsed();
        let m = input.total_edges;
        report.kernels.push(KernelRecord::new(1, m, m, elapsed));
        info!("kernel 1: {:.3} s ({:?})", elapsed.as_secs_f64(), outcome.strategy);
        report.sort = Some(match outcome.strategy {
            SortStrategy::InMemory => SortSummary {
                path: SortPath::InMemory,
                runs: 0,
                merge_passes: 0,
            },
            SortStrategy::External { runs, merge_passes } => SortSummary {
                path: SortPath::External,
                runs,
                merge_passes,
            },
        });
        report.check(
            "sorted output is ordered and complete",
            outcome.manifest.sorted_by_start && outcome.manifest.total_edges == m,
        );
        artifacts.sorted = Some(outcome.manifest.clone());
        if command == Command::Sort {
            return Ok(());
        }
        manifest = Some(outcome.manifest);
    }

    let sorted = manifest.expect("kernel 2 input");
    let Kernel2Output {
        matrix,
        stats,
        elapsed,
        ..
    } = run_kernel2(&sorted).map_err(at("filter"))?;
    let m = sorted.total_edges;
    report.kernels.push(KernelRecord::new(2, m, m, elapsed));
    info!("kernel 2: {:.3} s", elapsed.as_secs_f64());
    report.check("matrix entries sum to M", stats.total_count == m);
    report.check("non-empty rows sum to 1", rows_are_stochastic(&matrix));
    report.filter = Some(FilterSummary::from(&stats));

    match command {
        Command::Run | Command::PageRank => {
            let pr = config.pagerank_config();
            let Kernel3Output {
                rank,
                mass_history,
                elapsed,
                ..
            } = run_kernel3(&matrix, &pr, m).map_err(at("pagerank"))?;
            let work = u64::from(pr.iterations).saturating_mul(m);
            report.kernels.push(KernelRecord::new(3, m, work, elapsed));
            info!("kernel 3: {:.3} s", elapsed.as_secs_f64());
            report.check(
                "rank mass non-increasing within (0, 1]",
                mass_is_dissipative(&mass_history),
            );
            report.pagerank = Some(PageRankSummary {
                initial_mass: mass_history[0],
                final_mass: *mass_history.last().expect("initial mass"),
            });
            if let Some(path) = &config.rank_output {
                pagerank::write_rank_tsv(path, &rank).map_err(at("pagerank"))?;
            }
            artifacts.rank = Some(rank);
            artifacts.mass_history = mass_history;
        }
        Command::Filter | Command::Validate => {}
        Command::Generate | Command::Sort => unreachable!(),
    }

    if command == Command::Validate || (command == Command::Run && config.validate) {
        report.validation = validation_stage(config, &matrix).map_err(at("validate"))?;
    }
    artifacts.matrix = Some(matrix);
    Ok(())
}

fn kernel0(config: &BenchConfig) -> Result<(EdgeManifest, KernelRecord)> {
    let gen = config.gen_config();
    let dir = Stage::Generated.dir(&config.data_dir);
    let clock = Stopwatch::start();
    let generator = generate_edges(&gen)?;
    let m = generator.num_edges();
    let manifest = write_edges(generator.edges(), &dir, config.num_files_for(m), gen.scale)?;
    let elapsed = clock.elapsed();
    Ok((manifest, KernelRecord::new(0, m, m, elapsed)))
}

pub fn rows_are_stochastic(a: &StochasticMatrix) -> bool {
    let values_ok = a.values().iter().all(|&x| x > 0.0 && x <= 1.0);
    values_ok
        && (0..a.n()).all(|u| {
            let w = &a.row_offsets()[u..u + 2];
            w[0] == w[1] || (a.row_sum(u) - 1.0).abs() <= 1e-12
        })
}

pub fn mass_is_dissipative(history: &[f64]) -> bool {
    history.windows(2).all(|w| w[1] <= w[0]) && history.iter().all(|&s| s > 0.0 && s <= 1.0 + 1e-12)
}

/// Converged sparse iteration against the dense eigenvector.
pub fn validation_stage(config: &BenchConfig, matrix: &StochasticMatrix) -> Result<ValidationRecord> {
    let v = &config.validation;
    if matrix.n() > v.dense_cap {
        return Ok(ValidationRecord::skipped(
            v.tol,
            Some(format!("n = {} exceeds the dense cap of {}", matrix.n(), v.dense_cap)),
        ));
    }
    let sparse = run_to_convergence(matrix, config.damping, v.solver_tol, v.max_iters, config.seed)?;
    let g = dense_pagerank_matrix_capped(matrix, config.damping, v.dense_cap)?;
    let dense = oracle::principal_eigenvector(&g, v.solver_tol, v.max_iters)?;
    let distance = oracle::normalized_l1_distance(sparse.rank.values(), &dense.vector)?;
    let mut notes = Vec::new();
    if !sparse.converged {
        notes.push(format!("sparse iteration stopped at residual {:e}", sparse.residual));
    }
    if !dense.converged {
        notes.push(format!("dense iteration stopped at residual {:e}", dense.residual));
    }
    Ok(ValidationRecord {
        performed: true,
        tol: v.tol,
        passed: sparse.converged && dense.converged && distance <= v.tol,
        distance: Some(distance),
        sparse_iterations: Some(sparse.iterations),
        dense_iterations: Some(dense.iterations),
        note: (!notes.is_empty()).then(|| notes.join("; ")),
    })
}
