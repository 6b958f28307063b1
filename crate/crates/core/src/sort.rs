//! Kernel 1: sort the edge list by start vertex.
//!
//! When the edges fit in the memory budget they are loaded and sorted in
//! place. Otherwise sorted runs of at most `budget / 16` edges are spilled to
//! disk in the same TSV format and combined with a k-way merge, in several
//! passes if there are more runs than the merge fan-in.
//!
//! Both paths are stable: ties on `u` keep their input order. The merge breaks
//! ties by run index and runs are formed in input order, so the out-of-core
//! result equals the in-memory one edge for edge.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::mem::size_of;
use std::path::{Path, PathBuf};

use log::debug;

use crate::edge_io::{read_edges, write_edge_line, EdgeFileReader, EdgeManifest, ShardedWriter};
use crate::error::{Error, Result};
use crate::graph_gen::Edge;

/// In-memory footprint of one edge.
pub const EDGE_BYTES: u64 = size_of::<Edge>() as u64;

pub const DEFAULT_MERGE_FAN_IN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortStrategy {
    InMemory,
    External { runs: usize, merge_passes: usize },
}

#[derive(Debug, Clone)]
pub struct SortOutcome {
    pub manifest: EdgeManifest,
    pub strategy: SortStrategy,
}

#[derive(Debug, Clone)]
pub struct SortOptions {
    pub num_files: usize,
    pub memory_budget_bytes: u64,
    pub merge_fan_in: usize,
    /// Where spill runs go; defaults to `<output_dir>/spill`.
    pub spill_dir: Option<PathBuf>,
}

impl SortOptions {
    pub fn new(num_files: usize, memory_budget_bytes: u64) -> Self {
        SortOptions {
            num_files,
            memory_budget_bytes,
            merge_fan_in: DEFAULT_MERGE_FAN_IN,
            spill_dir: None,
        }
    }
}

pub fn sort_edges(
    input: &EdgeManifest,
    output_dir: &Path,
    num_files: usize,
    memory_budget_bytes: u64,
) -> Result<SortOutcome> {
    sort_edges_with(input, output_dir, &SortOptions::new(num_files, memory_budget_bytes))
}

pub fn sort_edges_with(input: &EdgeManifest, output_dir: &Path, options: &SortOptions) -> Result<SortOutcome> {
    if options.memory_budget_bytes == 0 {
        return Err(Error::config("memory budget must be positive"));
    }
    if options.merge_fan_in < 2 {
        return Err(Error::config("merge fan-in must be at least 2"));
    }
    if same_dir(&input.directory, output_dir) {
        return Err(Error::config("sort output directory must differ from its input"));
    }
    let data_bytes = input.total_edges.saturating_mul(EDGE_BYTES);
    let (manifest, strategy) = if data_bytes <= options.memory_budget_bytes {
        (sort_in_memory(input, output_dir, options.num_files)?, SortStrategy::InMemory)
    } else {
        sort_external(input, output_dir, options)?
    };
    manifest.save()?;
    Ok(SortOutcome { manifest, strategy })
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => a == b,
    }
}

fn sort_in_memory(input: &EdgeManifest, output_dir: &Path, num_files: usize) -> Result<EdgeManifest> {
    let mut edges = Vec::with_capacity(input.total_edges as usize);
    for edge in read_edges(input)? {
        edges.push(edge?);
    }
    edges.sort_by_key(|e| e.u);
    let mut writer = ShardedWriter::create(output_dir, num_files, input.total_edges, input.scale)?;
    for edge in edges {
        writer.push(edge)?;
    }
    writer.finish()
}

fn sort_external(
    input: &EdgeManifest,
    output_dir: &Path,
    options: &SortOptions,
) -> Result<(EdgeManifest, SortStrategy)> {
    // Validate the output sharding before spending time on runs.
    let writer = ShardedWriter::create(output_dir, options.num_files, input.total_edges, input.scale)?;
    let spill_dir = options
        .spill_dir
        .clone()
        .unwrap_or_else(|| output_dir.join("spill"));
    fs::create_dir_all(&spill_dir).map_err(|e| Error::io(&spill_dir, e))?;

    let run_capacity = (options.memory_budget_bytes / EDGE_BYTES).max(1) as usize;
    let mut runs = form_runs(input, &spill_dir, run_capacity)?;
    let initial_runs = runs.len();
    debug!("formed {initial_runs} runs of up to {run_capacity} edges");

    let n = input.num_vertices();
    let mut passes = 0;
    while runs.len() > options.merge_fan_in {
        passes += 1;
        let mut next = Vec::with_capacity(runs.len().div_ceil(options.merge_fan_in));
        for (i, group) in runs.chunks(options.merge_fan_in).enumerate() {
            let path = spill_dir.join(format!("run-p{passes}-{i:05}.tsv"));
            let mut out = RunWriter::create(&path)?;
            merge_runs(group, n, |e| out.push(e))?;
            out.finish()?;
            for old in group {
                remove(old)?;
            }
            next.push(path);
        }
        runs = next;
    }

    passes += 1;
    let mut writer = writer;
    merge_runs(&runs, n, |e| writer.push(e))?;
    let manifest = writer.finish()?;
    for run in &runs {
        remove(run)?;
    }
    // only removes the directory if nothing else lives there
    let _ = fs::remove_dir(&spill_dir);

    Ok((
        manifest,
        SortStrategy::External {
            runs: initial_runs,
            merge_passes: passes,
        },
    ))
}

fn remove(path: &Path) -> Result<()> {
    fs::remove_file(path).map_err(|e| Error::io(path, e))
}

fn form_runs(input: &EdgeManifest, spill_dir: &Path, run_capacity: usize) -> Result<Vec<PathBuf>> {
    let mut runs = Vec::new();
    let mut buffer = Vec::with_capacity(run_capacity.min(input.total_edges as usize));
    let spill = |buffer: &mut Vec<Edge>, runs: &mut Vec<PathBuf>| -> Result<()> {
        buffer.sort_by_key(|e| e.u);
        let path = spill_dir.join(format!("run-p0-{:05}.tsv", runs.len()));
        let mut out = RunWriter::create(&path)?;
        for &edge in buffer.iter() {
            out.push(edge)?;
        }
        out.finish()?;
        buffer.clear();
        runs.push(path);
        Ok(())
    };
    for edge in read_edges(input)? {
        buffer.push(edge?);
        if buffer.len() == run_capacity {
            spill(&mut buffer, &mut runs)?;
        }
    }
    if !buffer.is_empty() {
        spill(&mut buffer, &mut runs)?;
    }
    Ok(runs)
}

struct RunWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl RunWriter {
    fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(RunWriter {
            path: path.to_path_buf(),
            out: BufWriter::with_capacity(1 << 16, file),
        })
    }

    fn push(&mut self, edge: Edge) -> Result<()> {
        write_edge_line(&mut self.out, edge).map_err(|e| Error::io(&self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Merges sorted runs, breaking ties on `u` by run position.
fn merge_runs<F>(runs: &[PathBuf], num_vertices: u64, mut sink: F) -> Result<()>
where
    F: FnMut(Edge) -> Result<()>,
{
    let mut readers = runs
        .iter()
        .map(|p| EdgeFileReader::open(p, num_vertices))
        .collect::<Result<Vec<_>>>()?;
    let mut heap = BinaryHeap::with_capacity(readers.len());
    for (i, reader) in readers.iter_mut().enumerate() {
        if let Some(edge) = reader.next().transpose()? {
            heap.push(Reverse((edge.u, i, edge.v)));
        }
    }
    while let Some(Reverse((u, i, v))) = heap.pop() {
        sink(Edge::new(u, v))?;
        if let Some(edge) = readers[i].next().transpose()? {
            heap.push(Reverse((edge.u, i, edge.v)));
        }
    }
    Ok(())
}
