//! Sharded TSV edge files, the handoff format between kernels 0, 1 and 2.
//!
//! Every edge is written as `u TAB v LF` in ASCII decimal, including the last
//! one. There are no headers and no compression. The reader tolerates a
//! missing final LF and nothing else. A `manifest.json` sidecar lists the
//! files in order along with their edge counts.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_gen::Edge;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Edges per file under the default sharding.
pub const DEFAULT_EDGES_PER_FILE: u64 = 1 << 20;

const IO_BUFFER: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeManifest {
    pub directory: PathBuf,
    pub files: Vec<String>,
    pub edge_counts: Vec<u64>,
    pub total_edges: u64,
    pub sorted_by_start: bool,
    pub scale: u32,
}

impl EdgeManifest {
    pub fn num_vertices(&self) -> u64 {
        1u64 << self.scale
    }

    pub fn paths(&self) -> impl Iterator<Item = PathBuf> + '_ {
        self.files.iter().map(|f| self.directory.join(f))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.directory.join(MANIFEST_FILE)
    }

    /// Checks the count and ordering-independent invariants.
    pub fn check(&self) -> Result<()> {
        let fail = |message: String| Error::Manifest {
            path: self.manifest_path(),
            message,
        };
        if self.scale >= 64 {
            return Err(fail(format!("scale {} is out of range", self.scale)));
        }
        if self.files.is_empty() {
            return Err(fail("no files listed".into()));
        }
        if self.files.len() != self.edge_counts.len() {
            return Err(fail(format!(
                "{} files but {} edge counts",
                self.files.len(),
                self.edge_counts.len()
            )));
        }
        let sum: u64 = self.edge_counts.iter().sum();
        if sum != self.total_edges {
            return Err(fail(format!(
                "file counts sum to {sum}, total_edges is {}",
                self.total_edges
            )));
        }
        if self.total_edges > 0 && self.edge_counts.contains(&0) {
            return Err(fail("empty file in a non-empty edge list".into()));
        }
        Ok(())
    }

    /// Writes `manifest.json` into the manifest's directory.
    pub fn save(&self) -> Result<PathBuf> {
        let path = self.manifest_path();
        let json = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.clone(),
            source,
        })?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Loads a manifest from a directory or from the JSON file itself. The
    /// `directory` field is replaced by the directory the manifest was found
    /// in, so stage directories can be moved as a whole.
    pub fn load(location: &Path) -> Result<Self> {
        let path = if location.is_dir() {
            location.join(MANIFEST_FILE)
        } else {
            location.to_path_buf()
        };
        if !path.is_file() {
            return Err(Error::MissingManifest(path));
        }
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let mut manifest: EdgeManifest =
            serde_json::from_slice(&bytes).map_err(|source| Error::Json {
                path: path.clone(),
                source,
            })?;
        if let Some(dir) = path.parent() {
            manifest.directory = dir.to_path_buf();
        }
        manifest.check()?;
        Ok(manifest)
    }
}

/// `max(1, ceil(M / 2^20))`.
pub fn default_num_files(total_edges: u64) -> usize {
    total_edges.div_ceil(DEFAULT_EDGES_PER_FILE).max(1) as usize
}

pub fn shard_file_name(index: usize) -> String {
    format!("edges-{index:05}.tsv")
}

/// Contiguous split of `total` edges into `num_files` nearly equal shards.
fn shard_counts(total: u64, num_files: usize) -> Vec<u64> {
    let files = num_files as u128;
    let total = total as u128;
    (0..files)
        .map(|i| ((i + 1) * total / files - i * total / files) as u64)
        .collect()
}

/// Appends one `u\tv\n` record.
pub fn write_edge_line<W: Write>(out: &mut W, edge: Edge) -> std::io::Result<()> {
    let mut buf = itoa::Buffer::new();
    out.write_all(buf.format(edge.u).as_bytes())?;
    out.write_all(b"\t")?;
    out.write_all(buf.format(edge.v).as_bytes())?;
    out.write_all(b"\n")
}

/// Streams a known number of edges into `num_files` shards.
#[derive(Debug)]
pub struct ShardedWriter {
    directory: PathBuf,
    scale: u32,
    counts: Vec<u64>,
    file_index: usize,
    written_in_file: u64,
    current: Option<BufWriter<File>>,
    total_written: u64,
    total_edges: u64,
    last_u: u64,
    sorted: bool,
}

impl ShardedWriter {
    pub fn create(directory: &Path, num_files: usize, total_edges: u64, scale: u32) -> Result<Self> {
        if num_files < 1 {
            return Err(Error::config("num_files must be at least 1"));
        }
        if total_edges > 0 && num_files as u64 > total_edges {
            return Err(Error::config(format!(
                "{num_files} files requested for only {total_edges} edges"
            )));
        }
        if total_edges == 0 && num_files != 1 {
            return Err(Error::config("an empty edge list is written as a single file"));
        }
        fs::create_dir_all(directory).map_err(|e| Error::io(directory, e))?;
        Ok(ShardedWriter {
            directory: directory.to_path_buf(),
            scale,
            counts: shard_counts(total_edges, num_files),
            file_index: 0,
            written_in_file: 0,
            current: None,
            total_written: 0,
            total_edges,
            last_u: 0,
            sorted: true,
        })
    }

    fn path_of(&self, index: usize) -> PathBuf {
        self.directory.join(shard_file_name(index))
    }

    fn open(&self, index: usize) -> Result<BufWriter<File>> {
        let path = self.path_of(index);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(BufWriter::with_capacity(IO_BUFFER, file))
    }

    fn close_current(&mut self) -> Result<()> {
        if let Some(writer) = self.current.take() {
            let path = self.path_of(self.file_index);
            let file = writer.into_inner().map_err(|e| Error::io(&path, e.into_error()))?;
            file.sync_all().map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn push(&mut self, edge: Edge) -> Result<()> {
        if self.total_written == self.total_edges {
            return Err(Error::config(format!(
                "more than the declared {} edges were written",
                self.total_edges
            )));
        }
        if self.written_in_file == self.counts[self.file_index] {
            self.close_current()?;
            self.file_index += 1;
            self.written_in_file = 0;
        }
        if self.current.is_none() {
            self.current = Some(self.open(self.file_index)?);
        }
        let writer = self.current.as_mut().expect("shard is open");
        if let Err(e) = write_edge_line(writer, edge) {
            return Err(Error::io(self.path_of(self.file_index), e));
        }
        self.sorted &= edge.u >= self.last_u;
        self.last_u = edge.u;
        self.written_in_file += 1;
        self.total_written += 1;
        Ok(())
    }

    /// Flushes and syncs every shard and returns the manifest (not yet saved).
    /// `sorted_by_start` reflects the order the edges actually arrived in.
    pub fn finish(mut self) -> Result<EdgeManifest> {
        if self.total_written != self.total_edges {
            return Err(Error::config(format!(
                "declared {} edges but {} were written",
                self.total_edges, self.total_written
            )));
        }
        self.close_current()?;
        if self.total_edges == 0 {
            let file = self.open(0)?;
            let path = self.path_of(0);
            file.into_inner()
                .map_err(|e| Error::io(&path, e.into_error()))?
                .sync_all()
                .map_err(|e| Error::io(&path, e))?;
        }
        Ok(EdgeManifest {
            directory: self.directory.clone(),
            files: (0..self.counts.len()).map(shard_file_name).collect(),
            edge_counts: self.counts.clone(),
            total_edges: self.total_edges,
            sorted_by_start: self.sorted,
            scale: self.scale,
        })
    }
}

/// Writes `edges` as `num_files` contiguous shards and saves the manifest.
pub fn write_edges<I>(edges: I, directory: &Path, num_files: usize, scale: u32) -> Result<EdgeManifest>
where
    I: IntoIterator<Item = Edge>,
    I::IntoIter: ExactSizeIterator,
{
    let edges = edges.into_iter();
    let mut writer = ShardedWriter::create(directory, num_files, edges.len() as u64, scale)?;
    for edge in edges {
        writer.push(edge)?;
    }
    let manifest = writer.finish()?;
    manifest.save()?;
    Ok(manifest)
}

/// Parses one line (without its LF). Labels must lie in `[1, n]`.
fn parse_line(line: &[u8], n: u64) -> std::result::Result<Edge, String> {
    let tab = line
        .iter()
        .position(|&b| b == b'\t')
        .ok_or_else(|| "missing TAB separator".to_string())?;
    let u = parse_label(&line[..tab]).map_err(|m| format!("start vertex: {m}"))?;
    let v = parse_label(&line[tab + 1..]).map_err(|m| format!("end vertex: {m}"))?;
    if !(1..=n).contains(&u) || !(1..=n).contains(&v) {
        return Err(format!("edge ({u}, {v}) has a label outside [1, {n}]"));
    }
    Ok(Edge::new(u, v))
}

fn parse_label(token: &[u8]) -> std::result::Result<u64, String> {
    if token.is_empty() {
        return Err("empty token".into());
    }
    let mut value: u64 = 0;
    for &b in token {
        if !b.is_ascii_digit() {
            return Err(format!("non-digit byte 0x{b:02x}"));
        }
        value = value
            .checked_mul(10)
            .and_then(|x| x.checked_add(u64::from(b - b'0')))
            .ok_or_else(|| "label overflows u64".to_string())?;
    }
    Ok(value)
}

/// Reads one TSV edge file.
#[derive(Debug)]
pub struct EdgeFileReader {
    path: PathBuf,
    reader: BufReader<File>,
    num_vertices: u64,
    line: u64,
    buf: Vec<u8>,
    failed: bool,
}

impl EdgeFileReader {
    pub fn open(path: &Path, num_vertices: u64) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(EdgeFileReader {
            path: path.to_path_buf(),
            reader: BufReader::with_capacity(IO_BUFFER, file),
            num_vertices,
            line: 0,
            buf: Vec::with_capacity(48),
            failed: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn lines_read(&self) -> u64 {
        self.line
    }

    fn parse_error(&mut self, message: String) -> Error {
        self.failed = true;
        Error::Parse {
            path: self.path.clone(),
            line: self.line,
            message,
        }
    }
}

impl Iterator for EdgeFileReader {
    type Item = Result<Edge>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        self.buf.clear();
        match self.reader.read_until(b'\n', &mut self.buf) {
            Ok(0) => return None,
            Ok(_) => {}
            Err(e) => {
                self.failed = true;
                return Some(Err(Error::io(&self.path, e)));
            }
        }
        self.line += 1;
        let line = self.buf.strip_suffix(b"\n").unwrap_or(&self.buf);
        match parse_line(line, self.num_vertices) {
            Ok(edge) => Some(Ok(edge)),
            Err(message) => Some(Err(self.parse_error(message))),
        }
    }
}

/// Streams every edge listed in a manifest, in file order, checking each
/// file's edge count against the manifest.
#[derive(Debug)]
pub struct EdgeReader<'a> {
    manifest: &'a EdgeManifest,
    next_file: usize,
    current: Option<EdgeFileReader>,
    done: bool,
}

impl EdgeReader<'_> {
    fn open_next(&mut self) -> Result<bool> {
        if self.next_file == self.manifest.files.len() {
            return Ok(false);
        }
        let path = self.manifest.directory.join(&self.manifest.files[self.next_file]);
        self.current = Some(EdgeFileReader::open(&path, self.manifest.num_vertices())?);
        self.next_file += 1;
        Ok(true)
    }

    fn count_mismatch(&self, file: &EdgeFileReader) -> Option<Error> {
        let expected = self.manifest.edge_counts[self.next_file - 1];
        (file.lines_read() != expected).then(|| Error::Manifest {
            path: self.manifest.manifest_path(),
            message: format!(
                "{} holds {} edges, manifest says {expected}",
                file.path().display(),
                file.lines_read()
            ),
        })
    }
}

impl Iterator for EdgeReader<'_> {
    type Item = Result<Edge>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            if let Some(file) = self.current.as_mut() {
                match file.next() {
                    Some(Ok(edge)) => {
                        let expected = self.manifest.edge_counts[self.next_file - 1];
                        if file.lines_read() > expected {
                            self.done = true;
                            let file = self.current.take().expect("open");
                            return self.count_mismatch(&file).map(Err);
                        }
                        return Some(Ok(edge));
                    }
                    Some(Err(e)) => {
                        self.done = true;
                        return Some(Err(e));
                    }
                    None => {
                        let file = self.current.take().expect("open");
                        if let Some(e) = self.count_mismatch(&file) {
                            self.done = true;
                            return Some(Err(e));
                        }
                    }
                }
            }
            match self.open_next() {
                Ok(true) => {}
                Ok(false) => self.done = true,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
        None
    }
}

/// Reads all edges of `manifest` in order.
pub fn read_edges(manifest: &EdgeManifest) -> Result<EdgeReader<'_>> {
    manifest.check()?;
    if let Some(missing) = manifest.paths().find(|p| !p.is_file()) {
        return Err(Error::Manifest {
            path: manifest.manifest_path(),
            message: format!("listed file {} does not exist", missing.display()),
        });
    }
    Ok(EdgeReader {
        manifest,
        next_file: 0,
        current: None,
        done: false,
    })
}
