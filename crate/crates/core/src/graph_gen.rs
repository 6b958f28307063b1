//! Kernel 0 edge generation.
//!
//! Edges are drawn with the R-MAT quadrant recursion: each of the `S` levels
//! picks one quadrant of the adjacency matrix with probabilities `(a, b, c, d)`,
//! fixing one bit of the start label and one bit of the end label. The result
//! is an approximately power-law graph with `N = 2^S` vertices and `M = k·N`
//! edges. Duplicates and self-loops are kept.
//!
//! Generation is split into fixed-size batches. Batch `i` is a pure function
//! of the configuration and `i`, so batches can be produced in any order or on
//! any thread and still concatenate to the same edge sequence.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EDGE_FACTOR: u64 = 16;

/// Table of run sizes reports memory at this many bytes per edge.
pub const DEFAULT_BYTES_PER_EDGE: u64 = 24;

/// Edges per generation batch.
pub const BATCH_EDGES: u64 = 1 << 16;

/// ChaCha stream reserved for the label permutation; batch `i` uses stream `i`.
const PERMUTATION_STREAM: u64 = u64::MAX;

/// A directed edge with 1-based vertex labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub u: u64,
    pub v: u64,
}

impl Edge {
    pub const fn new(u: u64, v: u64) -> Self {
        Edge { u, v }
    }
}

impl From<(u64, u64)> for Edge {
    fn from((u, v): (u64, u64)) -> Self {
        Edge { u, v }
    }
}

/// R-MAT quadrant probabilities: `a` top-left, `b` top-right, `c` bottom-left,
/// `d` bottom-right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Initiator {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Initiator {
    /// The Graph500 reference initiator.
    pub const GRAPH500: Initiator = Initiator {
        a: 0.57,
        b: 0.19,
        c: 0.19,
        d: 0.05,
    };

    pub fn validate(&self) -> Result<()> {
        let probs = [self.a, self.b, self.c, self.d];
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::config(format!(
                "initiator probabilities must be finite and non-negative, got {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!(
                "initiator probabilities must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

impl Default for Initiator {
    fn default() -> Self {
        Initiator::GRAPH500
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// log2 of the vertex count.
    pub scale: u32,
    /// Average edges per vertex.
    pub edge_factor: u64,
    pub seed: u64,
    pub initiator: Initiator,
    /// Apply a seeded random relabeling of `[1, N]` to every edge.
    pub permute_labels: bool,
}

impl GenConfig {
    pub fn new(scale: u32, seed: u64) -> Self {
        GenConfig {
            scale,
            edge_factor: DEFAULT_EDGE_FACTOR,
            seed,
            initiator: Initiator::GRAPH500,
            permute_labels: true,
        }
    }

    pub fn with_edge_factor(mut self, edge_factor: u64) -> Self {
        self.edge_factor = edge_factor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale < 1 {
            return Err(Error::config("scale must be at least 1"));
        }
        if self.edge_factor < 1 {
            return Err(Error::config("edge factor must be at least 1"));
        }
        self.initiator.validate()?;
        derived_sizes(self.scale, self.edge_factor).map(|_| ())
    }

    pub fn num_vertices(&self) -> Result<u64> {
        derived_sizes(self.scale, self.edge_factor).map(|(n, _)| n)
    }

    pub fn num_edges(&self) -> Result<u64> {
        derived_sizes(self.scale, self.edge_factor).map(|(_, m)| m)
    }
}

/// `(N, M) = (2^S, k·2^S)`.
pub fn derived_sizes(scale: u32, edge_factor: u64) -> Result<(u64, u64)> {
    let overflow = || Error::SizeOverflow { scale, edge_factor };
    let n = 1u64.checked_shl(scale).filter(|_| scale < 64).ok_or_else(overflow)?;
    let m = n.checked_mul(edge_factor).ok_or_else(overflow)?;
    Ok((n, m))
}

/// Footprint of the edge list at `bytes_per_edge` bytes per edge.
pub fn estimate_memory_bytes(config: &GenConfig, bytes_per_edge: u64) -> Result<u64> {
    if bytes_per_edge == 0 {
        return Err(Error::config("bytes per edge must be positive"));
    }
    let m = config.num_edges()?;
    m.checked_mul(bytes_per_edge).ok_or(Error::SizeOverflow {
        scale: config.scale,
        edge_factor: config.edge_factor,
    })
}

/// Deterministic batched R-MAT generator.
#[derive(Debug, Clone)]
pub struct EdgeGenerator {
    config: GenConfig,
    num_vertices: u64,
    num_edges: u64,
    // cumulative quadrant thresholds: a, a+b, a+b+c
    thresholds: [f64; 3],
    permutation: Option<Vec<u64>>,
}

impl EdgeGenerator {
    pub fn new(config: GenConfig) -> Result<Self> {
        config.validate()?;
        let (num_vertices, num_edges) = derived_sizes(config.scale, config.edge_factor)?;
        let Initiator { a, b, c, .. } = config.initiator;
        let permutation = if config.permute_labels {
            let len = usize::try_from(num_vertices)
                .map_err(|_| Error::config("vertex count does not fit in memory"))?;
            let mut labels: Vec<u64> = (1..=num_vertices).collect();
            debug_assert_eq!(labels.len(), len);
            labels.shuffle(&mut rng_for(config.seed, PERMUTATION_STREAM));
            Some(labels)
        } else {
            None
        };
        Ok(EdgeGenerator {
            config,
            num_vertices,
            num_edges,
            thresholds: [a, a + b, a + b + c],
            permutation,
        })
    }

    pub fn config(&self) -> &GenConfig {
        &self.config
    }

    pub fn num_vertices(&self) -> u64 {
        self.num_vertices
    }

    pub fn num_edges(&self) -> u64 {
        self.num_edges
    }

    pub fn num_batches(&self) -> u64 {
        self.num_edges.div_ceil(BATCH_EDGES)
    }

    /// Edges in batch `index`; the last batch may be short.
    pub fn batch_len(&self, index: u64) -> u64 {
        let start = index.saturating_mul(BATCH_EDGES);
        self.num_edges.saturating_sub(start).min(BATCH_EDGES)
    }

    /// Replaces the contents of `out` with batch `index`.
    pub fn fill_batch(&self, index: u64, out: &mut Vec<Edge>) {
        out.clear();
        let len = self.batch_len(index);
        out.reserve(len as usize);
        let mut rng = rng_for(self.config.seed, index);
        for _ in 0..len {
            let (u, v) = self.draw(&mut rng);
            out.push(self.label(u, v));
        }
    }

    pub fn batch(&self, index: u64) -> Vec<Edge> {
        let mut out = Vec::new();
        self.fill_batch(index, &mut out);
        out
    }

    /// Streams all `M` edges in batch order.
    pub fn edges(&self) -> Edges<'_> {
        Edges {
            generator: self,
            buffer: Vec::new(),
            pos: 0,
            next_batch: 0,
            remaining: self.num_edges,
        }
    }

    /// 0-based (row, column) from the quadrant recursion.
    fn draw(&self, rng: &mut ChaCha8Rng) -> (u64, u64) {
        let [a, ab, abc] = self.thresholds;
        let mut u = 0u64;
        let mut v = 0u64;
        for _ in 0..self.config.scale {
            let r: f64 = rng.random();
            u <<= 1;
            v <<= 1;
            if r < a {
                // top-left
            } else if r < ab {
                v |= 1;
            } else if r < abc {
                u |= 1;
            } else {
                u |= 1;
                v |= 1;
            }
        }
        (u, v)
    }

    fn label(&self, u: u64, v: u64) -> Edge {
        match &self.permutation {
            Some(p) => Edge::new(p[u as usize], p[v as usize]),
            None => Edge::new(u + 1, v + 1),
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Iterator over every generated edge, one batch buffered at a time.
#[derive(Debug)]
pub struct Edges<'a> {
    generator: &'a EdgeGenerator,
    buffer: Vec<Edge>,
    pos: usize,
    next_batch: u64,
    remaining: u64,
}

impl Iterator for Edges<'_> {
    type Item = Edge;

    fn next(&mut self) -> Option<Edge> {
        if self.remaining == 0 {
            return None;
        }
        if self.pos == self.buffer.len() {
            self.generator.fill_batch(self.next_batch, &mut self.buffer);
            self.next_batch += 1;
            self.pos = 0;
        }
        let edge = self.buffer[self.pos];
        self.pos += 1;
        self.remaining -= 1;
        Some(edge)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}

impl ExactSizeIterator for Edges<'_> {}

/// Builds a generator for `config`. Iterate it with [`EdgeGenerator::edges`].
pub fn generate_edges(config: &GenConfig) -> Result<EdgeGenerator> {
    EdgeGenerator::new(config.clone())
}
