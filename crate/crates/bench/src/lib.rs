//! Fixtures shared by the kernel benchmarks.

use prpipe_core::filter::{build_adjacency, in_degree, row_normalize, zero_columns};
use prpipe_core::graph_gen::{generate_edges, Edge, GenConfig};
use prpipe_core::StochasticMatrix;

pub const BENCH_SEED: u64 = 0x5eed;

/// All edges at `scale`, in generation order.
pub fn edges(scale: u32) -> Vec<Edge> {
    generate_edges(&GenConfig::new(scale, BENCH_SEED))
        .expect("valid scale")
        .edges()
        .collect()
}

/// Edges at `scale` sorted by start vertex.
pub fn sorted_edges(scale: u32) -> Vec<Edge> {
    let mut e = edges(scale);
    e.sort_by_key(|e| e.u);
    e
}

/// The kernel 2 result at `scale`, built in memory.
pub fn matrix(scale: u32) -> StochasticMatrix {
    let counts = build_adjacency(sorted_edges(scale).into_iter().map(Ok), 1 << scale).expect("sorted input");
    let filtered = zero_columns(&counts, &in_degree(&counts)).expect("matching degree vector");
    row_normalize(&filtered)
}
