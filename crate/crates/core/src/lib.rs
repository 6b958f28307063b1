//! Single-node implementation of the four-kernel PageRank pipeline benchmark.
//!
//! The pipeline is strictly sequential:
//!
//! * **Kernel 0** ([`graph_gen`], [`edge_io`]) generates an R-MAT edge list and
//!   writes it to TSV files. It is timed for information only.
//! * **Kernel 1** ([`sort`]) reads those files, sorts all edges by start vertex
//!   (in memory or out of core) and writes them back in the same format.
//! * **Kernel 2** ([`filter`]) builds the sparse count matrix, removes the
//!   super-node and leaf columns and row-normalizes it.
//! * **Kernel 3** ([`pagerank`]) runs a fixed number of PageRank iterations.
//!
//! [`oracle`] holds a dense eigenvector check for small problems, and
//! [`harness`] wires everything together and produces reports.

pub mod edge_io;
pub mod error;
pub mod filter;
pub mod graph_gen;
pub mod harness;
pub mod oracle;
pub mod pagerank;
pub mod sort;
pub mod timing;

pub use edge_io::{read_edges, write_edges, EdgeManifest};
pub use error::{Error, Result};
pub use filter::{CountMatrix, DegreeVector, StochasticMatrix};
pub use graph_gen::{derived_sizes, estimate_memory_bytes, generate_edges, Edge, GenConfig, Initiator};
pub use harness::{emit_report, run_pipeline, write_report, BenchConfig, BenchReport, KernelRecord, ReportFormat};
pub use oracle::DenseMatrix;
pub use pagerank::{PageRankConfig, RankVector};
pub use sort::{sort_edges, SortOutcome, SortStrategy};
