//! Kernel 2: build the count matrix, drop super-node and leaf columns and
//! row-normalize.

use std::time::Duration;

use crate::edge_io::{read_edges, EdgeManifest};
use crate::error::{Error, Result};
use crate::graph_gen::Edge;
use crate::timing::{rate, Stopwatch};

/// Largest vertex count the in-memory matrices accept (column indices are u32).
pub const MAX_MATRIX_VERTICES: u64 = 1 << 32;

/// `N × N` matrix of edge multiplicities in CSR form, columns ascending
/// within each row. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    counts: Vec<u64>,
}

impl CountMatrix {
    pub fn empty(n: usize) -> Self {
        CountMatrix {
            n,
            row_offsets: vec![0; n + 1],
            col_indices: Vec::new(),
            counts: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.counts.len()
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row(&self, u: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        let range = self.row_offsets[u]..self.row_offsets[u + 1];
        self.col_indices[range.clone()]
            .iter()
            .zip(&self.counts[range])
            .map(|(&c, &x)| (c as usize, x))
    }

    /// Count at 0-based `(u, v)`.
    pub fn get(&self, u: usize, v: usize) -> u64 {
        let range = self.row_offsets[u]..self.row_offsets[u + 1];
        match self.col_indices[range.clone()].binary_search(&(v as u32)) {
            Ok(i) => self.counts[range.start + i],
            Err(_) => 0,
        }
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[u32] {
        &self.col_indices
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

/// Per-vertex degree as a sum of counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeVector(pub Vec<u64>);

impl DegreeVector {
    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn max(&self) -> u64 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn sum(&self) -> u64 {
        self.0.iter().sum()
    }
}

/// Row-normalized matrix. Non-empty rows sum to 1; empty rows are dangling
/// vertices and stay empty.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    values: Vec<f64>,
}

impl StochasticMatrix {
    /// Builds a matrix from CSR parts, checking structure and that every
    /// non-empty row sums to 1 within 1e-12.
    pub fn from_csr(n: usize, row_offsets: Vec<usize>, col_indices: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        let bad = |m: String| Error::config(format!("invalid stochastic matrix: {m}"));
        if row_offsets.len() != n + 1 || row_offsets[0] != 0 {
            return Err(bad("row offsets must have n + 1 entries starting at 0".into()));
        }
        if row_offsets.windows(2).any(|w| w[0] > w[1]) || row_offsets[n] != values.len() {
            return Err(bad("row offsets must be non-decreasing and end at nnz".into()));
        }
        if col_indices.len() != values.len() {
            return Err(bad("column and value arrays differ in length".into()));
        }
        if col_indices.iter().any(|&c| c as usize >= n) {
            return Err(bad("column index out of range".into()));
        }
        if values.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return Err(bad("values must lie in (0, 1]".into()));
        }
        let matrix = StochasticMatrix {
            n,
            row_offsets,
            col_indices,
            values,
        };
        for u in 0..n {
            let (start, end) = (matrix.row_offsets[u], matrix.row_offsets[u + 1]);
            if start < end {
                let sum: f64 = matrix.values[start..end].iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(bad(format!("row {} sums to {sum}", u + 1)));
                }
            }
        }
        Ok(matrix)
    }

    pub fn empty(n: usize) -> Self {
        StochasticMatrix {
            n,
            row_offsets: vec![0; n + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[u]..self.row_offsets[u + 1];
        self.col_indices[range.clone()]
            .iter()
            .zip(&self.values[range])
            .map(|(&c, &x)| (c as usize, x))
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        let range = self.row_offsets[u]..self.row_offsets[u + 1];
        match self.col_indices[range.clone()].binary_search(&(v as u32)) {
            Ok(i) => self.values[range.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, u: usize) -> f64 {
        self.values[self.row_offsets[u]..self.row_offsets[u + 1]].iter().sum()
    }

    pub fn dangling_rows(&self) -> usize {
        self.row_offsets.windows(2).filter(|w| w[0] == w[1]).count()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[u32] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Single-pass CSR assembly from edges sorted by `u`. Duplicate `(u, v)`
/// pairs collapse into their multiplicity.
pub fn build_adjacency<I>(edges: I, n: u64) -> Result<CountMatrix>
where
    I: IntoIterator<Item = Result<Edge>>,
{
    if n > MAX_MATRIX_VERTICES {
        return Err(Error::config(format!("{n} vertices exceed the in-memory matrix limit")));
    }
    let n_rows = n as usize;
    let mut matrix = CountMatrix::empty(n_rows);
    let mut row_cols: Vec<u32> = Vec::new();
    let mut current_row = 0usize;
    let mut previous_u = 0u64;

    let flush = |m: &mut CountMatrix, row: usize, cols: &mut Vec<u32>| {
        cols.sort_unstable();
        for &c in cols.iter() {
            if m.col_indices.len() > m.row_offsets[row] && *m.col_indices.last().unwrap() == c {
                *m.counts.last_mut().unwrap() += 1;
            } else {
                m.col_indices.push(c);
                m.counts.push(1);
            }
        }
        cols.clear();
    };

    for (index, edge) in edges.into_iter().enumerate() {
        let edge = edge?;
        if !(1..=n).contains(&edge.u) || !(1..=n).contains(&edge.v) {
            return Err(Error::LabelOutOfRange { u: edge.u, v: edge.v, n });
        }
        if edge.u < previous_u {
            return Err(Error::Unsorted {
                index: index as u64 + 1,
                previous: previous_u,
                u: edge.u,
            });
        }
        previous_u = edge.u;
        let row = (edge.u - 1) as usize;
        while current_row < row {
            flush(&mut matrix, current_row, &mut row_cols);
            current_row += 1;
            matrix.row_offsets[current_row] = matrix.col_indices.len();
        }
        row_cols.push((edge.v - 1) as u32);
    }
    flush(&mut matrix, current_row, &mut row_cols);
    let nnz = matrix.col_indices.len();
    for offset in &mut matrix.row_offsets[current_row + 1..] {
        *offset = nnz;
    }
    Ok(matrix)
}

/// Column sums of counts.
pub fn in_degree(a: &CountMatrix) -> DegreeVector {
    let mut d = vec![0u64; a.n];
    for (&c, &x) in a.col_indices.iter().zip(&a.counts) {
        d[c as usize] += x;
    }
    DegreeVector(d)
}

/// Row sums of counts.
pub fn out_degree(a: &CountMatrix) -> DegreeVector {
    DegreeVector(
        a.row_offsets
            .windows(2)
            .map(|w| a.counts[w[0]..w[1]].iter().sum())
            .collect(),
    )
}

/// Columns removed by [`zero_columns`]: every column at the maximum in-degree
/// and every column with in-degree exactly 1, both judged on `d_in`.
pub fn zeroed_column_mask(d_in: &DegreeVector) -> Vec<bool> {
    let max = d_in.max();
    d_in.0.iter().map(|&d| d == max || d == 1).collect()
}

pub fn zero_columns(a: &CountMatrix, d_in: &DegreeVector) -> Result<CountMatrix> {
    if d_in.0.len() != a.n {
        return Err(Error::DimensionMismatch {
            expected: a.n,
            found: d_in.0.len(),
        });
    }
    let mask = zeroed_column_mask(d_in);
    let mut out = CountMatrix::empty(a.n);
    out.col_indices.reserve(a.nnz());
    out.counts.reserve(a.nnz());
    for u in 0..a.n {
        for (v, x) in a.row(u) {
            if !mask[v] {
                out.col_indices.push(v as u32);
                out.counts.push(x);
            }
        }
        out.row_offsets[u + 1] = out.col_indices.len();
    }
    Ok(out)
}

/// Divides each non-empty row by its count sum.
pub fn row_normalize(a: &CountMatrix) -> StochasticMatrix {
    let mut values = Vec::with_capacity(a.nnz());
    for w in a.row_offsets.windows(2) {
        let row = &a.counts[w[0]..w[1]];
        let d_out: u64 = row.iter().sum();
        values.extend(row.iter().map(|&x| x as f64 / d_out as f64));
    }
    StochasticMatrix {
        n: a.n,
        row_offsets: a.row_offsets.clone(),
        col_indices: a.col_indices.clone(),
        values,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterStats {
    pub total_count: u64,
    pub nnz_built: usize,
    pub nnz_filtered: usize,
    pub max_in_degree: u64,
    pub zeroed_columns: usize,
    pub dangling_rows: usize,
}

#[derive(Debug, Clone)]
pub struct Kernel2Output {
    pub matrix: StochasticMatrix,
    pub stats: FilterStats,
    pub elapsed: Duration,
    /// Edges prepared per second, `M / elapsed`.
    pub rate: f64,
}

/// read → build → in-degree → zero columns → normalize, timed end to end.
pub fn run_kernel2(input: &EdgeManifest) -> Result<Kernel2Output> {
    if !input.sorted_by_start {
        return Err(Error::Manifest {
            path: input.manifest_path(),
            message: "kernel 2 needs edges sorted by start vertex".into(),
        });
    }
    let clock = Stopwatch::start();
    let counts = build_adjacency(read_edges(input)?, input.num_vertices())?;
    let d_in = in_degree(&counts);
    let filtered = zero_columns(&counts, &d_in)?;
    let matrix = row_normalize(&filtered);
    let elapsed = clock.elapsed();

    let stats = FilterStats {
        total_count: counts.total_count(),
        nnz_built: counts.nnz(),
        nnz_filtered: filtered.nnz(),
        max_in_degree: d_in.max(),
        zeroed_columns: zeroed_column_mask(&d_in).iter().filter(|&&z| z).count(),
        dangling_rows: matrix.dangling_rows(),
    };
    Ok(Kernel2Output {
        matrix,
        stats,
        elapsed,
        rate: rate(input.total_edges, elapsed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(pairs: &[(u64, u64)]) -> Vec<Result<Edge>> {
        pairs.iter().map(|&p| Ok(Edge::from(p))).collect()
    }

    /// N=4, M=8 reference case.
    pub(crate) const WORKED: [(u64, u64); 8] = [(1, 2), (3, 2), (4, 2), (1, 3), (2, 3), (2, 1), (3, 1), (1, 4)];

    fn sorted_worked() -> Vec<Result<Edge>> {
        let mut pairs = WORKED.to_vec();
        pairs.sort_by_key(|p| p.0);
        ok(&pairs)
    }

    #[test]
    fn duplicates_collapse_to_counts() {
        let a = build_adjacency(ok(&[(1, 2), (1, 2), (2, 3)]), 3).unwrap();
        assert_eq!(a.get(0, 1), 2);
        assert_eq!(a.get(1, 2), 1);
        assert_eq!(a.total_count(), 3);
        assert_eq!(a.nnz(), 2);
        assert_eq!(in_degree(&a).0, vec![0, 2, 1]);
    }

    #[test]
    fn empty_edge_list() {
        let a = build_adjacency(Vec::new(), 4).unwrap();
        assert_eq!(a.nnz(), 0);
        assert_eq!(a.total_count(), 0);
        assert_eq!(a.row_offsets(), &[0; 5]);
        assert_eq!(in_degree(&a).0, vec![0; 4]);
    }

    #[test]
    fn unsorted_and_out_of_range_are_errors() {
        let err = build_adjacency(ok(&[(2, 1), (1, 1)]), 2).unwrap_err();
        assert!(matches!(err, Error::Unsorted { index: 2, previous: 2, u: 1 }));
        let err = build_adjacency(ok(&[(1, 3)]), 2).unwrap_err();
        assert!(matches!(err, Error::LabelOutOfRange { u: 1, v: 3, n: 2 }));
        assert!(build_adjacency(ok(&[(0, 1)]), 2).is_err());
    }

    #[test]
    fn unordered_columns_within_a_row() {
        let a = build_adjacency(ok(&[(1, 3), (1, 1), (1, 3), (3, 2), (3, 1)]), 3).unwrap();
        assert_eq!(a.col_indices(), &[0, 2, 0, 1]);
        assert_eq!(a.counts(), &[1, 2, 1, 1]);
        assert_eq!(a.row_offsets(), &[0, 2, 2, 4]);
    }

    #[test]
    fn worked_case() {
        let a = build_adjacency(sorted_worked(), 4).unwrap();
        assert_eq!(a.total_count(), 8);
        let d_in = in_degree(&a);
        assert_eq!(d_in.0, vec![2, 3, 2, 1]);
        assert_eq!(zeroed_column_mask(&d_in), vec![false, true, false, true]);
        let z = zero_columns(&a, &d_in).unwrap();
        assert_eq!(out_degree(&z).0, vec![1, 2, 1, 0]);
        let s = row_normalize(&z);
        let rows: Vec<Vec<(usize, f64)>> = (0..4).map(|u| s.row(u).collect()).collect();
        assert_eq!(rows[0], vec![(2, 1.0)]);
        assert_eq!(rows[1], vec![(0, 0.5), (2, 0.5)]);
        assert_eq!(rows[2], vec![(0, 1.0)]);
        assert!(rows[3].is_empty());
        assert_eq!(s.dangling_rows(), 1);
    }

    #[test]
    fn all_columns_tied_at_max() {
        let a = build_adjacency(ok(&[(1, 2), (2, 1)]), 2).unwrap();
        let z = zero_columns(&a, &in_degree(&a)).unwrap();
        assert_eq!(z.nnz(), 0);
        assert_eq!(row_normalize(&z).dangling_rows(), 2);
    }

    #[test]
    fn unique_max_zeroes_one_column() {
        // d_in = [2, 3, 2]
        let a = build_adjacency(ok(&[(1, 1), (1, 2), (2, 2), (2, 3), (3, 1), (3, 2), (3, 3)]), 3).unwrap();
        let d_in = in_degree(&a);
        assert_eq!(d_in.0, vec![2, 3, 2]);
        let z = zero_columns(&a, &d_in).unwrap();
        assert_eq!(z.nnz(), a.nnz() - 3);
        assert!((0..3).all(|u| z.get(u, 1) == 0));
    }

    #[test]
    fn degree_counts_multiplicity() {
        // column 2 has one entry with count 2: not a leaf
        let a = build_adjacency(ok(&[(1, 2), (1, 2), (2, 1), (2, 3), (3, 3), (3, 1), (3, 1)]), 3).unwrap();
        let d_in = in_degree(&a);
        assert_eq!(d_in.0, vec![3, 2, 2]);
        assert_eq!(zeroed_column_mask(&d_in), vec![true, false, false]);
    }

    #[test]
    fn normalization_divides_by_count_sum() {
        let a = build_adjacency(ok(&[(1, 1), (1, 2), (1, 2), (1, 2)]), 2).unwrap();
        let s = row_normalize(&a);
        assert_eq!(s.row(0).collect::<Vec<_>>(), vec![(0, 0.25), (1, 0.75)]);
        assert_eq!(s.row(1).count(), 0);
    }

    #[test]
    fn from_csr_validates() {
        assert!(StochasticMatrix::from_csr(2, vec![0, 1, 2], vec![1, 0], vec![1.0, 1.0]).is_ok());
        assert!(StochasticMatrix::from_csr(2, vec![0, 1, 2], vec![1, 0], vec![1.0, 0.5]).is_err());
        assert!(StochasticMatrix::from_csr(2, vec![0, 1, 2], vec![1, 2], vec![1.0, 1.0]).is_err());
        assert!(StochasticMatrix::from_csr(2, vec![0, 1], vec![1], vec![1.0]).is_err());
    }

    #[test]
    fn zero_columns_checks_dimensions() {
        let a = CountMatrix::empty(3);
        assert!(zero_columns(&a, &DegreeVector(vec![0; 2])).is_err());
    }
}
