//! Dense correctness oracle for small problems.
//!
//! Materializes `G = c·Aᵀ + (1 − c)/N` and finds its dominant eigenvector by
//! power iteration with 1-norm renormalization. `G` is strictly positive, so
//! the dominant eigenvector is simple and non-negative. This path shares no
//! code with the sparse kernel it checks.

use crate::error::{Error, Result};
use crate::filter::StochasticMatrix;

/// Largest `n` the dense path accepts.
pub const DEFAULT_DENSE_CAP: usize = 1 << 12;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: u32 = 10_000;

/// Row-major `n × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
        }
        Ok(DenseMatrix { n, data: rows.concat() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// 0-based `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.data[i * self.n + j] = x;
    }

    /// Column-vector product `G·x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.len() });
        }
        Ok(self
            .data
            .chunks_exact(self.n.max(1))
            .take(self.n)
            .map(|row| row.iter().zip(x).map(|(g, y)| g * y).sum())
            .collect())
    }
}

pub fn dense_pagerank_matrix(a: &StochasticMatrix, c: f64) -> Result<DenseMatrix> {
    dense_pagerank_matrix_capped(a, c, DEFAULT_DENSE_CAP)
}

/// `G(i, j) = c·A(j, i) + (1 − c)/n`.
pub fn dense_pagerank_matrix_capped(a: &StochasticMatrix, c: f64, cap: usize) -> Result<DenseMatrix> {
    let n = a.n();
    if n > cap {
        return Err(Error::DenseCapExceeded { n, cap });
    }
    let offset = (1.0 - c) / n as f64;
    let mut g = DenseMatrix { n, data: vec![offset; n * n] };
    for j in 0..n {
        for (i, x) in a.row(j) {
            g.set(i, j, c * x + offset);
        }
    }
    Ok(g)
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    /// Non-negative, 1-norm 1.
    pub vector: Vec<f64>,
    pub eigenvalue: f64,
    pub iterations: u32,
    /// `‖G·x/‖G·x‖₁ − x‖₁` at the returned `x`.
    pub residual: f64,
    pub converged: bool,
}

/// Power iteration from the uniform vector.
pub fn principal_eigenvector(g: &DenseMatrix, tol: f64, max_iters: u32) -> Result<Eigenpair> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::config("tolerance must be positive"));
    }
    let n = g.n();
    if n == 0 {
        return Err(Error::config("empty matrix has no eigenvector"));
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut eigenvalue = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iters {
        let mut y = g.mul_vec(&x)?;
        // x has 1-norm 1 and G ≥ 0, so ‖G·x‖₁ estimates λ
        let norm: f64 = y.iter().map(|v| v.abs()).sum();
        if norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        y.iter_mut().for_each(|v| *v /= norm);
        residual = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
        eigenvalue = norm;
        x = y;
        iterations += 1;
        if residual <= tol {
            break;
        }
    }
    Ok(Eigenpair {
        vector: x,
        eigenvalue,
        iterations,
        residual,
        converged: residual <= tol,
    })
}

/// `‖r/‖r‖₁ − s/‖s‖₁‖₁`.
pub fn normalized_l1_distance(r: &[f64], s: &[f64]) -> Result<f64> {
    if r.len() != s.len() {
        return Err(Error::DimensionMismatch { expected: r.len(), found: s.len() });
    }
    let nr: f64 = r.iter().map(|x| x.abs()).sum();
    let ns: f64 = s.iter().map(|x| x.abs()).sum();
    if nr == 0.0 || ns == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(r.iter().zip(s).map(|(a, b)| (a / nr - b / ns).abs()).sum())
}

/// Whether `r` and the eigenvector `r1` agree in direction within `tol`.
pub fn validate(r: &[f64], r1: &[f64], tol: f64) -> Result<bool> {
    Ok(normalized_l1_distance(r, r1)? <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> StochasticMatrix {
        StochasticMatrix::from_csr(4, vec![0, 1, 3, 4, 4], vec![2, 0, 2, 0], vec![1.0, 0.5, 0.5, 1.0]).unwrap()
    }

    #[test]
    fn single_vertex() {
        let a = StochasticMatrix::from_csr(1, vec![0, 1], vec![0], vec![1.0]).unwrap();
        let g = dense_pagerank_matrix(&a, 0.85).unwrap();
        assert!((g.get(0, 0) - 1.0).abs() < 1e-15);
        let e = principal_eigenvector(&g, 1e-12, 10).unwrap();
        assert_eq!(e.vector, vec![1.0]);
        assert!(e.converged);
    }

    #[test]
    fn zero_matrix_is_offset_only() {
        let g = dense_pagerank_matrix(&StochasticMatrix::empty(2), 0.85).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((g.get(i, j) - 0.075).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn worked_case_entry() {
        let g = dense_pagerank_matrix(&worked(), 0.85).unwrap();
        // 1-based G(3,1) = 0.85·A(1,3) + 0.15/4
        assert!((g.get(2, 0) - 0.8875).abs() < 1e-15);
        assert!((g.get(0, 0) - 0.0375).abs() < 1e-15);
    }

    #[test]
    fn symmetric_half_matrix() {
        let g = DenseMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let e = principal_eigenvector(&g, 1e-12, 100).unwrap();
        assert_eq!(e.vector, vec![0.5, 0.5]);
        assert!((e.eigenvalue - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_convergence_is_flagged() {
        // eigenvalues 1 and 0.9: slow
        let g = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.9]]).unwrap();
        let e = principal_eigenvector(&g, 1e-14, 3).unwrap();
        assert!(!e.converged);
        assert_eq!(e.iterations, 3);
    }

    #[test]
    fn cap_is_enforced() {
        let a = StochasticMatrix::empty(8);
        assert!(matches!(
            dense_pagerank_matrix_capped(&a, 0.85, 4),
            Err(Error::DenseCapExceeded { n: 8, cap: 4 })
        ));
    }

    #[test]
    fn validate_is_scale_invariant() {
        let r1 = vec![0.1, 0.2, 0.7];
        assert!(validate(&r1, &r1, 1e-15).unwrap());
        let doubled: Vec<f64> = r1.iter().map(|x| 2.0 * x).collect();
        assert!(validate(&doubled, &r1, 1e-15).unwrap());
        assert!(!validate(&[0.2, 0.1, 0.7], &r1, 1e-3).unwrap());
        assert!(matches!(validate(&[0.0; 3], &r1, 1.0), Err(Error::ZeroNorm)));
        assert!(validate(&[1.0], &r1, 1.0).is_err());
    }

    #[test]
    fn eigenvector_is_fixed_point() {
        let g = dense_pagerank_matrix(&worked(), 0.85).unwrap();
        let e = principal_eigenvector(&g, 1e-14, 10_000).unwrap();
        assert!(e.converged);
        let gx = g.mul_vec(&e.vector).unwrap();
        for (y, x) in gx.iter().zip(&e.vector) {
            assert!((y - e.eigenvalue * x).abs() < 1e-12);
        }
        // row 4 dangles, so the walk leaks mass
        assert!(e.eigenvalue < 1.0);
    }
}
