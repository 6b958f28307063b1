//! Kernel 3: fixed-iteration PageRank over the row-normalized matrix.
//!
//! One step computes `r' = c·(r·A) + ((1 − c)/N)·sum(r)` for the row vector
//! `r`. Dangling rows are not patched, so rank mass leaks through them and
//! `sum(r)` is non-increasing; it is recomputed every step.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::StochasticMatrix;
use crate::timing::{rate, Stopwatch};

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_ITERATIONS: u32 = 20;

/// ChaCha stream for the initial rank vector, distinct from the generator's.
const RANK_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageRankConfig {
    pub damping: f64,
    pub iterations: u32,
    pub seed: u64,
}

impl PageRankConfig {
    pub fn new(seed: u64) -> Self {
        PageRankConfig {
            damping: DEFAULT_DAMPING,
            iterations: DEFAULT_ITERATIONS,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_damping(self.damping)?;
        if self.iterations < 1 {
            return Err(Error::config("iterations must be at least 1"));
        }
        Ok(())
    }
}

fn validate_damping(c: f64) -> Result<()> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::config(format!("damping must lie in (0, 1), got {c}")));
    }
    Ok(())
}

/// Non-negative rank vector with its 1-norm cached.
#[derive(Debug, Clone, PartialEq)]
pub struct RankVector {
    values: Vec<f64>,
    norm1: f64,
}

impl RankVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::config("rank entries must be finite and non-negative"));
        }
        let norm1: f64 = values.iter().sum();
        if norm1 <= 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(RankVector { values, norm1 })
    }

    pub fn uniform(n: usize) -> Self {
        RankVector {
            values: vec![1.0 / n as f64; n],
            norm1: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm1(&self) -> f64 {
        self.norm1
    }

    /// Same direction, 1-norm 1.
    pub fn normalized(&self) -> RankVector {
        RankVector {
            values: self.values.iter().map(|x| x / self.norm1).collect(),
            norm1: 1.0,
        }
    }

    pub fn scaled(&self, alpha: f64) -> Result<RankVector> {
        RankVector::new(self.values.iter().map(|x| x * alpha).collect())
    }
}

/// Uniform `[0, 1)` draws divided by their sum.
pub fn init_rank(n: usize, seed: u64) -> Result<RankVector> {
    if n < 1 {
        return Err(Error::config("rank vector needs at least one vertex"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(RANK_STREAM);
    let mut values: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let sum: f64 = values.iter().sum();
    if sum == 0.0 {
        // every draw hit exactly 0.0
        return Ok(RankVector::uniform(n));
    }
    values.iter_mut().for_each(|x| *x /= sum);
    let norm1 = values.iter().sum();
    Ok(RankVector { values, norm1 })
}

/// Writes one update of `src` (whose entries sum to `src_sum`) into `dst` and
/// returns the sum of `dst`. Scatter over CSR rows in order.
fn step_into(a: &StochasticMatrix, c: f64, src: &[f64], src_sum: f64, dst: &mut [f64]) -> f64 {
    let teleport = (1.0 - c) * src_sum / a.n() as f64;
    dst.fill(0.0);
    let offsets = a.row_offsets();
    let cols = a.col_indices();
    let vals = a.values();
    for (u, &ru) in src.iter().enumerate() {
        if ru == 0.0 {
            continue;
        }
        let cr = c * ru;
        for k in offsets[u]..offsets[u + 1] {
            dst[cols[k] as usize] += cr * vals[k];
        }
    }
    let mut sum = 0.0;
    for x in dst.iter_mut() {
        *x += teleport;
        sum += *x;
    }
    sum
}

pub fn pagerank_step(r: &RankVector, a: &StochasticMatrix, c: f64) -> Result<RankVector> {
    validate_damping(c)?;
    if r.len() != a.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            found: r.len(),
        });
    }
    let mut out = vec![0.0; a.n()];
    let norm1 = step_into(a, c, &r.values, r.norm1, &mut out);
    Ok(RankVector { values: out, norm1 })
}

#[derive(Debug, Clone)]
pub struct Kernel3Output {
    pub rank: RankVector,
    /// `sum(r)` before the first step and after each step.
    pub mass_history: Vec<f64>,
    pub elapsed: Duration,
    /// Edges processed per second, `iterations · M / elapsed`.
    pub rate: f64,
}

/// Initializes `r` and applies exactly `config.iterations` steps. `m` is the
/// generated edge count, not the number of stored entries.
pub fn run_kernel3(a: &StochasticMatrix, config: &PageRankConfig, m: u64) -> Result<Kernel3Output> {
    config.validate()?;
    let clock = Stopwatch::start();
    let mut current = init_rank(a.n(), config.seed)?;
    let mut next = vec![0.0; a.n()];
    let mut mass_history = Vec::with_capacity(config.iterations as usize + 1);
    mass_history.push(current.norm1);
    for _ in 0..config.iterations {
        let sum = step_into(a, config.damping, &current.values, current.norm1, &mut next);
        std::mem::swap(&mut current.values, &mut next);
        current.norm1 = sum;
        mass_history.push(sum);
    }
    let elapsed = clock.elapsed();
    Ok(Kernel3Output {
        rank: current,
        mass_history,
        elapsed,
        rate: rate(u64::from(config.iterations).saturating_mul(m), elapsed),
    })
}

#[derive(Debug, Clone)]
pub struct Convergence {
    /// Final iterate, 1-norm 1.
    pub rank: RankVector,
    pub iterations: u32,
    /// 1-norm difference of the last two normalized iterates.
    pub residual: f64,
    pub converged: bool,
}

impl Convergence {
    pub fn into_result(self) -> Result<RankVector> {
        if self.converged {
            Ok(self.rank)
        } else {
            Err(Error::config(format!(
                "PageRank did not converge in {} iterations (residual {:e})",
                self.iterations, self.residual
            )))
        }
    }
}

/// Iterates from a seeded random start until successive normalized iterates
/// differ by less than `tol` in 1-norm. Validation only; never timed.
pub fn run_to_convergence(a: &StochasticMatrix, c: f64, tol: f64, max_iters: u32, seed: u64) -> Result<Convergence> {
    run_to_convergence_from(a, c, tol, max_iters, init_rank(a.n(), seed)?)
}

pub fn run_to_convergence_from(
    a: &StochasticMatrix,
    c: f64,
    tol: f64,
    max_iters: u32,
    start: RankVector,
) -> Result<Convergence> {
    validate_damping(c)?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::config("tolerance must be positive"));
    }
    if start.len() != a.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            found: start.len(),
        });
    }
    let mut current = start.normalized().values;
    let mut next = vec![0.0; a.n()];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iters {
        // The step is linear, so renormalizing keeps the direction and
        // stops the leaking mass from underflowing.
        let sum = step_into(a, c, &current, 1.0, &mut next);
        next.iter_mut().for_each(|x| *x /= sum);
        residual = current.iter().zip(&next).map(|(x, y)| (x - y).abs()).sum();
        std::mem::swap(&mut current, &mut next);
        iterations += 1;
        if residual < tol {
            break;
        }
    }
    Ok(Convergence {
        rank: RankVector::new(current)?,
        iterations,
        residual,
        converged: residual < tol,
    })
}

/// One `label TAB rank` line per vertex, 1-based labels, shortest
/// round-trip float formatting.
pub fn write_rank_tsv(path: &Path, rank: &RankVector) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (i, x) in rank.values.iter().enumerate() {
        writeln!(out, "{}\t{}", i + 1, x).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap2() -> StochasticMatrix {
        StochasticMatrix::from_csr(2, vec![0, 1, 2], vec![1, 0], vec![1.0, 1.0]).unwrap()
    }

    /// Normalized worked 4-vertex matrix.
    fn worked() -> StochasticMatrix {
        StochasticMatrix::from_csr(4, vec![0, 1, 3, 4, 4], vec![2, 0, 2, 0], vec![1.0, 0.5, 0.5, 1.0]).unwrap()
    }

    fn dense_step(a: &StochasticMatrix, c: f64, r: &[f64]) -> Vec<f64> {
        let n = a.n();
        let sum: f64 = r.iter().sum();
        (0..n)
            .map(|v| c * (0..n).map(|u| r[u] * a.get(u, v)).sum::<f64>() + (1.0 - c) * sum / n as f64)
            .collect()
    }

    #[test]
    fn init_rank_properties() {
        assert_eq!(init_rank(1, 99).unwrap().values(), &[1.0]);
        for (n, seed) in [(7, 1), (1000, 2), (65_536, 3)] {
            let r = init_rank(n, seed).unwrap();
            assert!((r.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(r.values().iter().all(|&x| x >= 0.0));
            assert_eq!(r, init_rank(n, seed).unwrap());
        }
        assert_ne!(init_rank(10, 1).unwrap(), init_rank(10, 2).unwrap());
        assert!(init_rank(0, 1).is_err());
    }

    #[test]
    fn uniform_is_fixed_point_of_permutation() {
        let r = RankVector::new(vec![0.5, 0.5]).unwrap();
        let next = pagerank_step(&r, &swap2(), 0.85).unwrap();
        assert_eq!(next.values(), &[0.5, 0.5]);
    }

    #[test]
    fn zero_matrix_keeps_only_teleport() {
        let a = StochasticMatrix::empty(4);
        let r = RankVector::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let next = pagerank_step(&r, &a, 0.85).unwrap();
        for &x in next.values() {
            assert!((x - 0.15 / 4.0).abs() < 1e-15);
        }
        assert!((next.norm1() - 0.15).abs() < 1e-15);
    }

    #[test]
    fn worked_case_step() {
        let a = worked();
        let r = RankVector::uniform(4);
        let next = pagerank_step(&r, &a, 0.85).unwrap();
        assert!((next.values()[0] - 0.356250).abs() < 1e-15);
        let oracle = dense_step(&a, 0.85, r.values());
        for (x, y) in next.values().iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn step_is_linear() {
        let a = worked();
        let r = init_rank(4, 5).unwrap();
        let once = pagerank_step(&r.scaled(2.0).unwrap(), &a, 0.85).unwrap();
        let twice = pagerank_step(&r, &a, 0.85).unwrap().scaled(2.0).unwrap();
        for (x, y) in once.values().iter().zip(twice.values()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let r = RankVector::uniform(3);
        assert!(matches!(
            pagerank_step(&r, &swap2(), 0.85),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
        assert!(pagerank_step(&RankVector::uniform(2), &swap2(), 1.0).is_err());
    }

    #[test]
    fn single_iteration_equals_one_step() {
        let mut config = PageRankConfig::new(4);
        config.iterations = 1;
        let out = run_kernel3(&swap2(), &config, 2).unwrap();
        let expected = pagerank_step(&init_rank(2, 4).unwrap(), &swap2(), 0.85).unwrap();
        assert_eq!(out.rank, expected);
        assert_eq!(out.mass_history.len(), 2);
    }

    #[test]
    fn kernel3_is_deterministic_and_dissipative() {
        let config = PageRankConfig::new(17);
        let a = worked();
        let first = run_kernel3(&a, &config, 8).unwrap();
        let second = run_kernel3(&a, &config, 8).unwrap();
        assert_eq!(first.rank, second.rank);
        assert_eq!(first.mass_history.len(), 21);
        assert!(first.mass_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(first.mass_history.iter().all(|&s| s > 0.0 && s <= 1.0 + 1e-12));
    }

    #[test]
    fn config_validation() {
        let mut config = PageRankConfig::new(0);
        config.iterations = 0;
        assert!(config.validate().is_err());
        config.iterations = 20;
        config.damping = 0.0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn convergence_on_permutation() {
        let c = run_to_convergence_from(&swap2(), 0.85, 1e-12, 100, RankVector::uniform(2)).unwrap();
        assert!(c.converged);
        assert!(c.iterations <= 2);
        let c = run_to_convergence(&swap2(), 0.85, 1e-12, 1000, 3).unwrap();
        assert!(c.converged);
        for &x in c.rank.values() {
            assert!((x - 0.5).abs() < 1e-11);
        }
    }

    #[test]
    fn non_convergence_is_flagged() {
        let c = run_to_convergence(&worked(), 0.85, 1e-12, 1, 3).unwrap();
        assert!(!c.converged);
        assert!(c.into_result().is_err());
    }

    #[test]
    fn rank_vector_rejects_bad_input() {
        assert!(matches!(RankVector::new(vec![0.0, 0.0]), Err(Error::ZeroNorm)));
        assert!(RankVector::new(vec![-1.0, 2.0]).is_err());
        assert!(RankVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn rank_dump_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rank.tsv");
        write_rank_tsv(&path, &RankVector::new(vec![0.25, 0.75]).unwrap()).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "1\t0.25\n2\t0.75\n");
    }
}
