//! Dense reference implementations used only by tests. Nothing here calls
//! into the sparse kernels it is compared against.

#![allow(dead_code)]

use prpipe_core::graph_gen::{generate_edges, Edge, GenConfig};

/// All kernel 2 steps on a dense `n × n` array, from unsorted 1-based edges.
pub fn dense_kernel2(edges: &[Edge], n: usize) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0f64; n]; n];
    for e in edges {
        a[e.u as usize - 1][e.v as usize - 1] += 1.0;
    }
    let d_in: Vec<f64> = (0..n).map(|j| (0..n).map(|i| a[i][j]).sum()).collect();
    let max = d_in.iter().cloned().fold(f64::MIN, f64::max);
    for j in 0..n {
        if d_in[j] == max || d_in[j] == 1.0 {
            for row in a.iter_mut() {
                row[j] = 0.0;
            }
        }
    }
    for row in a.iter_mut() {
        let d_out: f64 = row.iter().sum();
        if d_out > 0.0 {
            row.iter_mut().for_each(|x| *x /= d_out);
        }
    }
    a
}

/// `r · (c·A + (1 − c)/n · ones)` written as the transposed column product.
pub fn dense_step(a: &[Vec<f64>], c: f64, r: &[f64]) -> Vec<f64> {
    let n = a.len();
    (0..n)
        .map(|v| (0..n).map(|u| (c * a[u][v] + (1.0 - c) / n as f64) * r[u]).sum())
        .collect()
}

pub fn generated(scale: u32, seed: u64) -> Vec<Edge> {
    generate_edges(&GenConfig::new(scale, seed)).unwrap().edges().collect()
}

pub fn sorted(scale: u32, seed: u64) -> Vec<Edge> {
    let mut e = generated(scale, seed);
    e.sort_by_key(|e| e.u);
    e
}
