use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use prpipe_bench::{edges, matrix, sorted_edges, BENCH_SEED};
use prpipe_core::edge_io::write_edges;
use prpipe_core::filter::{build_adjacency, in_degree, row_normalize, zero_columns};
use prpipe_core::graph_gen::{generate_edges, GenConfig};
use prpipe_core::pagerank::{init_rank, pagerank_step, run_kernel3, PageRankConfig};
use prpipe_core::sort::sort_edges;

const SCALE: u32 = 14;

fn generation(c: &mut Criterion) {
    let generator = generate_edges(&GenConfig::new(SCALE, BENCH_SEED)).unwrap();
    let mut group = c.benchmark_group("kernel0");
    group.throughput(Throughput::Elements(generator.num_edges()));
    group.bench_function("rmat", |b| b.iter(|| generator.edges().fold(0u64, |acc, e| acc ^ e.u ^ e.v)));
    group.finish();
}

fn sorting(c: &mut Criterion) {
    let input = edges(SCALE);
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_edges(input.clone(), &dir.path().join("in"), 1, SCALE).unwrap();
    let mut group = c.benchmark_group("kernel1");
    group.throughput(Throughput::Elements(input.len() as u64));
    group.sample_size(10);
    group.bench_function("in_memory_vec", |b| {
        b.iter_batched(|| input.clone(), |mut e| e.sort_by_key(|e| e.u), BatchSize::LargeInput)
    });
    group.bench_function("in_memory_files", |b| {
        b.iter(|| sort_edges(&manifest, &dir.path().join("mem"), 1, 1 << 30).unwrap())
    });
    group.bench_function("external_files", |b| {
        b.iter(|| sort_edges(&manifest, &dir.path().join("ext"), 1, (input.len() as u64 * 16) / 8).unwrap())
    });
    group.finish();
}

fn filtering(c: &mut Criterion) {
    let sorted = sorted_edges(SCALE);
    let mut group = c.benchmark_group("kernel2");
    group.throughput(Throughput::Elements(sorted.len() as u64));
    group.bench_function("build_filter_normalize", |b| {
        b.iter(|| {
            let a = build_adjacency(sorted.iter().copied().map(Ok), 1 << SCALE).unwrap();
            let z = zero_columns(&a, &in_degree(&a)).unwrap();
            row_normalize(&z)
        })
    });
    group.finish();
}

fn pagerank(c: &mut Criterion) {
    let a = matrix(SCALE);
    let m = 16u64 << SCALE;
    let r = init_rank(a.n(), BENCH_SEED).unwrap();
    let mut group = c.benchmark_group("kernel3");
    group.throughput(Throughput::Elements(m));
    group.bench_function("step", |b| b.iter(|| pagerank_step(&r, &a, 0.85).unwrap()));
    group.throughput(Throughput::Elements(20 * m));
    group.bench_function("twenty_iterations", |b| {
        b.iter(|| run_kernel3(&a, &PageRankConfig::new(BENCH_SEED), m).unwrap())
    });
    group.finish();
}

criterion_group!(benches, generation, sorting, filtering, pagerank);
criterion_main!(benches);
