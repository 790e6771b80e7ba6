//! Kernel timings on the global rayon pool against a single-thread pool.
//!
//! Built without the `parallel` feature both variants run the sequential
//! code path.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roughpath::integration::integrate;
use roughpath::rough::{dp_metric, extend, RefineOptions};
use roughpath::signature::WindowSignatures;
use roughpath::variation::natural_control;
use roughpath::{GridFunctional, OneForm, RoughPath, SampledPath, SewOptions};

fn walk(seed: u64, dim: usize, n: usize) -> SampledPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut point = vec![0.0; dim];
    let mut points = vec![point.clone()];
    for _ in 0..n {
        for v in &mut point {
            *v += rng.gen_range(-1.0..1.0) / (n as f64).sqrt();
        }
        points.push(point.clone());
    }
    SampledPath::uniform(0.0, 1.0, points).unwrap()
}

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("pool", rayon::ThreadPoolBuilder::new().build().unwrap()),
        ("single", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
    ]
}

fn bench<F: Fn() + Sync>(c: &mut Criterion, group: &str, size: usize, f: F) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_with_input(BenchmarkId::new(name, size), &size, |b, _| b.iter(|| pool.install(&f)));
    }
    g.finish();
}

fn kernels(c: &mut Criterion) {
    let x = walk(1, 3, 128);
    bench(c, "window_signatures_d3_n4", 128, || {
        black_box(WindowSignatures::new(&x, 4).unwrap());
    });

    let y = walk(2, 2, 256);
    bench(c, "natural_control_p2.5", 256, || {
        black_box(natural_control(&y, 2.5).unwrap());
    });

    let a = GridFunctional::from_path(&walk(3, 2, 96), 2).unwrap();
    let b = GridFunctional::from_path(&walk(4, 2, 96), 2).unwrap();
    bench(c, "dp_metric_p2.5", 96, || {
        black_box(dp_metric(&a, &b, 2.5).unwrap());
    });

    let opts = RefineOptions {
        tol: 1e-12,
        max_depth: 14,
        base: 2,
    };
    bench(c, "extend_to_degree_4", 64, || {
        black_box(extend(&GridFunctional::from_path(&walk(5, 2, 64), 2).unwrap(), 4, &opts).unwrap());
    });

    let r = RoughPath::from_bv_path(&walk(6, 2, 64), 2.5).unwrap();
    let alpha = OneForm::gradient(&roughpath::lipschitz::by_name("sin", 2).unwrap()).unwrap();
    bench(c, "integrate_gradient_p2.5", 64, || {
        black_box(integrate(&alpha, &r, &SewOptions::default()).unwrap());
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
