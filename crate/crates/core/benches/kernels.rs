//! Rayon against a one-thread pool on the data-parallel kernels.
//!
//! Built without the `parallel` feature only the sequential path exists, so
//! the `threads` group then measures the same code twice.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lesionseg::gmm::{e_step, gmm_segment, GmmConfig, GmmParams};
use lesionseg::kmeans::{kmeans_cluster, KmeansConfig};
use lesionseg::metrics::hausdorff;
use lesionseg::morphology::{morphological_gradient, StructuringElement};
use lesionseg::phantom::{generate_phantom, PhantomSpec};
use lesionseg::preprocess::{clahe, ClaheConfig};
use lesionseg::watershed::{mcwt_segment_with, McwtConfig};
use lesionseg::{GrayImage, PixelSpacing};

fn run_with(threads: Option<usize>, f: impl FnOnce() + Send) {
    match threads {
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        _ => f(),
    }
}

fn phantom(size: usize) -> (GrayImage, lesionseg::BinaryMask) {
    generate_phantom(&PhantomSpec::random_lesion(7, size, size, 0.1, 1.5)).expect("valid phantom")
}

fn kernels(c: &mut Criterion) {
    let (img, truth) = phantom(512);
    let params = GmmParams::new(vec![0.3, 0.8], vec![0.01, 0.01], vec![0.8, 0.2]).unwrap();
    let se = StructuringElement::default();
    let shifted =
        lesionseg::BinaryMask::from_fn(512, 512, |i, j| i > 2 && truth.get(i - 3, j)).unwrap();

    for (label, threads) in [("rayon", None), ("one-thread", Some(1))] {
        let mut g = c.benchmark_group("threads");
        g.sample_size(20);
        g.bench_function(BenchmarkId::new("e_step", label), |b| {
            b.iter(|| run_with(threads, || drop(black_box(e_step(&img, &params).unwrap()))))
        });
        g.bench_function(BenchmarkId::new("clahe", label), |b| {
            b.iter(|| {
                run_with(threads, || {
                    drop(black_box(clahe(&img, &ClaheConfig::default()).unwrap()))
                })
            })
        });
        g.bench_function(BenchmarkId::new("gradient", label), |b| {
            b.iter(|| {
                run_with(threads, || {
                    drop(black_box(morphological_gradient(&img, &se)))
                })
            })
        });
        g.bench_function(BenchmarkId::new("kmeans", label), |b| {
            b.iter(|| {
                run_with(threads, || {
                    drop(black_box(
                        kmeans_cluster(&img, &KmeansConfig::default()).unwrap(),
                    ))
                })
            })
        });
        g.bench_function(BenchmarkId::new("hausdorff", label), |b| {
            b.iter(|| {
                run_with(threads, || {
                    black_box(hausdorff(&truth, &shifted, &PixelSpacing::default()).unwrap());
                })
            })
        });
        g.finish();
    }
}

fn methods(c: &mut Criterion) {
    let (img, _) = phantom(128);
    let mut g = c.benchmark_group("methods");
    g.sample_size(10);
    g.bench_function("kmeans", |b| {
        b.iter(|| kmeans_cluster(&img, &KmeansConfig::default()).unwrap())
    });
    g.bench_function("gmm", |b| {
        b.iter(|| gmm_segment(&img, &GmmConfig::default()).unwrap())
    });
    g.bench_function("mcwt", |b| {
        b.iter(|| mcwt_segment_with(&img, &McwtConfig::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, kernels, methods);
criterion_main!(benches);
