use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use robustkit::geometry::{meb_coreset, meb_exact, ToleranceConfig};
use robustkit::metrics::{self, SamplingPlan};
use robustkit::{PerturbationKind, PerturbationSpec, ToyEmbedder};
use robustkit_bench::{image, unit_cluster};

fn bench_meb(c: &mut Criterion) {
    let tol = ToleranceConfig::default();
    let mut group = c.benchmark_group("meb/dim512");
    for n in [6, 21, 51] {
        let pts = unit_cluster(n, 512, 0.3, n as u64);
        group.bench_with_input(BenchmarkId::new("exact", n), &pts, |b, pts| {
            b.iter(|| meb_exact(black_box(pts), &tol).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("coreset_1k", n), &pts, |b, pts| {
            b.iter(|| meb_coreset(black_box(pts), 1_000).unwrap())
        });
    }
    group.finish();
}

fn bench_metrics(c: &mut Criterion) {
    let set = unit_cluster(6, 768, 0.2, 1);
    c.bench_function("all_metrics/6x768", |b| b.iter(|| metrics::all_metrics(black_box(&set)).unwrap()));
}

fn bench_measure(c: &mut Criterion) {
    let img = image(64);
    let plan = SamplingPlan::default();
    let embedder = ToyEmbedder::default();
    let mut group = c.benchmark_group("measure/64px");
    for kind in [PerturbationKind::Jpeg, PerturbationKind::GaussianNoise, PerturbationKind::Glass] {
        let spec = PerturbationSpec::new(kind);
        group.bench_function(kind.id(), |b| {
            b.iter(|| metrics::measure("bench", black_box(&img), &spec, &plan, &embedder, 0).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_meb, bench_metrics, bench_measure);
criterion_main!(benches);
