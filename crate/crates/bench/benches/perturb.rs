use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use robustkit::perturb::{apply, max_distortion};
use robustkit::PerturbationSpec;
use robustkit_bench::image;

fn bench_perturbations(c: &mut Criterion) {
    let img = image(128);
    let mut group = c.benchmark_group("perturb/128px");
    for spec in PerturbationSpec::all() {
        let k = max_distortion(&spec);
        group.bench_function(spec.id(), |b| b.iter(|| apply("bench", black_box(&img), &spec, k, 0).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_perturbations);
criterion_main!(benches);
