use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use symkit::catalog::Catalog;
use symkit::simulator::{convergence_study, BCSpec, Stencil};
use symkit::solutions::{builtin_family, builtin_system};

fn validation(c: &mut Criterion) {
    let cat = Catalog::builtin();
    let mut g = c.benchmark_group("catalog");
    g.sample_size(10);
    g.bench_function("validate_all", |b| b.iter(|| black_box(&cat).validate_all()));
    g.finish();

    let f = builtin_family("family-3-7").unwrap().bind(&[("alpha2", 0.5), ("lambda2", 0.0)]);
    let sys = builtin_system("3-2").unwrap();
    let mut g = c.benchmark_group("simulator");
    g.sample_size(10);
    g.bench_function("convergence 32..128", |b| {
        b.iter(|| {
            convergence_study(&sys, &f, (0.0, std::f64::consts::PI), &[32, 64, 128], 0.2, &BCSpec::ZeroNeumann, Stencil::Central)
                .unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, validation);
criterion_main!(benches);
