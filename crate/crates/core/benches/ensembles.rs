use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use msgd_core::dynamics::{run_msgd, RunConfig};
use msgd_core::exec::replicate;
use msgd_core::models::{make_uniform_clt_model, make_quadratic_model};
use msgd_core::numerics::RngStream;
use msgd_core::stats::clt_error_samples;
use msgd_core::weights::WeightScheme;
use msgd_core::Execution;

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn clt_samples(c: &mut Criterion) {
    let model = make_uniform_clt_model(1).unwrap();
    let scheme = WeightScheme::dirichlet(10_000, 2_000).unwrap();
    let stream = RngStream::root(1);
    let mut group = c.benchmark_group("clt_error_samples");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| clt_error_samples(&model, &scheme, &[0.0], 200, &stream, exec).unwrap())
        });
    }
    group.finish();
}

fn msgd_ensemble(c: &mut Criterion) {
    let model = make_quadratic_model(2, vec![0.0, 0.0], 1.0).unwrap();
    let scheme = WeightScheme::minibatch(512, 64).unwrap();
    let cfg = RunConfig::new(0.1, 10, 64, 512, vec![1.0, 1.0]).unwrap();
    let stream = RngStream::root(2);
    let mut group = c.benchmark_group("msgd_ensemble");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                replicate(exec, 100, |r| {
                    run_msgd(&model, &scheme, &cfg, &stream.derive(r)).unwrap().final_state()[0]
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, clt_samples, msgd_ensemble);
criterion_main!(benches);
