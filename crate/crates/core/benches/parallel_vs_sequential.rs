use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use nonlocal_ld::harness::{run_study, StudyConfig};
use nonlocal_ld::legendre::conjugate_many;
use nonlocal_ld::{Execution, Kernel};

fn policies() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn legendre_batch(c: &mut Criterion) {
    let k = Kernel::stretched_exp(1.5).unwrap();
    let qs: Vec<f64> = (0..256).map(|i| 10f64.powf(i as f64 / 32.0)).collect();
    let mut group = c.benchmark_group("conjugate_many");
    for (name, exec) in policies() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| conjugate_many(&k, &qs, exec).unwrap())
        });
    }
    group.finish();
}

fn study_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_study");
    group.sample_size(10);
    for (name, exec) in policies() {
        let mut cfg = StudyConfig::new(Kernel::uniform(1.0).unwrap(), vec![10.0, 15.0, 20.0, 25.0], 0.8, 0.1);
        cfg.exec = exec;
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| run_study(cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, legendre_batch, study_batch);
criterion_main!(benches);
