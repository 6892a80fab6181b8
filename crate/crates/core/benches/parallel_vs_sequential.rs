use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use stability_lab::divergences::kl;
use stability_lab::learners::{finite_class_weak_learner, measure_weak_learner, ordered_samples, rejection_sampler, LearningRule};
use stability_lab::{Executor, FiniteDistribution, HypothesisClass};

fn executors() -> Vec<Executor> {
    let mut v = vec![Executor::Sequential];
    #[cfg(feature = "parallel")]
    v.push(Executor::Parallel);
    v
}

fn posterior_scan(c: &mut Criterion) {
    let class = HypothesisClass::full(4).unwrap();
    let prior = FiniteDistribution::uniform(class.members().to_vec()).unwrap();
    let rule = rejection_sampler(prior.clone()).unwrap();
    let samples = ordered_samples(class.domain(), 3, 1 << 20).unwrap();
    let mut group = c.benchmark_group("posterior_kl_scan");
    for exec in executors() {
        group.bench_with_input(BenchmarkId::from_parameter(exec.name()), &exec, |b, &exec| {
            b.iter(|| {
                let out = exec.map_slice(&samples, |s| rule.posterior(s).ok().map(|q| kl(&q, &prior).unwrap().to_f64()));
                black_box(out)
            })
        });
    }
    group.finish();
}

fn weak_measurement(c: &mut Criterion) {
    let class = HypothesisClass::thresholds(16).unwrap();
    let weak = finite_class_weak_learner(&class, class.uniform_prior(), 4).unwrap();
    let mut group = c.benchmark_group("weak_learner_measurement");
    group.sample_size(10);
    for exec in executors() {
        group.bench_with_input(BenchmarkId::from_parameter(exec.name()), &exec, |b, &exec| {
            b.iter(|| black_box(measure_weak_learner(&weak, &class, 200, 1 << 24, 7, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, posterior_scan, weak_measurement);
criterion_main!(benches);
