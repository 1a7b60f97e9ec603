use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wva_bench::{ghz_pair, observable, spdc_meter, sum_meter};
use wva_core::dynamics::{decompose_branches, evolve_postselect_exact, evolve_postselect_grid, evolve_postselect_weak};
use wva_core::metrology::{fisher_quadrature, mle_estimate, CoincidenceSampler, SweepConfig};
use wva_core::{gn_sum_on, CouplingConfig, Engine, Grid1D, GridSpec, MeterOperator};

const G: f64 = 1e-3;

fn branches(c: &mut Criterion) {
    let mut group = c.benchmark_group("decompose_branches");
    for n in [2usize, 8, 16] {
        let (i, f) = ghz_pair(n, 0.1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| decompose_branches(black_box(&i), black_box(&f), &observable()).unwrap())
        });
    }
    group.finish();
}

fn exact_and_weak(c: &mut Criterion) {
    let mut group = c.benchmark_group("sum_marginal_4096");
    let grid = Grid1D::centered(0.0, 12.0, 4096).unwrap();
    for n in [1usize, 4, 8] {
        let (i, f) = ghz_pair(n, 0.1);
        let meter = sum_meter(n);
        let bd = decompose_branches(&i, &f, &observable()).unwrap();
        for op in [MeterOperator::X, MeterOperator::P] {
            let coupling = CouplingConfig::new(G, op).unwrap();
            group.bench_function(BenchmarkId::new(format!("exact_{op:?}"), n), |b| {
                b.iter(|| {
                    let st = evolve_postselect_exact(black_box(&bd), &meter, &coupling).unwrap();
                    gn_sum_on(&st, &grid).unwrap()
                })
            });
            group.bench_function(BenchmarkId::new(format!("weak_{op:?}"), n), |b| {
                b.iter(|| {
                    let st = evolve_postselect_weak(black_box(&i), &f, &observable(), &meter, &coupling).unwrap();
                    gn_sum_on(&st, &grid).unwrap()
                })
            });
        }
    }
    group.finish();
}

fn grid_engine(c: &mut Criterion) {
    let mut group = c.benchmark_group("grid_engine");
    group.sample_size(10);
    let coupling = CouplingConfig::new(0.05, MeterOperator::X).unwrap();
    for (label, n, meter) in [("sum_gaussian", 1, sum_meter(1)), ("sum_gaussian", 2, sum_meter(2)), ("spdc", 2, spdc_meter())] {
        let (i, f) = ghz_pair(n, 0.1);
        let bd = decompose_branches(&i, &f, &observable()).unwrap();
        let spec = GridSpec::default_for(&bd, &meter, &coupling).unwrap().with_sum_points(256).unwrap();
        group.bench_function(BenchmarkId::new(label, n), |b| {
            b.iter(|| evolve_postselect_grid(black_box(&i), &f, &observable(), &meter, &coupling, &spec).unwrap())
        });
    }
    group.finish();
}

fn metrology(c: &mut Criterion) {
    let mut group = c.benchmark_group("metrology");
    group.sample_size(20);
    let exp = SweepConfig {
        engine: Engine::Exact,
        ..SweepConfig::default()
    }
    .experiment(4)
    .unwrap();
    let grid = exp.sum_grid(0.01).unwrap();
    group.bench_function("fisher_quadrature_n4", |b| {
        b.iter(|| fisher_quadrature(|g| exp.coincidences(g, &grid), black_box(G)).unwrap())
    });

    let model = |g: f64| exp.coincidences(g, &grid);
    let sampler = CoincidenceSampler::new(&model(G).unwrap()).unwrap();
    let samples = sampler.sample(10_000, 42, 0);
    group.bench_function("sample_10k", |b| b.iter(|| sampler.sample(black_box(10_000), 42, 1)));
    group.bench_function("mle_10k", |b| {
        b.iter(|| mle_estimate(black_box(&samples), model, G, 2.5e-3).unwrap())
    });
    group.finish();
}

criterion_group!(benches, branches, exact_and_weak, grid_engine, metrology);
criterion_main!(benches);
