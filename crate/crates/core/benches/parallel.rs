use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dcflow::calculus::curvature_jacobian_with;
use dcflow::geometry::curvature_with;
use dcflow::prelude::*;
use std::hint::black_box;

fn torus(n: usize) -> (TriangulatedSurface, WeightConfig, ConformalState) {
    let s = generate(SurfaceKind::TorusGrid { n, m: n }).unwrap();
    let w = WeightConfig::uniform(&s, 0, 1.0).unwrap();
    let u = (0..s.vertex_count()).map(|i| 0.05 * ((i * 7919 % 101) as f64 / 101.0 - 0.5)).collect();
    let st = ConformalState::new(Geometry::Euclidean, &w, u).unwrap();
    (s, w, st)
}

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn curvature_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("curvature");
    for n in [32, 128, 256] {
        let (s, w, st) = torus(n);
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n * n), &exec, |b, &exec| {
                b.iter(|| curvature_with(exec, &s, &w, black_box(&st), true).unwrap())
            });
        }
    }
    group.finish();
}

fn jacobian_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("jacobian");
    for n in [32, 128, 256] {
        let (s, w, st) = torus(n);
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n * n), &exec, |b, &exec| {
                b.iter(|| curvature_jacobian_with(exec, &s, &w, black_box(&st)).unwrap())
            });
        }
    }
    group.finish();
}

fn flow_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("flow_100_steps");
    group.sample_size(10);
    let n = 64;
    let (s, w, st) = torus(n);
    for (name, exec) in MODES {
        let spec = FlowSpec::new(FlowKind::ExtendedModifiedRicci, Geometry::Euclidean)
            .with_target(vec![0.0; n * n])
            .with_max_time(1.0)
            .with_track_energy(false)
            .with_exec(exec);
        group.bench_function(BenchmarkId::new(name, n * n), |b| {
            b.iter(|| run_flow(&spec, &s, &w, black_box(&st)).unwrap())
        });
    }
    group.finish();
}

fn batch_bench(c: &mut Criterion) {
    // Independent small flows fanned out over runs rather than faces.
    let mut group = c.benchmark_group("flow_batch");
    group.sample_size(10);
    let s = generate(SurfaceKind::TorusGrid { n: 6, m: 6 }).unwrap();
    let w = WeightConfig::uniform(&s, 0, 1.0).unwrap();
    let spec = FlowSpec::new(FlowKind::ExtendedModifiedRicci, Geometry::Euclidean)
        .with_target(vec![0.0; 36])
        .with_max_time(5.0)
        .with_track_energy(false)
        .with_exec(Exec::Sequential);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, 32), |b| {
            b.iter(|| {
                exec.map_batch(32, |k| {
                    let u = (0..36).map(|i| 0.01 * ((i + k) % 5) as f64).collect();
                    let st = ConformalState::new(Geometry::Euclidean, &w, u).unwrap();
                    run_flow(&spec, &s, &w, &st).unwrap().final_residual
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, curvature_bench, jacobian_bench, flow_bench, batch_bench);
criterion_main!(benches);
