use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fracbdsde_core::bdsde::{solve_ensemble, BsdeProblem, Coefficients, Driver, Terminal};
use fracbdsde_core::divergence::divergence_deterministic;
use fracbdsde_core::fractional::{FbmSampler, Hurst, KernelWeights, PathEnsemble};
use fracbdsde_core::girsanov::{GammaProfile, GammaSpec, GirsanovFrame};
use fracbdsde_core::spde::{lattice, value_field};
use fracbdsde_core::{Execution, GridFunction, TimeGrid};
use std::sync::Arc;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn weights() -> Arc<KernelWeights> {
    let grid = TimeGrid::new(1.0, 64).unwrap();
    Arc::new(KernelWeights::new(grid, Hurst::new(0.3).unwrap(), Execution::default()).unwrap())
}

fn frame(w: &Arc<KernelWeights>) -> GirsanovFrame {
    let g = GammaProfile::Constant(0.5).on_grid(w.grid(), GammaSpec::default_p(w.hurst())).unwrap();
    GirsanovFrame::build(w.clone(), g, Execution::default()).unwrap()
}

fn problem(start: usize) -> BsdeProblem {
    BsdeProblem::new(
        Coefficients::parse("affine:0.2,0.8").unwrap(),
        Driver::parse("linear:0.3,0.4,0.5").unwrap(),
        Terminal::poly(1.0, 0.5, 0.5),
        vec![0.0],
        start,
    )
    .unwrap()
    .with_paths(500)
}

fn ensembles(c: &mut Criterion) {
    let w = weights();
    let f = frame(&w);
    let sampler = FbmSampler::new(w.clone(), 1);
    let paths = PathEnsemble::generate(&sampler, 8, Execution::default()).unwrap();
    let big = PathEnsemble::generate(&sampler, 20_000, Execution::default()).unwrap();
    let u = GridFunction::from_cells(*w.grid(), |t| 1.0 + t);
    let p = problem(32);

    let mut g = c.benchmark_group("ensembles");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("fbm_paths", name), &exec, |b, e| {
            b.iter(|| PathEnsemble::generate(&sampler, 20_000, *e).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("divergence", name), &exec, |b, e| {
            b.iter(|| divergence_deterministic(&u, &big, *e).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("bdsde_solve", name), &exec, |b, e| {
            b.iter(|| solve_ensemble(&p, &f, &paths, *e, |_, s| Ok(s.mean_y(16))).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("value_field", name), &exec, |b, e| {
            b.iter(|| value_field(&p, &f, &paths.paths[0], &[16, 32], &lattice(1, 1.0, 8), *e).unwrap())
        });
    }
    g.finish();
}

fn kernel(c: &mut Criterion) {
    let grid = TimeGrid::new(1.0, 32).unwrap();
    let mut g = c.benchmark_group("kernel_weights");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("n32", name), &exec, |b, e| {
            b.iter(|| KernelWeights::new(grid, Hurst::new(0.3).unwrap(), *e).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, ensembles, kernel);
criterion_main!(benches);
