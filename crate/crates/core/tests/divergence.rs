use fracbdsde_core::divergence::{
    backward_ito_integral, divergence_deterministic, duality_check_deterministic, gram_row, write_duality_report,
    Duality, GramRoute,
};
use fracbdsde_core::fractional::{covariance_r, FbmSampler, Hurst, KernelWeights, PathEnsemble};
use fracbdsde_core::functional::{standard_family, NodeCombination, Polynomial, TestFunctional};
use fracbdsde_core::rng::{fill_normal, stream, Purpose};
use fracbdsde_core::stats::MeanSe;
use fracbdsde_core::{Error, Execution, GridFunction, Layout, TimeGrid};
use proptest::prelude::*;
use std::sync::{Arc, OnceLock};

fn weights() -> Arc<KernelWeights> {
    static W: OnceLock<Arc<KernelWeights>> = OnceLock::new();
    W.get_or_init(|| {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        Arc::new(KernelWeights::new(grid, Hurst::new(0.3).unwrap(), Execution::default()).unwrap())
    })
    .clone()
}

fn ensemble() -> &'static PathEnsemble {
    static E: OnceLock<PathEnsemble> = OnceLock::new();
    E.get_or_init(|| PathEnsemble::generate(&FbmSampler::new(weights(), 21), 100_000, Execution::default()).unwrap())
}

fn grid() -> TimeGrid {
    *weights().grid()
}

fn step(values: impl Fn(f64) -> f64) -> GridFunction {
    GridFunction::from_cells(grid(), values)
}

#[test]
fn deterministic_duality_pairs() {
    let g = grid();
    let fam = standard_family(&g);
    let by_name = |n: &str| fam.iter().find(|f| f.name == n).unwrap().clone();
    let pairs: Vec<(GridFunction, TestFunctional)> = vec![
        (step(|_| 1.0), by_name("B(1)")),
        (GridFunction::indicator(g, 0.5).unwrap(), by_name("B(1)^2")),
        (
            step(|t| {
                if t < 0.25 {
                    2.0
                } else if t < 0.75 {
                    -1.0
                } else {
                    0.0
                }
            }),
            by_name("B(0.5)*B(1)"),
        ),
        (step(|t| 1.0 + t), by_name("B(step)")),
        (GridFunction::indicator(g, 0.5).unwrap(), by_name("B(0.5)^3")),
        (step(|t| (3.0 * t).cos()), TestFunctional::constant(1.0)),
    ];
    for (u, f) in pairs {
        let rows =
            duality_check_deterministic(&u, vec![f], ensemble(), GramRoute::Discrete, Execution::default()).unwrap();
        let r = &rows[0];
        assert!(r.z.abs() < 4.0, "{r:?}");
    }
}

#[test]
fn divergence_is_centred_with_isometric_variance() {
    let u = step(|t| if t < 0.5 { 1.5 } else { -0.5 });
    let d = divergence_deterministic(&u, ensemble(), Execution::default()).unwrap();
    let m = MeanSe::of(&d);
    assert!(m.mean.abs() < 4.0 * m.se, "{m:?}");
    // E[δ(u)²] = ‖Ku‖² = Σ_jk u_j u_k ⟨K1_j, K1_k⟩
    let w = weights();
    let n = grid().n_steps();
    let lam = |a: usize, b: usize| w.gram(a, b);
    let mut norm = 0.0;
    for j in 0..n {
        for k in 0..n {
            norm += u.values()[j] * u.values()[k] * (lam(j + 1, k + 1) - lam(j + 1, k) - lam(j, k + 1) + lam(j, k));
        }
    }
    let sq: Vec<f64> = d.iter().map(|v| v * v).collect();
    let s = MeanSe::of(&sq);
    assert!((s.mean - norm).abs() < 4.0 * s.se, "{} vs {norm}", s.mean);
}

#[test]
fn continuum_gram_of_full_indicator_is_the_variance() {
    let w = weights();
    let f = TestFunctional::node_power(64, 1.0, 1);
    let d = Duality::new(vec![f], &w, GramRoute::Continuum);
    let b = vec![0.0; 65];
    let s = d.sample(&b, None, &vec![1.0; 64], 0.0);
    assert!((s[0].0 - 1.0).abs() < 1e-12);
    // Cell-averaged kernels lose a little variance at 64 cells.
    let disc = Duality::new(vec![TestFunctional::node_power(64, 1.0, 1)], &w, GramRoute::Discrete);
    let v = disc.sample(&b, None, &vec![1.0; 64], 0.0)[0].0;
    assert!((v - w.gram(64, 64)).abs() < 1e-12);
    assert!(v < 1.0 && v > 0.99, "{v}");
}

#[test]
fn backward_ito_isometry() {
    let g = grid();
    let n = g.n_steps();
    let dt = g.dt();
    let n_paths = 40_000;
    let mut integrals = Vec::with_capacity(n_paths);
    let mut energies = Vec::with_capacity(n_paths);
    let mut dw = vec![0.0; n];
    for k in 0..n_paths as u64 {
        fill_normal(&mut stream(4, Purpose::Brownian, k), dt, &mut dw);
        // z_{t_{i+1}} = (W_T − W_{t_{i+1}}) + t_{i+1} only looks at increments after the node.
        let mut z = vec![0.0; n + 1];
        let mut tail = 0.0;
        for i in (0..n).rev() {
            z[i + 1] = tail + g.node(i + 1);
            tail += dw[i];
        }
        let s = backward_ito_integral(&z, &dw);
        integrals.push(s[n]);
        energies.push(z[1..].iter().map(|v| v * v).sum::<f64>() * dt);
    }
    let mean = MeanSe::of(&integrals);
    assert!(mean.mean.abs() < 4.0 * mean.se, "{mean:?}");
    let sq: Vec<f64> = integrals.iter().map(|v| v * v).collect();
    let d = MeanSe::paired(&sq, &energies);
    assert!(d.mean.abs() < 4.0 * d.se, "{d:?}");
    let exact: f64 = (1..=n).map(|i| (1.0 - g.node(i) + g.node(i).powi(2)) * dt).sum();
    let e = MeanSe::of(&energies);
    assert!((e.mean - exact).abs() < 4.0 * e.se);
}

#[test]
fn mixed_functionals_need_increments() {
    let w = weights();
    let f = TestFunctional::new(
        "B(1)W(1)",
        vec![NodeCombination::node(64)],
        vec![vec![1.0; 64]],
        Polynomial::new(2, vec![(1.0, vec![1, 1])]).unwrap(),
    )
    .unwrap();
    let d = Duality::new(vec![f], &w, GramRoute::Discrete);
    let b: Vec<f64> = (0..=64).map(|j| j as f64 / 64.0).collect();
    let dw = vec![0.5 / 64.0; 64];
    let s = d.sample(&b, Some(&dw), &[0.0; 64], 2.0);
    assert!((s[0].1 - 2.0 * 0.5).abs() < 1e-12);
    assert_eq!(s[0].0, 0.0);
}

#[test]
fn clustering_and_grids_are_validated() {
    let w = weights();
    let d = Duality::new(vec![TestFunctional::constant(1.0)], &w, GramRoute::Discrete);
    let samples = vec![vec![(0.0, 1.0)]; 5];
    assert!(matches!(d.finish(&samples, 2), Err(Error::InvalidArgument(_))));
    assert!(matches!(d.finish(&samples, 0), Err(Error::InvalidArgument(_))));
    let other = GridFunction::zeros(TimeGrid::new(1.0, 32).unwrap(), Layout::Cell);
    let small = PathEnsemble::generate(&FbmSampler::new(w, 1), 4, Execution::default()).unwrap();
    assert!(matches!(divergence_deterministic(&other, &small, Execution::default()), Err(Error::GridMismatch(_))));
}

#[test]
fn report_layout() {
    let u = step(|_| 1.0);
    let small = PathEnsemble::generate(&FbmSampler::new(weights(), 2), 50, Execution::default()).unwrap();
    let rows =
        duality_check_deterministic(&u, standard_family(&grid()), &small, GramRoute::Discrete, Execution::default())
            .unwrap();
    let mut buf = Vec::new();
    write_duality_report(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "functional,lhs,rhs,diff,se,z");
    assert_eq!(text.lines().count(), rows.len() + 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn divergence_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, c in 0.05f64..0.95) {
        let small = PathEnsemble::generate(&FbmSampler::new(weights(), 3), 8, Execution::default()).unwrap();
        let u = step(|t| if t < c { 1.0 } else { 0.0 });
        let v = step(|t| t * t);
        let w = step(|t| a * if t < c { 1.0 } else { 0.0 } + b * t * t);
        let du = divergence_deterministic(&u, &small, Execution::default()).unwrap();
        let dv = divergence_deterministic(&v, &small, Execution::default()).unwrap();
        let dw = divergence_deterministic(&w, &small, Execution::default()).unwrap();
        for k in 0..8 {
            prop_assert!((dw[k] - a * du[k] - b * dv[k]).abs() < 1e-10 * (1.0 + dw[k].abs()));
        }
    }

    #[test]
    fn continuum_gram_rows_telescope(m in 0usize..=64) {
        let w = weights();
        let row = gram_row(&NodeCombination::node(m), &w, GramRoute::Continuum);
        let total: f64 = row.iter().sum();
        prop_assert!((total - covariance_r(w.hurst(), grid().node(m), 1.0)).abs() < 1e-12);
    }

    #[test]
    fn backward_sums_are_linear_in_the_integrand(z in proptest::collection::vec(-2.0f64..2.0, 9), c in -2.0f64..2.0) {
        let dw = [0.1, -0.2, 0.05, 0.3, -0.1, 0.0, 0.2, -0.25];
        let s = backward_ito_integral(&z, &dw);
        let zc: Vec<f64> = z.iter().map(|v| c * v).collect();
        let sc = backward_ito_integral(&zc, &dw);
        for (x, y) in s.iter().zip(&sc) {
            prop_assert!((c * x - y).abs() < 1e-12);
        }
        prop_assert_eq!(s[0], 0.0);
    }
}
