use approx::assert_relative_eq;
use fracbdsde_core::fractional::*;
use fracbdsde_core::quad::{integrate_singular, End, Tolerance};
use fracbdsde_core::stats::{convergence_order, shape_moments, MeanSe};
use fracbdsde_core::{Execution, GridFunction, Layout, TimeGrid};
use proptest::prelude::*;
use std::sync::Arc;

fn grid(n: usize) -> TimeGrid {
    TimeGrid::new(1.0, n).unwrap()
}

fn l2_error(a: &[f64], b: &[f64], dt: f64) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * dt).sqrt()
}

fn inversion_error(n: usize, alpha: f64, f: fn(f64) -> f64, right: bool) -> f64 {
    let g = grid(n);
    let fg = GridFunction::from_nodes(g, f);
    let d = if right {
        frac_derivative_right(&frac_integral_right(&fg, alpha).unwrap(), alpha).unwrap()
    } else {
        frac_derivative_left(&frac_integral_left(&fg, alpha).unwrap(), alpha).unwrap()
    };
    let exact = GridFunction::from_cells(g, f);
    l2_error(d.values(), exact.values(), g.dt())
}

#[test]
fn inversion_converges_at_half_order() {
    let tests: [fn(f64) -> f64; 3] = [|u| u, |u| 1.0 + u * u, |u| 2.0 - u + 0.5 * u * u * u];
    for f in tests {
        for right in [true, false] {
            let e256 = inversion_error(256, 0.3, f, right);
            let e1024 = inversion_error(1024, 0.3, f, right);
            let order = convergence_order(e256, e1024, 4.0);
            assert!(order >= 0.4, "order {order} (errors {e256:.3e}, {e1024:.3e}, right = {right})");
        }
    }
}

#[test]
fn left_inversion_on_512_cells() {
    let e = inversion_error(512, 0.4, |u| u, false);
    assert!(e < 1e-2, "{e}");
}

#[test]
fn kernel_variance_identity() {
    let h = Hurst::new(0.3).unwrap();
    for t in [0.25, 0.5, 1.0] {
        assert_relative_eq!(kernel_product(&h, t, t).unwrap(), t.powf(0.6), max_relative = 1e-8);
    }
}

#[test]
fn exact_and_quadrature_transfer_agree_in_the_interior() {
    let h = Hurst::new(0.3).unwrap();
    let t = 0.5;
    let exact = KernelSum::indicator(h, t);
    let phi = |n: usize| GridFunction::from_nodes(grid(n), |u| if u <= t + 1e-12 { 1.0 } else { 0.0 });
    let (coarse, fine) = (phi(512), phi(1024));
    for s in [0.1, 0.2, 0.3, 0.4] {
        let kc = op_k_quadrature_at(&coarse, h, s).unwrap();
        let kf = op_k_quadrature_at(&fine, h, s).unwrap();
        let estimate = (kc - kf).abs();
        let err = (kf - exact.eval(s)).abs();
        assert!(err <= 2.0 * estimate + 1e-9, "s = {s}: error {err:.3e} vs estimate {estimate:.3e}");
    }
}

#[test]
fn adjointness_for_smooth_g() {
    let h = Hurst::new(0.3).unwrap();
    let g = grid(1024);
    let gs = GridFunction::from_nodes(g, |s| s);
    let kstar = op_k_star(&gs, h).unwrap();
    let phi = GridFunction::indicator(g, 0.5).unwrap();
    let lhs = kstar.l2_inner(&phi).unwrap();
    let rhs = op_k(&phi, h).unwrap().pair(|s| s).unwrap();
    assert_relative_eq!(lhs, rhs, max_relative = 1e-3);
}

#[test]
fn isometry_on_step_functions() {
    let h = Hurst::new(0.3).unwrap();
    let g = grid(1024);
    let phi = GridFunction::from_cells(g, |s| {
        if s < 0.25 {
            1.0
        } else if s < 0.75 {
            -0.5
        } else {
            2.0
        }
    });
    let k = op_k(&phi, h).unwrap();
    assert_eq!(k.terms().len(), 3);
    assert_relative_eq!(k.inner(&k).unwrap(), k.lambda_inner(&k), max_relative = 1e-6);
}

#[test]
fn sampled_covariance_and_marginals() {
    let h = Hurst::new(0.3).unwrap();
    let g = grid(64);
    let ens = sample_fbm(g, h, 2024, 20_000, Execution::Parallel).unwrap();
    for (j, k) in [(64, 64), (64, 32), (48, 16)] {
        let prods: Vec<f64> = ens.paths.iter().map(|p| p.b[j] * p.b[k]).collect();
        let s = MeanSe::of(&prods);
        let target = covariance_r(&h, g.node(j), g.node(k));
        assert!((s.mean - target).abs() < 4.0 * s.se, "({j},{k}): {} vs {target} (se {})", s.mean, s.se);
    }
    let b1: Vec<f64> = ens.paths.iter().map(|p| p.b[64]).collect();
    let m = shape_moments(&b1);
    assert!(m.skewness.abs() < 5.0 * m.skewness_se);
    assert!(m.excess_kurtosis.abs() < 5.0 * m.kurtosis_se);
}

#[test]
fn cholesky_oracle_agrees_in_law() {
    let h = Hurst::new(0.25).unwrap();
    let g = grid(16);
    let chol = oracle::CholeskySampler::new(g, h, 5).unwrap();
    let w = Arc::new(KernelWeights::new(g, h, Execution::Parallel).unwrap());
    let s = FbmSampler::new(w, 5);
    let n = 20_000;
    let a: Vec<f64> = (0..n).map(|k| chol.path(k)[16] * chol.path(k)[8]).collect();
    let b: Vec<f64> = (0..n)
        .map(|k| {
            let p = s.path(k);
            p.b[16] * p.b[8]
        })
        .collect();
    let (sa, sb) = (MeanSe::of(&a), MeanSe::of(&b));
    assert!((sa.mean - sb.mean).abs() < 4.0 * (sa.se.powi(2) + sb.se.powi(2)).sqrt());
}

#[test]
fn weights_csv_has_one_row_per_node() {
    let w = KernelWeights::new(grid(4), Hurst::new(0.3).unwrap(), Execution::Sequential).unwrap();
    let mut buf = Vec::new();
    w.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.starts_with("node,cell_0,cell_1,cell_2,cell_3"));
}

#[test]
fn single_path_csv() {
    let ens = sample_fbm(grid(4), Hurst::new(0.3).unwrap(), 1, 1, Execution::Sequential).unwrap();
    let mut buf = Vec::new();
    ens.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("path,t,W0,B\n0,0,0,0\n"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn quadrature_oracle_for_linear_integrand() {
    let oracle = integrate_singular(|u: f64| u.powf(0.3), 0.0, 1.0, End::Left, 0.3, Tolerance::default()).unwrap();
    let f = GridFunction::from_nodes(grid(16), |u| u);
    let v = frac_integral_right(&f, 0.3).unwrap().values()[0];
    assert_relative_eq!(v, oracle.value / statrs::function::gamma::gamma(0.3), max_relative = 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fractional_integrals_are_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, alpha in 0.05..0.95f64) {
        let g = grid(32);
        let f1 = GridFunction::from_nodes(g, |u| u * u);
        let f2 = GridFunction::from_nodes(g, |u| (1.0 - u).sqrt());
        let mix = GridFunction::from_nodes(g, |u| a * u * u + b * (1.0 - u).sqrt());
        let i1 = frac_integral_right(&f1, alpha).unwrap();
        let i2 = frac_integral_right(&f2, alpha).unwrap();
        let im = frac_integral_right(&mix, alpha).unwrap();
        for k in 0..=32 {
            let lin = a * i1.values()[k] + b * i2.values()[k];
            prop_assert!((im.values()[k] - lin).abs() <= 1e-12 * (1.0 + lin.abs()));
        }
    }

    #[test]
    fn covariance_is_symmetric_and_bounded(h in 0.05..0.45f64, t in 0.0..2.0f64, s in 0.0..2.0f64) {
        let hu = Hurst::new(h).unwrap();
        let r = covariance_r(&hu, t, s);
        prop_assert_eq!(r, covariance_r(&hu, s, t));
        prop_assert!(r * r <= covariance_r(&hu, t, t) * covariance_r(&hu, s, s) * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn kernel_is_homogeneous(t in 0.1..1.0f64, frac in 0.01..0.99f64, lam in 0.2..5.0f64) {
        let h = Hurst::new(0.3).unwrap();
        let s = frac * t;
        let lhs = kernel_k_h(&h, lam * t, lam * s).unwrap();
        let rhs = lam.powf(-0.2) * kernel_k_h(&h, t, s).unwrap();
        prop_assert!((lhs / rhs - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sampling_is_pure(seed in any::<u64>(), k in 0u64..1000) {
        let g = grid(8);
        let w = Arc::new(KernelWeights::new(g, Hurst::new(0.3).unwrap(), Execution::Sequential).unwrap());
        let s = FbmSampler::new(w, seed);
        prop_assert_eq!(s.path(k), s.path(k));
    }

    #[test]
    fn grid_function_length_is_enforced(n in 2usize..64, extra in 1usize..4) {
        let g = grid(n);
        prop_assert!(GridFunction::new(g, Layout::Node, vec![0.0; n + 1]).is_ok());
        prop_assert!(GridFunction::new(g, Layout::Node, vec![0.0; n + 1 + extra]).is_err());
        prop_assert!(GridFunction::new(g, Layout::Cell, vec![0.0; n + extra]).is_err());
    }
}
