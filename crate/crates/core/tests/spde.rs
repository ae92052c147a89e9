use fracbdsde_core::bdsde::{BsdeProblem, Coefficients, Driver, Terminal};
use fracbdsde_core::fractional::{FbmPath, FbmSampler, Hurst, KernelWeights, PathEnsemble};
use fracbdsde_core::girsanov::{GammaProfile, GammaSpec, GirsanovFrame};
use fracbdsde_core::spde::{
    exit_radius, fd_solve, field_point, flow_identity, forward_moment_constants, growth_fit, heat_oracle, lattice,
    pde_crosscheck, regularity_probe, value_field, variational_z, write_fd_csv, write_field_csv, FdConfig,
};
use fracbdsde_core::{Error, Execution, TimeGrid};
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

fn frame(gamma: &str) -> GirsanovFrame {
    let w = weights();
    let g = GammaProfile::parse(gamma).unwrap().on_grid(w.grid(), GammaSpec::default_p(w.hurst())).unwrap();
    GirsanovFrame::build(w, g, Execution::default()).unwrap()
}

fn paths(n: usize) -> PathEnsemble {
    PathEnsemble::generate(&FbmSampler::new(weights(), 5), n, Execution::default()).unwrap()
}

fn affine() -> Coefficients {
    Coefficients::parse("affine:0.2,0.8").unwrap()
}

fn problem(driver: &str) -> BsdeProblem {
    BsdeProblem::new(affine(), Driver::parse(driver).unwrap(), Terminal::poly(1.0, 0.5, 0.5), vec![0.0], 64)
        .unwrap()
        .with_seed(11)
}

fn smooth_problem() -> BsdeProblem {
    BsdeProblem::new(
        Coefficients::parse("sine-vol:0.1,0.6,0.2").unwrap(),
        Driver::parse("sine:0.3,0.2").unwrap(),
        Terminal::poly(0.0, 1.0, 0.3),
        vec![0.2],
        64,
    )
    .unwrap()
    .with_degree(3)
}

#[test]
fn zero_driver_field_is_weighted_heat_solution() {
    let f = frame("0.5");
    let p = problem("zero").with_paths(20_000);
    for path in &paths(3).paths {
        let integrals = f.gamma_integrals(&path.dw0);
        for node in [16, 64] {
            let eps = f.log_epsilon(&integrals, node).exp();
            for x in [-1.0, 0.0, 1.0] {
                let pt = field_point(&p, &f, path, node, &[x]).unwrap();
                let heat = heat_oracle(&affine(), &p.terminal, f.grid().node(node), x).unwrap();
                assert!((pt.u - eps * heat).abs() <= 0.01 * (eps * heat).abs(), "{pt:?} vs {}", eps * heat);
                assert!((pt.u_hat - heat).abs() <= 0.01 * heat.abs());
            }
        }
    }
}

#[test]
fn trivial_frame_field_equals_hat_field() {
    let f = frame("0");
    let path = &paths(1).paths[0];
    let p = problem("linear:0.3,0.4,0.5").with_paths(500);
    let pt = field_point(&p, &f, path, 20, &[0.4]).unwrap();
    assert_eq!(pt.u, pt.u_hat);
    let origin = field_point(&p, &f, path, 0, &[0.4]).unwrap();
    assert_eq!(origin.u, p.terminal.eval(&[0.4]));
}

#[test]
fn finite_differences_agree_with_monte_carlo() {
    let f = frame("0.5");
    let path = &paths(1).paths[0];
    let p = problem("linear:0.3,0.4,0.5").with_paths(20_000);
    let report = pde_crosscheck(&p, &f, path, &[16, 32, 64], FdConfig::default(), Execution::default()).unwrap();
    assert!(report.x_max > FdConfig::default().half_width);
    assert!(!report.rows.is_empty());
    for r in &report.rows {
        assert!(r.x.abs() <= 1.5 + 1e-12);
        assert!(r.passes(), "{r:?}");
    }
    let mut buf = Vec::new();
    write_fd_csv(&mut buf, &report).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,x,fd,mc,se,discrepancy");
    assert_eq!(text.lines().count(), report.rows.len() + 1);
}

#[test]
fn unstable_step_is_rejected() {
    let f = frame("0.5");
    let path = &paths(1).paths[0];
    let p = problem("zero");
    let x: Vec<f64> = (0..401).map(|i| -4.0 + 0.02 * i as f64).collect();
    let err = fd_solve(&p, &f, &f.gamma_integrals(&path.dw0), x, 4, 1).unwrap_err();
    assert!(matches!(err, Error::Cfl { dt, max_dt } if dt > max_dt));
}

#[test]
fn exit_radius_grows_with_confidence() {
    let g = *weights().grid();
    let loose = exit_radius(&affine(), &g, 64, &[0.0], 1e-1, 20_000, 1).unwrap();
    let tight = exit_radius(&affine(), &g, 64, &[0.0], 1e-3, 20_000, 1).unwrap();
    assert!(loose < tight);
    // The drift of 0.2 and a normal tail: sup |X − x| is about 1.65 σ at 10%.
    assert!(loose > 1.0 && loose < 2.0, "{loose}");
}

#[test]
fn growth_exponent_is_bounded() {
    let frames: Vec<_> = ["0.25", "0.5", "1"].iter().map(|g| frame(g)).collect();
    let p = problem("linear:0.3,0.4,0.5").with_paths(2000);
    let g = growth_fit(&p, &frames, &paths(12), 64, &lattice(1, 1.5, 5), Execution::default()).unwrap();
    assert_eq!(g.points.len(), 36);
    assert!(g.fit.slope <= 1.2, "{:?}", g.fit);
}

#[test]
fn field_is_regular() {
    let f = frame("0.5");
    let p = problem("linear:0.3,0.4,0.5").with_paths(20_000);
    let r = regularity_probe(&p, &f, &paths(1).paths[0], 64, 0.3, &[1, 2, 4, 8], &[0.05, 0.1, 0.2, 0.4]).unwrap();
    assert!(r.t_exponent >= 0.4, "{r:?}");
    assert!(r.x_exponent >= 0.9, "{r:?}");
}

#[test]
fn flow_property_holds_along_paths() {
    let f = frame("0.5");
    let p = problem("linear:0.3,0.4,0.5").with_paths(20_000);
    let rows = flow_identity(&p, &f, &paths(1).paths[0], 64, &[0.3], 32, &[0, 1, 2, 3, 4]).unwrap();
    for r in rows {
        let gap = (r.y_s - r.u_hat).abs();
        assert!(gap <= (0.01 * r.u_hat.abs()).max(4.0 * r.se), "{r:?}");
    }
}

#[test]
fn variational_and_regression_z_agree() {
    let f = frame("0.5");
    let p = smooth_problem().with_paths(16_000);
    for path in &paths(2).paths {
        let v = variational_z(&p, &f, path).unwrap();
        assert_eq!(v.regression.len(), 64);
        assert!(v.relative_rms() <= 0.05, "{}", v.relative_rms());
        assert!(v.sup_moment(2.0).is_finite());
    }
}

#[test]
fn forward_moments_scale_with_start_point() {
    let g = *weights().grid();
    let xs: Vec<Vec<f64>> = [0.0, 1.0, 4.0, 16.0].iter().map(|x| vec![*x]).collect();
    let c = forward_moment_constants(&Coefficients::parse("ou:0.5,0.7").unwrap(), &g, 64, &xs, 2.0, 4000, 2).unwrap();
    for v in &c {
        assert!(*v > 0.0 && *v < 3.0, "{c:?}");
    }
}

#[test]
fn two_dimensional_field_layout() {
    let f = frame("0.5");
    let p = BsdeProblem::new(
        Coefficients::parse("heat2:0.7").unwrap(),
        Driver::parse("zero").unwrap(),
        Terminal::poly(0.0, 0.0, 1.0),
        vec![0.0, 0.0],
        32,
    )
    .unwrap()
    .with_paths(4000);
    let path: &FbmPath = &paths(1).paths[0];
    let lat = lattice(2, 1.0, 3);
    let field = value_field(&p, &f, path, &[32], &lat, Execution::default()).unwrap();
    assert_eq!(field.points.len(), 9);
    let t = f.grid().node(32);
    for pt in &field.points {
        // E|x + 0.7 W_t|² = |x|² + 2 (0.49 t)
        let exact = pt.x.iter().map(|v| v * v).sum::<f64>() + 2.0 * 0.49 * t;
        assert!((pt.u_hat - exact).abs() <= 4.0 * pt.se_hat + 1e-3, "{pt:?} vs {exact}");
    }
    let mut buf = Vec::new();
    write_field_csv(&mut buf, &field).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,x1,x2,u_hat,u,se");
    assert_eq!(text.lines().count(), 10);
}

#[test]
fn lattice_dimension_mismatch_is_rejected() {
    let f = frame("0.5");
    let p = problem("zero").with_paths(200);
    let err = value_field(&p, &f, &paths(1).paths[0], &[8], &lattice(2, 1.0, 2), Execution::default()).unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn heat_oracle_is_affine_on_affine_terminals(b in -1.0f64..1.0, s in 0.1f64..2.0, c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, t in 0.0f64..1.0, x in -3.0f64..3.0) {
        let c = Coefficients::parse(&format!("affine:{b},{s}")).unwrap();
        let v = heat_oracle(&c, &Terminal::poly(c0, c1, 0.0), t, x).unwrap();
        prop_assert!((v - (c0 + c1 * (x + b * t))).abs() < 1e-9 * (1.0 + c0.abs() + c1.abs() * (1.0 + x.abs())));
    }

    #[test]
    fn finite_differences_keep_constants(c in -5.0f64..5.0, upto in 1usize..10) {
        let f = frame("0.5");
        let p = BsdeProblem::new(affine(), Driver::parse("zero").unwrap(), Terminal::constant(c), vec![0.0], 64).unwrap();
        let x: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
        let sol = fd_solve(&p, &f, &vec![0.0; 65], x, upto, 4).unwrap();
        prop_assert!(sol.values[upto].iter().all(|v| (v - c).abs() < 1e-12));
    }

    #[test]
    fn lattices_are_symmetric(a in 0.1f64..5.0, n in 2usize..12) {
        let l = lattice(1, a, n);
        prop_assert_eq!(l.len(), n);
        for (p, q) in l.iter().zip(l.iter().rev()) {
            prop_assert!((p[0] + q[0]).abs() < 1e-12);
        }
    }
}
