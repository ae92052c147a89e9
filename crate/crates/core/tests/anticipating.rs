use fracbdsde_core::anticipating::{
    heun_order, residual_duality_check, solve_anticipating, solve_path, solve_zeta, DriftSpec,
};
use fracbdsde_core::fractional::{FbmSampler, Hurst, KernelWeights, PathEnsemble};
use fracbdsde_core::functional::{NodeCombination, Polynomial, TestFunctional};
use fracbdsde_core::girsanov::{GammaProfile, GammaSpec, GirsanovFrame, Shift};
use fracbdsde_core::{Execution, TimeGrid};
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

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn zero_drift_gives_geometric_noise() {
    let f = frame("0.8@0.5,0.4@1");
    let sampler = FbmSampler::new(f.weights().clone(), 1);
    let drift = DriftSpec::parse("zero").unwrap();
    for k in 0..20 {
        let p = sampler.path(k);
        let s = solve_path(&p, &f, &drift, &TestFunctional::constant(1.5), 1).unwrap();
        for j in 0..=64 {
            assert!(rel(s.x[j], 1.5 * s.log_epsilon[j].exp()) < 1e-14);
        }
        assert_eq!(solve_zeta(&p, &f, &drift, 2.0, 1).unwrap(), vec![2.0; 65]);
    }
}

#[test]
fn linear_drift_matches_closed_form() {
    let f = frame("0.8@0.5,0.4@1");
    let sampler = FbmSampler::new(f.weights().clone(), 2);
    let drift = DriftSpec::parse("linear:0.5").unwrap();
    for k in 0..10 {
        let p = sampler.path(k);
        let s = solve_path(&p, &f, &drift, &TestFunctional::constant(2.0), 64).unwrap();
        for j in 0..=64 {
            let t = f.grid().node(j);
            let exact = 2.0 * (0.5 * t).exp() * s.log_epsilon[j].exp();
            assert!(rel(s.x[j], exact) < 1e-8, "node {j}: {} vs {exact}", s.x[j]);
        }
    }
}

#[test]
fn constant_drift_matches_trapezoid_oracle() {
    let f = frame("0.6");
    let sampler = FbmSampler::new(f.weights().clone(), 3);
    let drift = DriftSpec::parse("const:1").unwrap();
    for k in 0..10 {
        let p = sampler.path(k);
        let z = solve_zeta(&p, &f, &drift, 0.3, 1).unwrap();
        // Independent oracle: trapezoid sum of ε_s^{-1}(T_s) computed on explicitly shifted paths.
        let inv: Vec<f64> = (0..=64)
            .map(|s| {
                let shifted = f.shift_path(&p, s, Shift::Forward);
                (-f.log_epsilon(&f.gamma_integrals(&shifted.dw0), s)).exp()
            })
            .collect();
        let mut acc = 0.3;
        for j in 0..64 {
            acc += 0.5 * f.grid().dt() * (inv[j] + inv[j + 1]);
            assert!(rel(z[j + 1], acc) < 1e-8);
        }
    }
}

#[test]
fn zero_gamma_reduces_to_the_ode() {
    let f = frame("0");
    let sampler = FbmSampler::new(f.weights().clone(), 4);
    let drift = DriftSpec::parse("sine:0.8").unwrap();
    let p = sampler.path(0);
    let s = solve_path(&p, &f, &drift, &TestFunctional::constant(0.4), 2).unwrap();
    let h = f.grid().dt() / 2.0;
    let mut x: f64 = 0.4;
    let mut t = 0.0;
    let b = |t: f64, x: f64| 0.8 * x.sin() + t.cos();
    for step in 0..128 {
        let k1 = b(t, x);
        let k2 = b(t + h, x + h * k1);
        x += 0.5 * h * (k1 + k2);
        t += h;
        if step % 2 == 1 {
            assert!(rel(s.x[step / 2 + 1], x) < 1e-12);
        }
    }
}

#[test]
fn conjugation_recovers_zeta() {
    let f = frame("0.8@0.5,0.4@1");
    let sampler = FbmSampler::new(f.weights().clone(), 5);
    let drift = DriftSpec::parse("path-sine:0.5,0.3").unwrap();
    let xi = TestFunctional::node_power(32, 0.5, 2);
    for k in 0..5 {
        let p = sampler.path(k);
        let i = f.gamma_integrals(&p.dw0);
        for t in [16, 40, 64] {
            let shifted = f.shift_path(&p, t, Shift::Forward);
            let x_shifted = solve_path(&shifted, &f, &drift, &xi, 2).unwrap().x[t];
            let y = x_shifted * (-f.log_e(&i, t)).exp();
            let x0 = xi.eval(&xi.coordinates(&p.b, None));
            let zeta = solve_zeta(&p, &f, &drift, x0, 2).unwrap()[t];
            assert!(rel(y, zeta) < 1e-8, "{y} vs {zeta}");
        }
    }
}

#[test]
fn heun_converges_with_order_two() {
    let f = frame("0.8@0.5,0.4@1");
    let sampler = FbmSampler::new(f.weights().clone(), 6);
    let paths: Vec<_> = (0..8).map(|k| sampler.path(k)).collect();
    let order = heun_order(&paths, &f, &DriftSpec::parse("sine:1").unwrap(), 0.5, 1, 64).unwrap();
    assert!((order - 2.0).abs() < 0.3, "order {order}");
}

#[test]
fn second_moments_are_stable() {
    let f = frame("0.8@0.5,0.4@1");
    let sampler = FbmSampler::new(f.weights().clone(), 7);
    let drift = DriftSpec::parse("sine:0.5").unwrap();
    let xi = TestFunctional::constant(1.0);
    let small = PathEnsemble::generate(&sampler, 1000, Execution::default()).unwrap();
    let large = PathEnsemble::generate(&sampler, 2000, Execution::default()).unwrap();
    let a = solve_anticipating(&small, &f, &drift, &xi, 1, Execution::default()).unwrap().second_moments();
    let b = solve_anticipating(&large, &f, &drift, &xi, 1, Execution::default()).unwrap().second_moments();
    let ma = a.iter().cloned().fold(0.0, f64::max);
    let mb = b.iter().cloned().fold(0.0, f64::max);
    assert!(ma.is_finite() && mb.is_finite());
    assert!((0.8..=1.25).contains(&(mb / ma)), "{ma} vs {mb}");
}

#[test]
fn residual_satisfies_duality() {
    let f = frame("0.8@0.5,0.4@1");
    let sampler = FbmSampler::new(f.weights().clone(), 8);
    let ens = PathEnsemble::generate(&sampler, 20_000, Execution::default()).unwrap();
    let drift = DriftSpec::parse("path-sine:0.5,0.3").unwrap();
    let xi = TestFunctional::new(
        "1+B(0.25)",
        vec![NodeCombination::node(16)],
        vec![],
        Polynomial::new(1, vec![(1.0, vec![0]), (1.0, vec![1])]).unwrap(),
    )
    .unwrap();
    let sol = solve_anticipating(&ens, &f, &drift, &xi, 1, Execution::default()).unwrap();
    let family = vec![
        TestFunctional::constant(1.0),
        TestFunctional::node_power(32, 0.5, 1),
        TestFunctional::node_power(32, 0.5, 2),
    ];
    for m in [32, 64] {
        let rows = residual_duality_check(&sol, &ens, &f, family.clone(), m, Execution::default()).unwrap();
        for r in rows {
            assert!(r.z.abs() < 4.0, "node {m}: {r:?}");
        }
    }
}
