//! The acceptance criteria as executable checks. Every criterion returns a
//! report of named comparisons and writes its tables when an output directory is set.

use crate::config::RunConfig;
use fracbdsde_core::anticipating::{
    heun_order, residual_duality_check as sde_duality, solve_anticipating, solve_path, solve_zeta, DriftSpec,
};
use fracbdsde_core::bdsde::{
    apriori_fit, classical_equivalence, comparison_check, linear_mean_check, residual_duality_check as bdsde_duality,
    round_trip_error, self_convergence, solve_b_path, write_solution_csv, BsdeProblem, Coefficients, Driver, Terminal,
};
use fracbdsde_core::divergence::{duality_check_deterministic, write_duality_report, DualityRow, GramRoute};
use fracbdsde_core::export::{create, num, write_table};
use fracbdsde_core::fractional::{
    covariance_r, frac_derivative_left, frac_derivative_right, frac_integral_left, frac_integral_right, kernel_product,
    op_k, op_k_star, FbmSampler, KernelWeights, PathEnsemble,
};
use fracbdsde_core::functional::{standard_family, NodeCombination, Polynomial, TestFunctional};
use fracbdsde_core::girsanov::{
    exp_moment_bound, girsanov_expectation_check, write_girsanov_report, GammaProfile, GirsanovFrame, Shift,
};
use fracbdsde_core::spde::{
    field_point, growth_fit, heat_oracle, lattice, pde_crosscheck, value_field, variational_z, write_fd_csv,
    write_field_csv, FdConfig,
};
use fracbdsde_core::stats::{convergence_order, MeanSe};
use fracbdsde_core::{Error, Execution, GridFunction, Result, TimeGrid};
use statrs::function::gamma::gamma;
use std::collections::HashMap;
use std::fmt;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

pub const TITLES: [&str; 9] = [
    "fBm law",
    "fractional-calculus inversion",
    "adjointness and isometry",
    "Girsanov suite",
    "divergence duality",
    "anticipating SDE",
    "BDSDE solver",
    "SPDE field",
    "estimate directions",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Holds,
}

/// One named comparison of a statistic against its limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, bound: Bound::AtMost(limit), passed: value <= limit }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, bound: Bound::AtLeast(limit), passed: value >= limit }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, bound: Bound::Holds, passed: ok }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "ok  " } else { "FAIL" };
        match self.bound {
            Bound::AtMost(l) => write!(f, "[{mark}] {}: {:.4e} (limit <= {l:e})", self.name, self.value),
            Bound::AtLeast(l) => write!(f, "[{mark}] {}: {:.4e} (limit >= {l:e})", self.name, self.value),
            Bound::Holds => write!(f, "[{mark}] {}", self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: u8,
    pub checks: Vec<Check>,
    /// Reported numbers that do not gate the criterion.
    pub notes: Vec<String>,
    /// Set when a module error stopped the criterion.
    pub error: Option<String>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn title(&self) -> &'static str {
        TITLES[self.id as usize - 1]
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn status_line(&self) -> String {
        format!(
            "criterion {} ({}): {} [{:.1} s]",
            self.id,
            self.title(),
            if self.passed() { "PASS" } else { "FAIL" },
            self.seconds
        )
    }

    pub fn detail(&self) -> String {
        let mut lines: Vec<String> = self.checks.iter().map(|c| format!("  {c}")).collect();
        lines.extend(self.notes.iter().map(|n| format!("  note: {n}")));
        if let Some(e) = &self.error {
            lines.push(format!("  error: {e}"));
        }
        lines.join("\n")
    }
}

/// Shared state of one run: configuration, execution mode, output directory and kernel tables.
pub struct Context {
    pub config: RunConfig,
    pub exec: Execution,
    pub out: Option<PathBuf>,
    weights: Mutex<HashMap<usize, Arc<KernelWeights>>>,
}

impl Context {
    pub fn new(config: RunConfig, exec: Execution, out: Option<PathBuf>) -> Self {
        Self { config, exec, out, weights: Mutex::new(HashMap::new()) }
    }

    fn grid(&self, n: usize) -> Result<TimeGrid> {
        TimeGrid::new(self.config.horizon, n)
    }

    fn weights(&self, n: usize) -> Result<Arc<KernelWeights>> {
        if let Some(w) = self.weights.lock().expect("weights lock").get(&n) {
            return Ok(w.clone());
        }
        let w = Arc::new(KernelWeights::new(self.grid(n)?, self.config.hurst(), self.exec)?);
        Ok(self.weights.lock().expect("weights lock").entry(n).or_insert(w).clone())
    }

    fn frame(&self, n: usize, gamma: &GammaProfile) -> Result<GirsanovFrame> {
        let w = self.weights(n)?;
        let spec = gamma.on_grid(w.grid(), self.config.p_value())?;
        GirsanovFrame::build(w, spec, self.exec)
    }

    fn ensemble(&self, n: usize, stream: u64, size: usize) -> Result<PathEnsemble> {
        PathEnsemble::generate(&FbmSampler::new(self.weights(n)?, self.seed(stream)), size, self.exec)
    }

    /// Independent seed per check.
    fn seed(&self, stream: u64) -> u64 {
        self.config.seed.wrapping_mul(1_000_003).wrapping_add(stream)
    }

    /// The configured problem started at `start` from `x = 0.5` in every coordinate.
    fn problem(&self, start: usize) -> Result<BsdeProblem> {
        let c = &self.config;
        Ok(BsdeProblem::new(c.coeff, c.driver, c.terminal, vec![0.5; c.coeff.dim()], start)?
            .with_paths(c.wpaths)
            .with_degree(c.basis_degree))
    }

    fn write(&self, name: &str, f: impl FnOnce(&mut BufWriter<std::fs::File>) -> Result<()>) -> Result<()> {
        if let Some(dir) = &self.out {
            let mut w = create(&dir.join(name))?;
            f(&mut w)?;
            w.flush()?;
        }
        Ok(())
    }
}

/// Node closest to the fraction `frac` of the horizon, at least 1.
fn node(n: usize, frac: f64) -> usize {
    ((frac * n as f64).round() as usize).clamp(1, n)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn max_abs_z(rows: &[DualityRow]) -> f64 {
    rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max)
}

pub fn run_criterion(id: u8, ctx: &Context) -> CriterionReport {
    let start = Instant::now();
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let result = match id {
        1 => fbm_law(ctx, &mut checks, &mut notes),
        2 => inversion(ctx, &mut checks, &mut notes),
        3 => transfer(ctx, &mut checks, &mut notes),
        4 => girsanov(ctx, &mut checks, &mut notes),
        5 => duality(ctx, &mut checks, &mut notes),
        6 => anticipating(ctx, &mut checks, &mut notes),
        7 => bdsde(ctx, &mut checks, &mut notes),
        8 => spde(ctx, &mut checks, &mut notes),
        9 => estimates(ctx, &mut checks, &mut notes),
        _ => Err(Error::InvalidArgument(format!("no criterion {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    if let Some(limit) = time_budget(id) {
        checks.push(Check::at_most("wall clock, seconds", seconds, limit));
    }
    CriterionReport { id, checks, notes, error: result.err().map(|e| e.to_string()), seconds }
}

/// Wall-clock allowance of a criterion, where one is set.
pub fn time_budget(id: u8) -> Option<f64> {
    match id {
        1..=3 => Some(60.0),
        4 | 6 => Some(120.0),
        5 | 9 => Some(300.0),
        7 | 8 => Some(600.0),
        _ => None,
    }
}

type Out<'a> = &'a mut Vec<Check>;
type Notes<'a> = &'a mut Vec<String>;

fn fbm_law(ctx: &Context, checks: Out, notes: Notes) -> Result<()> {
    let c = &ctx.config;
    let n = c.steps;
    let h = c.hurst();
    let ens = ctx.ensemble(n, 1, c.paths)?;
    let g = *ens.grid();
    let mut rows = Vec::new();
    for (a, b) in [(1.0, 1.0), (0.5, 0.5), (1.0, 0.5), (0.75, 0.25), (0.25, 0.125)] {
        let (j, k) = (node(n, a), node(n, b));
        let prods: Vec<f64> = ens.paths.iter().map(|p| p.b[j] * p.b[k]).collect();
        let s = MeanSe::of(&prods);
        let target = covariance_r(&h, g.node(j), g.node(k));
        let z = (s.mean - target).abs() / s.se;
        checks.push(Check::at_most(format!("Cov(B_{}, B_{}) |z|", num(g.node(j)), num(g.node(k))), z, 4.0));
        rows.push([num(g.node(j)), num(g.node(k)), num(s.mean), num(target), num(s.se), num(z)]);
    }
    let mut worst: f64 = 0.0;
    for f in [0.25, 0.5, 0.75, 1.0] {
        let t = f * c.horizon;
        worst = worst.max(rel(kernel_product(&h, t, t)?, t.powf(2.0 * h.value())));
    }
    checks.push(Check::at_most("kernel quadrature ∫K² = t^{2H}, relative", worst, 1e-4));
    notes.push(format!("simulated Var(B_T) = {:.6} from cell-averaged kernels", ens.sampler.weights().gram(n, n)));
    ctx.write("fbm_covariance.csv", |w| write_table(w, &["t", "s", "empirical", "exact", "se", "z"], rows))?;
    ctx.write("fbm_paths.csv", |w| {
        let head = PathEnsemble { sampler: ens.sampler.clone(), paths: ens.paths.iter().take(1000).cloned().collect() };
        head.write_csv(w)
    })?;
    ctx.write("kernel_weights.csv", |w| ens.sampler.weights().write_csv(w))
}

fn l2_error(a: &[f64], b: &[f64], dt: f64) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * dt).sqrt()
}

type Case = (&'static str, fn(f64) -> f64);

fn inversion(ctx: &Context, checks: Out, _notes: Notes) -> Result<()> {
    let c = &ctx.config;
    let t_end = c.horizon;
    let fs: [Case; 3] = [("u", |u| u), ("1+u^2", |u| 1.0 + u * u), ("2-u+u^3/2", |u| 2.0 - u + 0.5 * u * u * u)];
    let alphas = [c.hurst, 0.5 - c.hurst];
    let mut rows = Vec::new();
    for (name, f) in fs {
        for alpha in alphas {
            for right in [false, true] {
                let err = |n: usize| -> Result<f64> {
                    let g = ctx.grid(n)?;
                    let fg = GridFunction::from_nodes(g, f);
                    let d = if right {
                        frac_derivative_right(&frac_integral_right(&fg, alpha)?, alpha)?
                    } else {
                        frac_derivative_left(&frac_integral_left(&fg, alpha)?, alpha)?
                    };
                    Ok(l2_error(d.values(), GridFunction::from_cells(g, f).values(), g.dt()))
                };
                let (e256, e1024) = (err(256)?, err(1024)?);
                let order = convergence_order(e256, e1024, 4.0);
                let side = if right { "right" } else { "left" };
                checks.push(Check::at_least(
                    format!("D^α I^α f = f order, f = {name}, α = {alpha}, {side}"),
                    order,
                    0.4,
                ));
                rows.push([name.to_string(), side.to_string(), num(alpha), num(e256), num(e1024), num(order)]);
            }
        }
    }
    let g = ctx.grid(64)?;
    let mut worst: f64 = 0.0;
    for alpha in alphas {
        let one = GridFunction::from_nodes(g, |_| 1.0);
        let lin = GridFunction::from_nodes(g, |u| u);
        let (il, ir, iu) =
            (frac_integral_left(&one, alpha)?, frac_integral_right(&one, alpha)?, frac_integral_left(&lin, alpha)?);
        for (k, t) in g.nodes().into_iter().enumerate() {
            worst = worst.max((il.values()[k] - t.powf(alpha) / gamma(1.0 + alpha)).abs());
            worst = worst.max((ir.values()[k] - (t_end - t).powf(alpha) / gamma(1.0 + alpha)).abs());
            worst = worst.max((iu.values()[k] - t.powf(1.0 + alpha) / gamma(2.0 + alpha)).abs());
        }
        let (dl, dr) = (frac_derivative_left(&one, alpha)?, frac_derivative_right(&one, alpha)?);
        for k in 0..g.n_steps() {
            let s = g.midpoint(k);
            worst = worst.max(rel(dl.values()[k], s.powf(-alpha) / gamma(1.0 - alpha)));
            worst = worst.max(rel(dr.values()[k], (t_end - s).powf(-alpha) / gamma(1.0 - alpha)));
        }
    }
    checks.push(Check::at_most("power rules for 1 and u", worst, 1e-10));
    ctx.write("fraccalc_inversion.csv", |w| {
        write_table(w, &["function", "side", "alpha", "err256", "err1024", "order"], rows)
    })
}

fn transfer(ctx: &Context, checks: Out, _notes: Notes) -> Result<()> {
    let h = ctx.config.hurst();
    let t_end = ctx.config.horizon;
    let g = ctx.grid(1024)?;
    let step = |cuts: &'static [(f64, f64)]| {
        GridFunction::from_cells(g, move |s| cuts.iter().find(|(e, _)| s < e * t_end).map_or(0.0, |(_, v)| *v))
    };
    let phis = [
        step(&[(0.5, 1.0)]),
        step(&[(0.25, 1.0), (0.75, -0.5), (1.0, 2.0)]),
        step(&[(0.125, 3.0), (0.625, 1.0)]),
        step(&[(0.5, -1.0), (1.0, 1.0)]),
        step(&[(0.375, 0.5), (0.875, 2.0), (1.0, -1.0)]),
    ];
    let psis = [
        step(&[(1.0, 1.0)]),
        step(&[(0.5, 2.0), (0.75, 1.0)]),
        step(&[(0.25, -1.0), (1.0, 1.0)]),
        step(&[(0.5, -1.0), (1.0, 1.0)]),
        step(&[(0.625, 1.5)]),
    ];
    let gs: [fn(f64) -> f64; 5] = [|s| s, |s| s * s, |s| s * (1.0 - s), |s| s + s * s * s, |s| (2.0 * s).sin()];
    let mut rows = Vec::new();
    for (k, (phi, gf)) in phis.iter().zip(gs).enumerate() {
        let kstar = op_k_star(&GridFunction::from_nodes(g, move |s| gf(s / t_end)), h)?;
        let lhs = kstar.l2_inner(phi)?;
        let rhs = op_k(phi, h)?.pair(move |s| gf(s / t_end))?;
        let r = rel(lhs, rhs);
        checks.push(Check::at_most(format!("⟨K*g, φ⟩ = ⟨g, Kφ⟩ pair {}", k + 1), r, 1e-3));
        rows.push(["adjoint".to_string(), (k + 1).to_string(), num(lhs), num(rhs), num(r)]);
    }
    for (k, (phi, psi)) in phis.iter().zip(&psis).enumerate() {
        let (a, b) = (op_k(phi, h)?, op_k(psi, h)?);
        let (lhs, rhs) = (a.inner(&b)?, a.lambda_inner(&b));
        let r = rel(lhs, rhs);
        checks.push(Check::at_most(format!("⟨Kφ, Kψ⟩ = ⟨φ, ψ⟩_Λ pair {}", k + 1), r, 1e-3));
        rows.push(["isometry".to_string(), (k + 1).to_string(), num(lhs), num(rhs), num(r)]);
    }
    ctx.write("transfer.csv", |w| write_table(w, &["identity", "pair", "lhs", "rhs", "relative"], rows))
}

fn girsanov(ctx: &Context, checks: Out, notes: Notes) -> Result<()> {
    let c = &ctx.config;
    let n = c.steps;
    let f = ctx.frame(n, &c.gamma)?;
    let ens = ctx.ensemble(n, 4, c.paths)?;
    let probe = &ens.paths[..ens.len().min(200)];
    let times = [1, node(n, 0.25), node(n, 0.5), n];
    let mut ulps: f64 = 0.0;
    for p in probe {
        let scale = p.dw0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for &t in &times {
            for (a, b) in [(Shift::Forward, Shift::Backward), (Shift::Backward, Shift::Forward)] {
                let back = f.shift_path(&f.shift_path(p, t, a), t, b);
                for (x, y) in back.dw0.iter().zip(&p.dw0) {
                    ulps = ulps.max((x - y).abs() / (f64::EPSILON * scale));
                }
            }
        }
    }
    checks.push(Check::at_most("T∘A = A∘T = id, in units of ε·max|ΔW|", ulps, 4.0));
    let family = standard_family(f.grid());
    for t in [node(n, 0.5), n] {
        let rows = girsanov_expectation_check(&family, &f, t, &ens, ctx.exec);
        let eps = &rows[0];
        checks.push(Check::at_most(format!("E[ε_t] = 1 at t = {} |z|", num(f.grid().node(t))), eps.z.abs(), 4.0));
        let worst = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
        checks.push(Check::at_most(
            format!("E[F] = E[F(A_t) ε_t] at t = {}, max |z|", num(f.grid().node(t))),
            worst,
            4.0,
        ));
        ctx.write(&format!("girsanov_identity_node{t}.csv"), |w| write_girsanov_report(w, &rows))?;
    }
    let (mut eps_err, mut j_err) = (0.0f64, 0.0f64);
    for p in probe.iter().take(50) {
        let i = f.gamma_integrals(&p.dw0);
        for s in [node(n, 0.125), node(n, 0.5), node(n, 0.75), n] {
            let is = f.gamma_integrals(&f.shift_path(p, s, Shift::Forward).dw0);
            eps_err = eps_err.max((f.log_epsilon(&is, s) - f.log_epsilon(&i, s) - f.q(s)).abs());
            for v in [0, node(n, 0.25), n] {
                let both = f.shift_path(&f.shift_path(p, v, Shift::Backward), s, Shift::Forward);
                let direct = -f.log_epsilon(&f.gamma_integrals(&both.dw0), s);
                j_err = j_err.max((direct - (-f.log_e(&i, s) + f.log_j_factor(s, v))).abs());
            }
        }
    }
    // Differences of logarithms are relative errors of the exponentials.
    checks.push(Check::at_most("ε_s(T_s) = ε_s exp(q_s), relative", eps_err, 1e-10));
    checks.push(Check::at_most("ε_r^{-1}(T_r A_v) = ε_r^{-1}(T_r) J_r^v, relative", j_err, 1e-10));
    let h = c.hurst();
    let bound = exp_moment_bound(f.gamma(), &h, c.bound_constant)?;
    let m = MeanSe::of(&ens.paths.iter().map(|p| f.running_sup(&f.gamma_integrals(&p.dw0)).exp()).collect::<Vec<_>>());
    notes.push(format!(
        "E[exp I*_T] = {:.4} ± {:.4}; G_p = {:.4}; bound with C = {} is {:.4e}",
        m.mean, m.se, bound.g_p, bound.constant, bound.bound
    ));
    ctx.write("girsanov_bound.csv", |w| {
        write_table(
            w,
            &["g_p", "constant", "bound", "empirical", "se"],
            [[num(bound.g_p), num(bound.constant), num(bound.bound), num(m.mean), num(m.se)]],
        )
    })
}

fn duality(ctx: &Context, checks: Out, _notes: Notes) -> Result<()> {
    let c = &ctx.config;
    let n = c.steps;
    let t_end = c.horizon;
    let ens = ctx.ensemble(n, 5, c.paths)?;
    let g = *ens.grid();
    let fam = standard_family(&g);
    let step = |f: fn(f64) -> f64| GridFunction::from_cells(g, move |s| f(s / t_end));
    let half = GridFunction::from_cells(g, |s| if s < g.node(node(n, 0.5)) { 1.0 } else { 0.0 });
    let pairs: Vec<(&str, GridFunction, TestFunctional)> = vec![
        ("1", step(|_| 1.0), fam[1].clone()),
        ("1_[0,T/2]", half.clone(), fam[2].clone()),
        (
            "2,-1,0 steps",
            step(|t| {
                if t < 0.25 {
                    2.0
                } else if t < 0.75 {
                    -1.0
                } else {
                    0.0
                }
            }),
            fam[3].clone(),
        ),
        ("1+t", step(|t| 1.0 + t), fam[4].clone()),
        ("1_[0,T/2]", half, fam[5].clone()),
        ("cos 3t", step(|t| (3.0 * t).cos()), TestFunctional::constant(1.0)),
    ];
    let mut all = Vec::new();
    for (label, u, f) in pairs {
        let mut rows = duality_check_deterministic(&u, vec![f], &ens, GramRoute::Discrete, ctx.exec)?;
        let r = &mut rows[0];
        checks.push(Check::at_most(
            format!("E[F δ(u)] = E⟨K*K D F, u⟩, u = {label}, F = {} |z|", r.functional),
            r.z.abs(),
            4.0,
        ));
        r.functional = format!("u={label};F={}", r.functional);
        all.push(r.clone());
    }
    ctx.write("duality_deterministic.csv", |w| write_duality_report(w, &all))?;

    let family = vec![
        TestFunctional::constant(1.0),
        TestFunctional::node_power(node(n, 0.5), g.node(node(n, 0.5)), 1),
        TestFunctional::node_power(node(n, 0.5), g.node(node(n, 0.5)), 2),
    ];
    let frame = ctx.frame(n, &c.gamma)?;
    let drift = DriftSpec::parse("path-sine:0.5,0.3")?;
    let q = node(n, 0.25);
    let xi = TestFunctional::new(
        format!("1+B({})", num(g.node(q))),
        vec![NodeCombination::node(q)],
        vec![],
        Polynomial::new(1, vec![(1.0, vec![0]), (1.0, vec![1])])?,
    )?;
    let sde_ens = ctx.ensemble(n, 51, c.paths)?;
    let sol = solve_anticipating(&sde_ens, &frame, &drift, &xi, 1, ctx.exec)?;
    let mut sde_rows = Vec::new();
    for m in [node(n, 0.5), n] {
        let rows = sde_duality(&sol, &sde_ens, &frame, family.clone(), m, ctx.exec)?;
        checks.push(Check::at_most(
            format!("anticipating SDE residual at t = {}, max |z|", num(g.node(m))),
            max_abs_z(&rows),
            4.0,
        ));
        sde_rows.extend(rows.into_iter().map(|mut r| {
            r.functional = format!("t={};F={}", num(g.node(m)), r.functional);
            r
        }));
    }
    ctx.write("duality_sde.csv", |w| write_duality_report(w, &sde_rows))?;

    let p = ctx.problem(n)?.with_seed(ctx.seed(52));
    let b_ens = ctx.ensemble(n, 53, c.bpaths)?;
    let mut b_rows = Vec::new();
    for m in [node(n, 0.5), n] {
        let rows = bdsde_duality(&p, &frame, &b_ens, family.clone(), m, ctx.exec)?;
        checks.push(Check::at_most(
            format!("BDSDE residual at t = {}, max |z|", num(g.node(m))),
            max_abs_z(&rows),
            4.0,
        ));
        b_rows.extend(rows.into_iter().map(|mut r| {
            r.functional = format!("t={};F={}", num(g.node(m)), r.functional);
            r
        }));
    }
    ctx.write("duality_bdsde.csv", |w| write_duality_report(w, &b_rows))
}

fn anticipating(ctx: &Context, checks: Out, _notes: Notes) -> Result<()> {
    let c = &ctx.config;
    let n = c.steps;
    let f = ctx.frame(n, &c.gamma)?;
    let sampler = FbmSampler::new(f.weights().clone(), ctx.seed(6));
    let g = *f.grid();
    let (mut zero, mut linear, mut conj) = (0.0f64, 0.0f64, 0.0f64);
    let xi = TestFunctional::node_power(node(n, 0.5), g.node(node(n, 0.5)), 2);
    let path_sine = DriftSpec::parse("path-sine:0.5,0.3")?;
    // Heun's error on the linear case stays below 1e-8 with 4096 sub-steps over the horizon.
    let fine = (4096 / n).max(64);
    for k in 0..20 {
        let p = sampler.path(k);
        let s = solve_path(&p, &f, &DriftSpec::parse("zero")?, &TestFunctional::constant(1.5), 1)?;
        let l = solve_path(&p, &f, &DriftSpec::parse("linear:0.5")?, &TestFunctional::constant(2.0), fine)?;
        for j in 0..=n {
            zero = zero.max(rel(s.x[j], 1.5 * s.log_epsilon[j].exp()));
            linear = linear.max(rel(l.x[j], 2.0 * (0.5 * g.node(j)).exp() * l.log_epsilon[j].exp()));
        }
        if k < 5 {
            let i = f.gamma_integrals(&p.dw0);
            let x0 = xi.eval(&xi.coordinates(&p.b, None));
            let zeta = solve_zeta(&p, &f, &path_sine, x0, 2)?;
            for t in [node(n, 0.25), node(n, 0.625), n] {
                let shifted = f.shift_path(&p, t, Shift::Forward);
                let y = solve_path(&shifted, &f, &path_sine, &xi, 2)?.x[t] * (-f.log_e(&i, t)).exp();
                conj = conj.max(rel(y, zeta[t]));
            }
        }
    }
    checks.push(Check::at_most("b ≡ 0: X = ξ ε per path, relative", zero, 1e-8));
    checks.push(Check::at_most("b linear: X = ξ e^{at} ε per path, relative", linear, 1e-8));
    checks.push(Check::at_most("X_t(T_t) ε_t^{-1}(T_t) = ζ_t per path, relative", conj, 1e-8));

    let trivial = ctx.frame(n, &GammaProfile::zero())?;
    let p = FbmSampler::new(trivial.weights().clone(), ctx.seed(61)).path(0);
    let s = solve_path(&p, &trivial, &DriftSpec::parse("sine:0.8")?, &TestFunctional::constant(0.4), 2)?;
    let b = |t: f64, x: f64| 0.8 * x.sin() + t.cos();
    let hstep = g.dt() / 2.0;
    let (mut x, mut t, mut ode) = (0.4f64, 0.0, 0.0f64);
    for step in 0..2 * n {
        let k1 = b(t, x);
        let k2 = b(t + hstep, x + hstep * k1);
        x += 0.5 * hstep * (k1 + k2);
        t += hstep;
        if step % 2 == 1 {
            ode = ode.max(rel(s.x[step / 2 + 1], x));
        }
    }
    checks.push(Check::at_most("γ ≡ 0 reduces to the ODE, relative", ode, 1e-10));

    let paths: Vec<_> = (0..8).map(|k| sampler.path(100 + k)).collect();
    let order = heun_order(&paths, &f, &DriftSpec::parse("sine:1")?, 0.5, 1, 64)?;
    checks.push(Check::at_most("Heun self-convergence |order − 2|", (order - 2.0).abs(), 0.3));
    let ens = PathEnsemble {
        sampler: sampler.clone(),
        paths: (0..c.paths.min(100) as u64).map(|k| sampler.path(k)).collect(),
    };
    let sol = solve_anticipating(&ens, &f, &path_sine, &xi, 1, ctx.exec)?;
    ctx.write("sde_paths.csv", |w| sol.write_csv(w, &f))?;
    ctx.write("sde_heun.csv", |w| write_table(w, &["drift", "order"], [["sine:1".to_string(), num(order)]]))
}

fn bdsde(ctx: &Context, checks: Out, notes: Notes) -> Result<()> {
    let c = &ctx.config;
    let n = c.steps;
    let f = ctx.frame(n, &c.gamma)?;
    let g = *f.grid();
    let p = ctx.problem(n)?.with_seed(ctx.seed(7));
    let ens = ctx.ensemble(n, 71, c.bpaths)?;
    let nodes: Vec<usize> = [0.125, 0.25, 0.5, 0.75, 1.0].iter().map(|a| node(n, *a)).collect();
    let rows = linear_mean_check(&p, &f, &ens, &nodes, ctx.exec)?;
    for r in &rows {
        checks.push(Check::at_most(format!("E[Y_t] vs closed form at t = {}, relative", num(r.t)), r.rel_error, 0.01));
    }
    ctx.write("bdsde_linear.csv", |w| {
        write_table(
            w,
            &["t", "solver", "closed_form", "rel_error", "se"],
            rows.iter().map(|r| [num(r.t), num(r.solver), num(r.closed_form), num(r.rel_error), num(r.se)]),
        )
    })?;
    let sols = ens.paths.iter().take(2).map(|path| solve_b_path(&p, &f, path)).collect::<Result<Vec<_>>>()?;
    ctx.write("bdsde_solution.csv", |w| write_solution_csv(w, &g, &sols))?;

    let trivial = ctx.frame(n, &GammaProfile::zero())?;
    let mut same = true;
    for path in ens.paths.iter().take(3) {
        same &= classical_equivalence(&p, &trivial, path)?;
        same &= solve_b_path(&p, &trivial, path)?.girsanov_part(n).iter().all(|v| *v == 0.0);
    }
    checks.push(Check::holds("γ ≡ 0 equals the classical run bit for bit", same));

    let mut trip: f64 = 0.0;
    for path in ens.paths.iter().take(3) {
        for m in [node(n, 0.125), node(n, 0.5), n] {
            trip = trip.max(round_trip_error(&p, &f, path, m)?);
        }
    }
    checks.push(Check::at_most("round trip through T_t and ε_t, relative", trip, 0.02));

    let small = ctx.ensemble(n, 72, (c.bpaths / 4).max(4))?;
    let lo = p.clone().with_driver(Driver::parse("const:0.2")?);
    let hi = p.clone().with_driver(Driver::parse("const:0.5")?).with_terminal(Terminal::poly(
        c.terminal.c0 + 0.5,
        c.terminal.c1,
        c.terminal.c2,
    ));
    let cmp = comparison_check(&lo, &hi, &f, &small, ctx.exec)?;
    let violations = cmp.iter().filter(|r| !r.holds()).count();
    checks.push(Check::at_most("comparison: nodes with E[Ŷ¹] > E[Ŷ²] + 2 se", violations as f64, 0.0));
    ctx.write("bdsde_comparison.csv", |w| {
        write_table(
            w,
            &["t", "lower", "upper", "se"],
            cmp.iter().map(|r| [num(g.node(r.node)), num(r.lower), num(r.upper), num(r.se)]),
        )
    })?;

    let frames = [32, 64, 128].iter().map(|m| ctx.frame(*m, &c.gamma)).collect::<Result<Vec<_>>>()?;
    let sc = self_convergence(
        &ctx.problem(128)?.with_seed(ctx.seed(73)),
        &frames,
        ctx.seed(74),
        (c.bpaths / 4).max(4),
        ctx.exec,
    )?;
    checks.push(Check::at_least("self-convergence order over 32, 64, 128 steps", sc.order, 0.5));
    notes.push(format!("self-convergence means {:?}", sc.means));
    ctx.write("bdsde_convergence.csv", |w| {
        write_table(w, &["steps", "mean"], sc.steps.iter().zip(&sc.means).map(|(s, m)| [s.to_string(), num(*m)]))
    })
}

fn spde(ctx: &Context, checks: Out, notes: Notes) -> Result<()> {
    let c = &ctx.config;
    let n = c.steps;
    let f = ctx.frame(n, &c.gamma)?;
    let g = *f.grid();
    let field_paths = (c.paths / 5).max(100);
    let paths = ctx.ensemble(n, 8, 3)?;
    let base = ctx.problem(n)?.with_x0(vec![0.0]).with_paths(field_paths).with_seed(ctx.seed(81));
    // 1% needs relative standard errors near 0.25%, hence the full path count.
    let heat_paths = c.paths.max(100);
    let heat = base.clone().with_driver(Driver::parse("zero")?).with_paths(heat_paths);
    let (mut worst, mut worst_z) = (0.0f64, 0.0f64);
    let mut rows = Vec::new();
    for path in &paths.paths {
        let i = f.gamma_integrals(&path.dw0);
        for m in [node(n, 0.25), node(n, 0.5), n] {
            let eps = f.log_epsilon(&i, m).exp();
            for x in [-1.0, 0.0, 1.0] {
                let pt = field_point(&heat, &f, path, m, &[x])?;
                let exact = eps * heat_oracle(&heat.coeff, &heat.terminal, g.node(m), x)?;
                worst = worst.max(rel(pt.u, exact));
                worst_z = worst_z.max((pt.u - exact).abs() / pt.se);
                rows.push([path.index.to_string(), num(g.node(m)), num(x), num(pt.u), num(exact), num(pt.se)]);
            }
        }
    }
    checks.push(Check::at_most("f ≡ 0: u = ε_t · heat solution, relative", worst, 0.01));
    notes.push(format!("heat check: {heat_paths} sub-paths, largest |u − exact| / se = {worst_z:.2}"));
    ctx.write("spde_heat.csv", |w| write_table(w, &["path", "t", "x", "u", "exact", "se"], rows))?;

    let cfg = FdConfig { half_width: c.lattice.half_width, n_points: c.lattice.points, ..FdConfig::default() };
    let report = pde_crosscheck(&base, &f, &paths.paths[0], &[node(n, 0.25), node(n, 0.5), n], cfg, ctx.exec)?;
    let ratio = report.rows.iter().map(|r| r.discrepancy / (0.02 * r.fd.abs()).max(4.0 * r.se)).fold(0.0, f64::max);
    checks.push(Check::at_most("finite differences vs Monte Carlo, discrepancy / max(2%, 4 se)", ratio, 1.0));
    notes.push(format!(
        "{} interior comparisons; domain ±{:.3}; {} sub-steps per cell",
        report.rows.len(),
        report.x_max,
        report.substeps
    ));
    ctx.write("spde_fd.csv", |w| write_fd_csv(w, &report))?;
    let field =
        value_field(&base, &f, &paths.paths[0], &[node(n, 0.5), n], &lattice(1, c.lattice.half_width, 9), ctx.exec)?;
    ctx.write("spde_field.csv", |w| write_field_csv(w, &field))?;

    let frames = [0.25, 0.5, 1.0].iter().map(|a| ctx.frame(n, &c.gamma.scaled(*a))).collect::<Result<Vec<_>>>()?;
    let growth_paths = ctx.ensemble(n, 82, 12)?;
    let fit = growth_fit(
        &base.clone().with_paths(2000),
        &frames,
        &growth_paths,
        n,
        &lattice(1, c.lattice.half_width, 5),
        ctx.exec,
    )?;
    checks.push(Check::at_most("growth exponent of exp{I*_T} for sup |û|/(1+|x|)", fit.fit.slope, 1.2));
    ctx.write("spde_growth.csv", |w| {
        write_table(w, &["i_star", "sup_ratio"], fit.points.iter().map(|(a, b)| [num(*a), num(*b)]))
    })
}

fn estimates(ctx: &Context, checks: Out, notes: Notes) -> Result<()> {
    let c = &ctx.config;
    let n = c.steps;
    let scales = [0.25, 0.5, 1.0, 1.5];
    let frames = scales.iter().map(|a| ctx.frame(n, &c.gamma.scaled(*a))).collect::<Result<Vec<_>>>()?;
    let p = ctx.problem(n)?.with_seed(ctx.seed(9));
    let fit = apriori_fit(&p, &frames, &ctx.ensemble(n, 91, (c.bpaths / 8).max(4))?, ctx.exec)?;
    checks.push(Check::at_most("a-priori bound exponent of exp{I*_T}", fit.fit.slope, 2.2));
    ctx.write("apriori.csv", |w| {
        write_table(w, &["i_star", "functional"], fit.points.iter().map(|(a, b)| [num(*a), num(*b)]))
    })?;

    let ens = ctx.ensemble(n, 92, c.paths)?;
    let h = c.hurst();
    let mut rows = Vec::new();
    let mut holds = true;
    let mut calibration: f64 = 0.0;
    let mut prev = 0.0;
    let mut monotone = true;
    for (a, fr) in scales.iter().zip(&frames) {
        let m = MeanSe::of(
            &ens.paths.iter().map(|q| fr.running_sup(&fr.gamma_integrals(&q.dw0)).exp()).collect::<Vec<_>>(),
        );
        let b = exp_moment_bound(fr.gamma(), &h, c.bound_constant)?;
        holds &= m.mean - 4.0 * m.se <= b.bound;
        monotone &= m.mean >= prev;
        prev = m.mean;
        calibration = calibration.max((2.0 * m.mean.max(1.0).ln()).sqrt() / b.g_p);
        rows.push([num(*a), num(b.g_p), num(m.mean), num(m.se), num(b.bound)]);
    }
    checks.push(Check::holds("E[exp I*_T] stays below the moment bound", holds));
    checks.push(Check::holds("E[exp I*_T] grows with the scale of γ", monotone));
    notes.push(format!("calibration constant C with exp{{(C G_p)²/2}} ≥ E[exp I*_T]: {calibration:.4}"));
    ctx.write("moment_bound.csv", |w| write_table(w, &["scale", "g_p", "empirical", "se", "bound"], rows))?;

    let smooth = BsdeProblem::new(
        Coefficients::parse("sine-vol:0.1,0.6,0.2")?,
        Driver::parse("sine:0.3,0.2")?,
        Terminal::poly(0.0, 1.0, 0.3),
        vec![0.2],
        n,
    )?
    .with_degree(3)
    .with_paths((c.paths / 4).max(1000))
    .with_seed(ctx.seed(93));
    let f = ctx.frame(n, &c.gamma)?;
    let mut worst: f64 = 0.0;
    for path in &ctx.ensemble(n, 94, 2)?.paths {
        worst = worst.max(variational_z(&smooth, &f, path)?.relative_rms());
    }
    checks.push(Check::at_most("variational Z vs regression Z, relative RMS", worst, 0.05));
    Ok(())
}

/// Writes `dir` if needed and returns it.
pub fn prepare_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}
