//! Markovian value fields `û(t, x) = Ŷ_t^{t,x}` and `u(t, x) = ε_t û(A_t, t, x)`
//! for a frozen fBm path, with an explicit finite-difference solver of the
//! pathwise PDE `∂_t û = ½σ²∂²û + b∂û + F_t(x, û, σ∂û)` as a cross-check.

use crate::bdsde::{sweep, tangent_flow, BsdeProblem, Coefficients, RegressionPlan, Sweep, Terminal};
use crate::exec::Execution;
use crate::export::{num, write_table};
use crate::fractional::{FbmPath, PathEnsemble};
use crate::girsanov::GirsanovFrame;
use crate::grid::TimeGrid;
use crate::quad::{integrate, Tolerance};
use crate::stats::{fit_line, LineFit, MeanSe};
use crate::{Error, Result};
use std::io::Write;

pub use crate::bdsde::WEnsemble;

/// `X^{t_start, x}` on `[0, t_start]` for `n_paths` Brownian sub-paths of fBm path `outer`.
pub fn simulate_forward(
    coeff: &Coefficients,
    grid: &TimeGrid,
    start: usize,
    x: &[f64],
    n_paths: usize,
    seed: u64,
    outer: u64,
) -> Result<WEnsemble> {
    WEnsemble::generate(coeff, grid, start, x, seed, outer, n_paths)
}

/// `E[sup_s |X_s^{t,x}|^q] / (1 + |x|^q)` for each start point.
pub fn forward_moment_constants(
    coeff: &Coefficients,
    grid: &TimeGrid,
    start: usize,
    xs: &[Vec<f64>],
    q: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    xs.iter()
        .map(|x| {
            let e = simulate_forward(coeff, grid, start, x, n_paths, seed, 0)?;
            let sups: Vec<f64> =
                (0..n_paths).map(|w| (0..=start).map(|j| norm(e.x_at(j, w)).powf(q)).fold(0.0, f64::max)).collect();
            Ok(MeanSe::of(&sups).mean / (1.0 + norm(x).powf(q)))
        })
        .collect()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `ξ_w + Σ_j Δ F_j` along each sub-path; its mean is the projected value at the last node.
fn pathwise_sums(
    problem: &BsdeProblem,
    grid: &TimeGrid,
    ens: &WEnsemble,
    s: &Sweep,
    log_e: &dyn Fn(usize) -> f64,
) -> Vec<f64> {
    let d = ens.d;
    let upto = s.z.len();
    let mut acc = s.y[0].clone();
    for j in 0..upto {
        let f = crate::bdsde::transformed_driver(&problem.driver, log_e(j));
        for (w, a) in acc.iter_mut().enumerate() {
            *a += ens.dt * f.eval(grid.node(j), ens.x_at(j, w), s.y[j][w], &s.z[j][w * d..(w + 1) * d]);
        }
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldPoint {
    pub node: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub u_hat: f64,
    pub u: f64,
    pub se_hat: f64,
    pub se: f64,
}

/// One field value for a frozen path; the Brownian sub-ensemble is shared by
/// all points of the same fBm path.
pub fn field_point(
    problem: &BsdeProblem,
    frame: &GirsanovFrame,
    path: &FbmPath,
    node: usize,
    x: &[f64],
) -> Result<FieldPoint> {
    let grid = frame.grid();
    let integrals = frame.gamma_integrals(&path.dw0);
    let t = grid.node(node);
    if node == 0 {
        let v = problem.terminal.eval(x);
        return Ok(FieldPoint { node, t, x: x.to_vec(), u_hat: v, u: v, se_hat: 0.0, se: 0.0 });
    }
    let q = problem.clone().with_start(node).with_x0(x.to_vec());
    let ens = q.forward(grid, path.index)?;
    let plans = q.plans(&ens)?;
    let le = |j: usize| frame.log_e(&integrals, j);
    let hat = sweep(&q, grid, &ens, &plans, &le, node)?;
    let sums = pathwise_sums(&q, grid, &ens, &hat, &le);
    let est = MeanSe::of(&sums);
    let u_hat = hat.y[node].iter().sum::<f64>() / ens.n_paths as f64;
    let (u, se) = if frame.is_trivial() {
        (u_hat, est.se)
    } else {
        let lc = |j: usize| frame.log_e_composed(&integrals, j, node);
        let comp = sweep(&q, grid, &ens, &plans, &lc, node)?;
        let eps = frame.log_epsilon(&integrals, node).exp();
        let sc = MeanSe::of(&pathwise_sums(&q, grid, &ens, &comp, &lc));
        (eps * comp.y[node].iter().sum::<f64>() / ens.n_paths as f64, eps * sc.se)
    };
    Ok(FieldPoint { node, t, x: x.to_vec(), u_hat, u, se_hat: est.se, se })
}

/// `û` and `u` on `nodes × lattice` for one frozen fBm path.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub path_index: u64,
    pub points: Vec<FieldPoint>,
}

pub fn value_field(
    problem: &BsdeProblem,
    frame: &GirsanovFrame,
    path: &FbmPath,
    nodes: &[usize],
    lattice: &[Vec<f64>],
    exec: Execution,
) -> Result<FieldGrid> {
    if lattice.iter().any(|x| x.len() != problem.dim()) || problem.dim() > 2 {
        return Err(Error::InvalidArgument("lattice points must match the dimension (at most 2)".into()));
    }
    let jobs: Vec<(usize, &Vec<f64>)> = nodes.iter().flat_map(|&n| lattice.iter().map(move |x| (n, x))).collect();
    let points = exec.try_map(jobs.len(), |k| field_point(problem, frame, path, jobs[k].0, jobs[k].1))?;
    Ok(FieldGrid { path_index: path.index, points })
}

/// Evenly spaced points of `[-a, a]^d`, `n` per axis.
pub fn lattice(d: usize, a: f64, n: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..n).map(|i| if n == 1 { 0.0 } else { -a + 2.0 * a * i as f64 / (n - 1) as f64 }).collect();
    match d {
        1 => axis.iter().map(|x| vec![*x]).collect(),
        _ => axis.iter().flat_map(|x| axis.iter().map(move |y| vec![*x, *y])).collect(),
    }
}

/// Long format `t,x,u_hat,u,se` (`x1,x2` in two dimensions); `se` refers to `û`.
pub fn write_field_csv<W: Write>(out: W, field: &FieldGrid) -> Result<()> {
    let d = field.points.first().map_or(1, |p| p.x.len());
    let header: Vec<&str> =
        if d == 1 { vec!["t", "x", "u_hat", "u", "se"] } else { vec!["t", "x1", "x2", "u_hat", "u", "se"] };
    write_table(
        out,
        &header,
        field.points.iter().map(|p| {
            let mut row = vec![num(p.t)];
            row.extend(p.x.iter().map(|v| num(*v)));
            row.extend([num(p.u_hat), num(p.u), num(p.se_hat)]);
            row
        }),
    )
}

/// `E[Φ(x + bt + σ√t Z)]` by adaptive Gauss–Kronrod quadrature against the
/// Gaussian density, for constant scalar coefficients.
pub fn heat_oracle(coeff: &Coefficients, terminal: &Terminal, t: f64, x: f64) -> Result<f64> {
    let (b, sigma) = match coeff.kind {
        crate::bdsde::CoeffKind::Affine { b, sigma } => (b, sigma),
        k => return Err(Error::Unsupported(format!("no heat kernel for coefficients {k:?}"))),
    };
    if t == 0.0 {
        return Ok(terminal.eval(&[x]));
    }
    let s = sigma * t.sqrt();
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    Ok(integrate(|z| terminal.eval(&[x + b * t + s * z]) * phi(z), -12.0, 12.0, Tolerance::new(1e-13, 1e-12))?.value)
}

/// Explicit finite differences for the pathwise PDE on a uniform lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct FdSolution {
    pub x: Vec<f64>,
    /// Values at grid nodes `0..=upto`.
    pub values: Vec<Vec<f64>>,
    pub substeps: usize,
}

impl FdSolution {
    pub fn at(&self, node: usize, x: f64) -> f64 {
        let dx = self.x[1] - self.x[0];
        let k = (((x - self.x[0]) / dx).round() as usize).min(self.x.len() - 1);
        self.values[node][k]
    }
}

/// Largest stable sub-step for the lattice: `dt σ²_max / dx² ≤ 1`.
pub fn fd_max_dt(coeff: &Coefficients, x: &[f64]) -> f64 {
    let dx = x[1] - x[0];
    let mut s = [0.0];
    let smax = x
        .iter()
        .map(|v| {
            coeff.sigma(&[*v], &mut s);
            s[0] * s[0]
        })
        .fold(0.0, f64::max);
    if smax == 0.0 {
        f64::INFINITY
    } else {
        dx * dx / smax
    }
}

/// Central differences in space, forward Euler in time with `substeps` per
/// grid cell, linear extrapolation at both ends; `ε` is frozen at the left node of each cell.
pub fn fd_solve(
    problem: &BsdeProblem,
    frame: &GirsanovFrame,
    integrals: &[f64],
    x: Vec<f64>,
    upto: usize,
    substeps: usize,
) -> Result<FdSolution> {
    if problem.dim() != 1 {
        return Err(Error::Unsupported("finite differences are implemented in one dimension".into()));
    }
    if x.len() < 4 {
        return Err(Error::InvalidArgument("the lattice needs at least four points".into()));
    }
    let grid = frame.grid();
    let h = grid.dt() / substeps as f64;
    let max_dt = fd_max_dt(&problem.coeff, &x);
    if h > max_dt {
        return Err(Error::Cfl { dt: h, max_dt });
    }
    let n = x.len();
    let dx = x[1] - x[0];
    let (mut bv, mut sv) = ([0.0], [0.0]);
    let coef: Vec<(f64, f64)> = x
        .iter()
        .map(|v| {
            problem.coeff.drift(&[*v], &mut bv);
            problem.coeff.sigma(&[*v], &mut sv);
            (bv[0], sv[0])
        })
        .collect();
    let mut u: Vec<f64> = x.iter().map(|v| problem.terminal.eval(&[*v])).collect();
    let mut values = vec![u.clone()];
    let mut next = vec![0.0; n];
    for j in 0..upto {
        let f = crate::bdsde::transformed_driver(&problem.driver, frame.log_e(integrals, j));
        let t = grid.node(j);
        for _ in 0..substeps {
            for i in 1..n - 1 {
                let (b, s) = coef[i];
                let d1 = (u[i + 1] - u[i - 1]) / (2.0 * dx);
                let d2 = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx);
                next[i] = u[i] + h * (0.5 * s * s * d2 + b * d1 + f.eval(t, &[x[i]], u[i], &[s * d1]));
            }
            next[0] = 2.0 * next[1] - next[2];
            next[n - 1] = 2.0 * next[n - 2] - next[n - 3];
            std::mem::swap(&mut u, &mut next);
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { what: "finite-difference solver".into(), step: j });
        }
        values.push(u.clone());
    }
    Ok(FdSolution { x, values, substeps })
}

/// Displacement `r` with `P(sup_s |X_s^{t,x} − x| > r) ≤ prob`, estimated from
/// `n_paths` simulations at each start point and taken as the maximum over them.
pub fn exit_radius(
    coeff: &Coefficients,
    grid: &TimeGrid,
    start: usize,
    xs: &[f64],
    prob: f64,
    n_paths: usize,
    seed: u64,
) -> Result<f64> {
    let mut r = 0.0f64;
    for (k, x) in xs.iter().enumerate() {
        let e = simulate_forward(coeff, grid, start, &[*x], n_paths, seed, k as u64)?;
        let mut sups: Vec<f64> =
            (0..n_paths).map(|w| (0..=start).map(|j| (e.x_at(j, w)[0] - x).abs()).fold(0.0, f64::max)).collect();
        sups.sort_by(f64::total_cmp);
        let idx = (((1.0 - prob) * n_paths as f64).ceil() as usize).min(n_paths - 1);
        r = r.max(sups[idx]);
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdRow {
    pub t: f64,
    pub x: f64,
    pub fd: f64,
    pub mc: f64,
    pub se: f64,
    pub discrepancy: f64,
}

impl FdRow {
    /// `|fd − mc| ≤ max(2% |fd|, 4 se)`.
    pub fn passes(&self) -> bool {
        self.discrepancy <= (0.02 * self.fd.abs()).max(4.0 * self.se)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub rows: Vec<FdRow>,
    /// Half-width of the truncated domain.
    pub x_max: f64,
    pub substeps: usize,
}

/// Lattice settings for [`pde_crosscheck`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    /// Comparison region `[-a, a]`.
    pub half_width: f64,
    pub n_points: usize,
    /// Every `stride`-th interior lattice point is compared with Monte Carlo.
    pub stride: usize,
    pub exit_prob: f64,
    pub exit_paths: usize,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self { half_width: 1.5, n_points: 201, stride: 5, exit_prob: 1e-4, exit_paths: 50_000 }
    }
}

/// Finite differences against the Monte Carlo field for one frozen path.
pub fn pde_crosscheck(
    problem: &BsdeProblem,
    frame: &GirsanovFrame,
    path: &FbmPath,
    nodes: &[usize],
    config: FdConfig,
    exec: Execution,
) -> Result<FdReport> {
    let grid = frame.grid();
    let last = nodes.iter().copied().max().unwrap_or(0);
    let a = config.half_width;
    let pad = exit_radius(
        &problem.coeff,
        grid,
        last.max(1),
        &[-a, 0.0, a],
        config.exit_prob,
        config.exit_paths,
        problem.seed ^ 0x5eed,
    )?;
    let x_max = a + pad;
    let m = config.n_points;
    let x: Vec<f64> = (0..m).map(|i| -x_max + 2.0 * x_max * i as f64 / (m - 1) as f64).collect();
    let substeps = ((grid.dt() / fd_max_dt(&problem.coeff, &x)).ceil() as usize).max(1);
    let integrals = frame.gamma_integrals(&path.dw0);
    let fd = fd_solve(problem, frame, &integrals, x.clone(), last, substeps)?;
    let jobs: Vec<(usize, f64)> = nodes
        .iter()
        .flat_map(|&n| {
            x.iter()
                .enumerate()
                .filter(|(i, v)| v.abs() <= a + 1e-12 && i % config.stride == 0)
                .map(move |(_, v)| (n, *v))
        })
        .collect();
    let rows = exec.try_map(jobs.len(), |k| {
        let (n, xv) = jobs[k];
        let p = field_point(problem, frame, path, n, &[xv])?;
        let f = fd.at(n, xv);
        Ok::<_, Error>(FdRow {
            t: grid.node(n),
            x: xv,
            fd: f,
            mc: p.u_hat,
            se: p.se_hat,
            discrepancy: (f - p.u_hat).abs(),
        })
    })?;
    Ok(FdReport { rows, x_max, substeps })
}

pub fn write_fd_csv<W: Write>(out: W, report: &FdReport) -> Result<()> {
    write_table(
        out,
        &["t", "x", "fd", "mc", "se", "discrepancy"],
        report.rows.iter().map(|r| [num(r.t), num(r.x), num(r.fd), num(r.mc), num(r.se), num(r.discrepancy)]),
    )
}

/// Fit of `log sup_x |û(t, x)|/(1 + |x|)` against `I*_T` pooled over frames and paths.
#[derive(Debug, Clone)]
pub struct GrowthFit {
    pub fit: LineFit,
    pub points: Vec<(f64, f64)>,
}

pub fn growth_fit(
    problem: &BsdeProblem,
    frames: &[GirsanovFrame],
    ensemble: &PathEnsemble,
    node: usize,
    xs: &[Vec<f64>],
    exec: Execution,
) -> Result<GrowthFit> {
    let mut points = Vec::new();
    for f in frames {
        points.extend(exec.try_map(ensemble.len(), |k| {
            let path = &ensemble.paths[k];
            let mut g = 0.0f64;
            for x in xs {
                let p = field_point(problem, f, path, node, x)?;
                g = g.max(p.u_hat.abs() / (1.0 + norm(x)));
            }
            Ok::<_, Error>((f.running_sup(&f.gamma_integrals(&path.dw0)), g))
        })?);
    }
    let xv: Vec<f64> = points.iter().map(|p| p.0).collect();
    let yv: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    Ok(GrowthFit { fit: fit_line(&xv, &yv), points })
}

/// Fitted exponents of `|û(t,x) − û(t',x)|` in `|t − t'|` and of `|û(t,x) − û(t,x')|` in `|x − x'|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regularity {
    pub t_exponent: f64,
    pub x_exponent: f64,
}

pub fn regularity_probe(
    problem: &BsdeProblem,
    frame: &GirsanovFrame,
    path: &FbmPath,
    node: usize,
    x: f64,
    t_lags: &[usize],
    x_lags: &[f64],
) -> Result<Regularity> {
    let dt = frame.grid().dt();
    let base = field_point(problem, frame, path, node, &[x])?.u_hat;
    let mut lt = Vec::new();
    let mut ld = Vec::new();
    for &l in t_lags {
        if l > node {
            return Err(Error::InvalidArgument(format!("time lag {l} exceeds node {node}")));
        }
        let v = field_point(problem, frame, path, node - l, &[x])?.u_hat;
        lt.push((l as f64 * dt).ln());
        ld.push((base - v).abs().ln());
    }
    let mut xt = Vec::new();
    let mut xd = Vec::new();
    for &h in x_lags {
        let v = field_point(problem, frame, path, node, &[x + h])?.u_hat;
        xt.push(h.abs().ln());
        xd.push((v - base).abs().ln());
    }
    Ok(Regularity { t_exponent: fit_line(&lt, &ld).slope, x_exponent: fit_line(&xt, &xd).slope })
}

/// `Ŷ_s^{t,x}` on a sub-path against `û(s, X_s^{t,x})` computed from an independent sub-ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRow {
    pub w: usize,
    pub x_s: Vec<f64>,
    pub y_s: f64,
    pub u_hat: f64,
    pub se: f64,
}

pub fn flow_identity(
    problem: &BsdeProblem,
    frame: &GirsanovFrame,
    path: &FbmPath,
    node: usize,
    x: &[f64],
    s: usize,
    sub_paths: &[usize],
) -> Result<Vec<FlowRow>> {
    if s == 0 || s > node {
        return Err(Error::InvalidArgument(format!("intermediate node {s} outside (0, {node}]")));
    }
    let grid = frame.grid();
    let integrals = frame.gamma_integrals(&path.dw0);
    let q = problem.clone().with_start(node).with_x0(x.to_vec());
    let ens = q.forward(grid, path.index)?;
    let plans = q.plans(&ens)?;
    let hat = sweep(&q, grid, &ens, &plans, &|j| frame.log_e(&integrals, j), s)?;
    let fresh = problem.clone().with_seed(problem.seed.wrapping_add(0x9e37_79b9));
    sub_paths
        .iter()
        .map(|&w| {
            let xs = ens.x_at(s, w).to_vec();
            let p = field_point(&fresh, frame, path, s, &xs)?;
            Ok(FlowRow { w, x_s: xs, y_s: hat.y[s][w], u_hat: p.u_hat, se: p.se_hat })
        })
        .collect()
}

/// Regression `Ẑ` and the tangent-flow representation `ẑ = −Y̲ σ(X) / ∇X` at nodes `1..=start`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalZ {
    /// `regression[j][w] = Ẑ_{t_{j+1}}`.
    pub regression: Vec<Vec<f64>>,
    /// `variational[j][w] = ẑ_{t_{j+1}}`.
    pub variational: Vec<Vec<f64>>,
}

impl VariationalZ {
    /// `‖Ẑ + ẑ‖ / ‖Ẑ‖` over all nodes and sub-paths; the two estimators have opposite signs.
    pub fn relative_rms(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (r, v) in self.regression.iter().zip(&self.variational) {
            for (a, b) in r.iter().zip(v) {
                num += (a + b) * (a + b);
                den += a * a;
            }
        }
        (num / den).sqrt()
    }

    /// `E[sup_j |ẑ_j|^p]`.
    pub fn sup_moment(&self, p: f64) -> f64 {
        let n = self.variational.first().map_or(0, |v| v.len());
        (0..n).map(|w| self.variational.iter().map(|v| v[w].abs().powf(p)).fold(0.0, f64::max)).sum::<f64>() / n as f64
    }
}

/// Co-simulates `∇X` and the linearised equation
/// `Y̲_{j+1} = P[Y̲_j + Δ(F_x ∇X_j + F_y Y̲_j + F_z Z̲_{j+1})]`, `Y̲_0 = Φ'(X_0)∇X_0`,
/// regressing on `(X, ∇X)`, with the partial derivatives taken along the base solution.
pub fn variational_z(problem: &BsdeProblem, frame: &GirsanovFrame, path: &FbmPath) -> Result<VariationalZ> {
    if problem.dim() != 1 {
        return Err(Error::Unsupported("the variational representation is implemented in one dimension".into()));
    }
    let grid = frame.grid();
    let integrals = frame.gamma_integrals(&path.dw0);
    let ens = problem.forward(grid, path.index)?;
    let plans = problem.plans(&ens)?;
    let le = |j: usize| frame.log_e(&integrals, j);
    let base = sweep(problem, grid, &ens, &plans, &le, problem.start)?;
    let flow = tangent_flow(&problem.coeff, &ens)?;
    let n = ens.n_paths;
    let dt = ens.dt;
    let mut aux_plans = Vec::with_capacity(problem.start);
    for j in 1..=problem.start {
        let feats: Vec<f64> = (0..n).flat_map(|w| [ens.x_at(j, w)[0], flow[j * n + w]]).collect();
        // Near the start both features are affine in one increment and the joint design is singular.
        let plan = match RegressionPlan::new(&feats, 2, problem.degree, j) {
            Err(Error::RankDeficient { .. }) => RegressionPlan::new(ens.x_node(j), 1, problem.degree, j)?,
            other => other?,
        };
        aux_plans.push(plan);
    }
    let mut y: Vec<f64> = (0..n).map(|w| problem.terminal.derivative(ens.x_at(0, w)[0]) * flow[w]).collect();
    let mut variational = Vec::with_capacity(problem.start);
    let mut prod = vec![0.0; n];
    let mut sv = [0.0];
    for j in 0..problem.start {
        let plan = &aux_plans[j];
        let centred = plan.fold_residual(&y);
        for w in 0..n {
            prod[w] = centred[w] * ens.dw_at(j, w)[0];
        }
        let zl: Vec<f64> = plan.cross_fit(&prod).into_iter().map(|v| v / dt).collect();
        let e = le(j).exp();
        let t = grid.node(j);
        for w in 0..n {
            let (fx, fy, fz) = problem.driver.partials(t, ens.x_at(j, w)[0], base.y[j][w] * e, base.z[j][w] * e);
            prod[w] = y[w] + dt * (fx / e * flow[j * n + w] + fy * y[w] + fz * zl[w]);
        }
        y = plan.project(&prod);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { what: "linearised sweep".into(), step: j });
        }
        variational.push(
            (0..n)
                .map(|w| {
                    let xv = ens.x_at(j + 1, w)[0];
                    problem.coeff.sigma(&[xv], &mut sv);
                    -y[w] * sv[0] / flow[(j + 1) * n + w]
                })
                .collect(),
        );
    }
    Ok(VariationalZ { regression: base.z, variational })
}
