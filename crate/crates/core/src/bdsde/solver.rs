//! Regression sweep for the conjugated BSDE and the map back to `(Y, Z)`.
//!
//! The equation for `Ŷ` carries its terminal condition at time 0, so the sweep
//! runs from node 0 towards the start node of the forward diffusion:
//! `Ẑ_{j+1} = P̃_{j+1}[(Ŷ_j − c) ΔW_j]/Δ` and `Ŷ_{j+1} = P_{j+1}[Ŷ_j + Δ F_j(X_j, Ŷ_j, Ẑ_{j+1})]`,
//! where `P_{j+1}` projects onto polynomials of `X_{t_{j+1}}` and `P̃_{j+1}` is
//! the same regression cross-fitted between two halves of the sub-ensemble
//! (`c` is the in-sample fit of `Ŷ_j` on `X_{t_{j+1}}` within the half).
//! Cross-fitting keeps `Ẑ_{j+1}` independent of the increment `ΔW_j` it multiplies
//! in `∫Ẑ↓dW`; the in-sample fit would bias that sum by about
//! (basis size)/(sub-paths) per step.

use super::forward::{brownian_increments, Coefficients, WEnsemble};
use super::regression::RegressionPlan;
use super::{Driver, Terminal};
use crate::exec::Execution;
use crate::export::{num, write_table};
use crate::fractional::{FbmPath, PathEnsemble};
use crate::girsanov::GirsanovFrame;
use crate::grid::TimeGrid;
use crate::{Error, Result};
use std::io::Write;

/// Everything needed to solve for one frozen fBm path.
#[derive(Debug, Clone)]
pub struct BsdeProblem {
    pub coeff: Coefficients,
    pub driver: Driver,
    pub terminal: Terminal,
    /// Value of the forward diffusion at the start node.
    pub x0: Vec<f64>,
    pub start: usize,
    pub degree: usize,
    /// Brownian sub-paths per fBm path.
    pub n_w: usize,
    /// Brownian increments are drawn this many times finer and aggregated.
    pub refine: usize,
    pub seed: u64,
}

impl BsdeProblem {
    pub fn new(coeff: Coefficients, driver: Driver, terminal: Terminal, x0: Vec<f64>, start: usize) -> Result<Self> {
        if x0.len() != coeff.dim() {
            return Err(Error::InvalidArgument(format!(
                "start point has {} coordinates, coefficients need {}",
                x0.len(),
                coeff.dim()
            )));
        }
        if start == 0 {
            return Err(Error::InvalidArgument("the start node must be positive".into()));
        }
        Ok(Self { coeff, driver, terminal, x0, start, degree: 2, n_w: 256, refine: 1, seed: 0 })
    }

    pub fn with_degree(mut self, degree: usize) -> Self {
        self.degree = degree;
        self
    }

    pub fn with_paths(mut self, n_w: usize) -> Self {
        self.n_w = n_w;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_refine(mut self, refine: usize) -> Self {
        self.refine = refine.max(1);
        self
    }

    pub fn with_start(mut self, start: usize) -> Self {
        self.start = start;
        self
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_driver(mut self, driver: Driver) -> Self {
        self.driver = driver;
        self
    }

    pub fn with_terminal(mut self, terminal: Terminal) -> Self {
        self.terminal = terminal;
        self
    }

    pub fn dim(&self) -> usize {
        self.coeff.dim()
    }

    /// Forward diffusion for fBm path `index`.
    pub fn forward(&self, grid: &TimeGrid, index: u64) -> Result<WEnsemble> {
        if self.start > grid.n_steps() {
            return Err(Error::InvalidArgument(format!("start node {} beyond the grid", self.start)));
        }
        let d = self.dim();
        let inc: Vec<Vec<f64>> =
            (0..self.n_w as u64).map(|w| brownian_increments(self.seed, index, w, grid, d, self.refine)).collect();
        WEnsemble::simulate(&self.coeff, grid, self.start, &self.x0, &inc)
    }

    /// Regression plans at nodes `1..=start` (index 0 is unused).
    pub fn plans(&self, ens: &WEnsemble) -> Result<Vec<Option<RegressionPlan>>> {
        let mut out = vec![None];
        for j in 1..=ens.start {
            out.push(Some(RegressionPlan::new(ens.x_node(j), ens.d, self.degree, j)?));
        }
        Ok(out)
    }
}

/// `F(x, y, z) = f(t, x, y e, z e) / e` with `e = ε_t(T_t)`.
#[derive(Debug, Clone, Copy)]
pub struct TransformedDriver<'a> {
    driver: &'a Driver,
    e: f64,
}

pub fn transformed_driver(driver: &Driver, log_e: f64) -> TransformedDriver<'_> {
    TransformedDriver { driver, e: log_e.exp() }
}

impl TransformedDriver<'_> {
    pub fn eval(&self, t: f64, x: &[f64], y: f64, z: &[f64]) -> f64 {
        let mut ze = [0.0; 2];
        for (a, b) in ze.iter_mut().zip(z) {
            *a = b * self.e;
        }
        self.driver.eval(t, x, y * self.e, &ze[..z.len()]) / self.e
    }
}

/// Node values `y[j]` (per sub-path) and cell values `z[j] = Ẑ_{t_{j+1}}` (`d` per sub-path).
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
}

/// Runs the sweep up to node `upto` with `log ε_{t_j}(T_{t_j})` supplied by `log_e`.
pub fn sweep(
    problem: &BsdeProblem,
    grid: &TimeGrid,
    ens: &WEnsemble,
    plans: &[Option<RegressionPlan>],
    log_e: &dyn Fn(usize) -> f64,
    upto: usize,
) -> Result<Sweep> {
    let (n, d, dt) = (ens.n_paths, ens.d, ens.dt);
    let mut y = Vec::with_capacity(upto + 1);
    let mut z = Vec::with_capacity(upto);
    y.push((0..n).map(|w| problem.terminal.eval(ens.x_at(0, w))).collect::<Vec<f64>>());
    let mut prod = vec![0.0; n];
    for j in 0..upto {
        let plan = plans[j + 1].as_ref().expect("plans cover every positive node");
        let cur = &y[j];
        let mut zc = vec![0.0; n * d];
        // Removing a function of X_{t_{j+1}} leaves the conditional mean unchanged,
        // since E[ΔW_j | X_{t_{j+1}}] = 0; fitting it within each half keeps the halves independent.
        let centred = plan.fold_residual(cur);
        for k in 0..d {
            for w in 0..n {
                prod[w] = centred[w] * ens.dw_at(j, w)[k];
            }
            for (w, v) in plan.cross_fit(&prod).into_iter().enumerate() {
                zc[w * d + k] = v / dt;
            }
        }
        let f = transformed_driver(&problem.driver, log_e(j));
        let t = grid.node(j);
        for w in 0..n {
            prod[w] = cur[w] + dt * f.eval(t, ens.x_at(j, w), cur[w], &zc[w * d..(w + 1) * d]);
        }
        let next = plan.project(&prod);
        if next.iter().chain(&zc).any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { what: "regression sweep".into(), step: j });
        }
        y.push(next);
        z.push(zc);
    }
    Ok(Sweep { y, z })
}

/// The solution for one fBm path and its Brownian sub-ensemble.
#[derive(Debug, Clone)]
pub struct BPathSolution {
    pub index: u64,
    pub forward: WEnsemble,
    /// `∫_0^{t_j} γ dB` at nodes `0..=n`.
    pub integrals: Vec<f64>,
    /// `log ε_{t_j}` at nodes `0..=start`.
    pub log_epsilon: Vec<f64>,
    pub y_hat: Vec<Vec<f64>>,
    pub z_hat: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    /// `ε_{t_j} Ŷ_{t_{j+1}}(A_{t_j})` per cell `j`: the value at `t_{j+1}` before the
    /// `dB` increment of cell `j` is added.
    pub y_pre: Vec<Vec<f64>>,
    /// Largest condition number over the regression plans.
    pub max_condition: f64,
}

impl BPathSolution {
    pub fn n_w(&self) -> usize {
        self.forward.n_paths
    }

    pub fn d(&self) -> usize {
        self.forward.d
    }

    pub fn start(&self) -> usize {
        self.forward.start
    }

    /// `ξ = Φ(X_0)` per sub-path.
    pub fn xi(&self) -> &[f64] {
        &self.y_hat[0]
    }

    /// `Y_{t_m} − ξ − Σ_{j<m} f Δ + Σ_{j<m} Z_{t_{j+1}}·ΔW_j` per sub-path: the
    /// discrete `∫_0^{t_m} γ Y dB`.
    pub fn residual(&self, driver: &Driver, grid: &TimeGrid, m: usize) -> Vec<f64> {
        let (d, dt) = (self.d(), grid.dt());
        (0..self.n_w())
            .map(|w| {
                let mut r = self.y[m][w] - self.y[0][w];
                for j in 0..m {
                    let z = &self.z[j][w * d..(w + 1) * d];
                    r -= dt * driver.eval(grid.node(j), self.forward.x_at(j, w), self.y[j][w], z);
                    r += z.iter().zip(self.forward.dw_at(j, w)).map(|(a, b)| a * b).sum::<f64>();
                }
                r
            })
            .collect()
    }

    /// `Σ_{j<m} (Y_{t_{j+1}} − Y⁻_{t_{j+1}})` per sub-path: the part of the
    /// residual produced by the Girsanov map alone; it vanishes when `γ ≡ 0`.
    pub fn girsanov_part(&self, m: usize) -> Vec<f64> {
        (0..self.n_w()).map(|w| (0..m).map(|j| self.y[j + 1][w] - self.y_pre[j][w]).sum()).collect()
    }

    /// Cell values `γ_j (Y_{t_{j+1}} + Y⁻_{t_{j+1}})/2` on `[0, t_m]`, zero afterwards,
    /// where `Y⁻` is [`BPathSolution::y_pre`]. Averaging the values on both
    /// sides of the `dB` increment makes the discrete duality exact for
    /// functionals of degree two in `B`; the right value alone is off by
    /// `E[Ŷ] Σ_j (Δo_j)²` with `o` the shift offsets, which decays only like `Δ^{4H−1}`.
    pub fn integrand(&self, frame: &GirsanovFrame, m: usize, w: usize) -> Vec<f64> {
        let g = frame.gamma().values();
        (0..g.len()).map(|j| if j < m { 0.5 * g[j] * (self.y[j + 1][w] + self.y_pre[j][w]) } else { 0.0 }).collect()
    }

    pub fn mean_y_hat(&self, j: usize) -> f64 {
        self.y_hat[j].iter().sum::<f64>() / self.n_w() as f64
    }

    pub fn mean_y(&self, j: usize) -> f64 {
        self.y[j].iter().sum::<f64>() / self.n_w() as f64
    }
}

/// Solves for one fBm path: the sweep on `ω` gives `(Ŷ, Ẑ)`, and for every node
/// `m` a sweep on `A_{t_m} ω` gives `Y_{t_m} = ε_{t_m} Ŷ_{t_m}(A_{t_m})` and
/// `Z_{t_{m+1}} = ε_{t_m} Ẑ_{t_{m+1}}(A_{t_m})`.
pub fn solve_b_path(problem: &BsdeProblem, frame: &GirsanovFrame, path: &FbmPath) -> Result<BPathSolution> {
    let grid = frame.grid();
    let forward = problem.forward(grid, path.index)?;
    let plans = problem.plans(&forward)?;
    let max_condition = plans.iter().flatten().map(|p| p.condition()).fold(1.0, f64::max);
    let start = problem.start;
    let integrals = frame.gamma_integrals(&path.dw0);
    let log_epsilon: Vec<f64> = (0..=start).map(|j| frame.log_epsilon(&integrals, j)).collect();
    let hat = sweep(problem, grid, &forward, &plans, &|j| frame.log_e(&integrals, j), start)?;
    let (y, z, y_pre) = if frame.is_trivial() {
        (hat.y.clone(), hat.z.clone(), hat.y[1..].to_vec())
    } else {
        let mut y = Vec::with_capacity(start + 1);
        let mut z = Vec::with_capacity(start);
        let mut y_pre = Vec::with_capacity(start);
        for (m, log_eps) in log_epsilon.iter().enumerate() {
            let upto = (m + 1).min(start);
            let c = sweep(problem, grid, &forward, &plans, &|j| frame.log_e_composed(&integrals, j, m), upto)?;
            let eps = log_eps.exp();
            y.push(c.y[m].iter().map(|v| eps * v).collect());
            if m < start {
                z.push(c.z[m].iter().map(|v| eps * v).collect());
                y_pre.push(c.y[m + 1].iter().map(|v| eps * v).collect());
            }
        }
        (y, z, y_pre)
    };
    Ok(BPathSolution {
        index: path.index,
        forward,
        integrals,
        log_epsilon,
        y_hat: hat.y,
        z_hat: hat.z,
        y,
        z,
        y_pre,
        max_condition,
    })
}

/// The classical BSDE (`F = f`) on the Brownian sub-ensemble of path `index`.
pub fn solve_classical(problem: &BsdeProblem, grid: &TimeGrid, index: u64) -> Result<Sweep> {
    let forward = problem.forward(grid, index)?;
    let plans = problem.plans(&forward)?;
    sweep(problem, grid, &forward, &plans, &|_| 0.0, problem.start)
}

/// Solves every path of the ensemble and reduces each solution with `reduce`
/// before the next is kept, so memory stays proportional to one fBm path per worker.
pub fn solve_ensemble<T, F>(
    problem: &BsdeProblem,
    frame: &GirsanovFrame,
    ensemble: &PathEnsemble,
    exec: Execution,
    reduce: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&FbmPath, &BPathSolution) -> Result<T> + Sync + Send,
{
    if ensemble.grid() != frame.grid() {
        return Err(Error::GridMismatch("ensemble and frame live on different grids".into()));
    }
    exec.try_map(ensemble.len(), |k| {
        let p = &ensemble.paths[k];
        reduce(p, &solve_b_path(problem, frame, p)?)
    })
}

/// Long-format export `path,t,Yhat,Y,Z…` with one row per sub-path and node;
/// `Z` at node 0 is undefined and written as `NaN`.
pub fn write_solution_csv<W: Write>(out: W, grid: &TimeGrid, solutions: &[BPathSolution]) -> Result<()> {
    let d = solutions.first().map_or(1, |s| s.d());
    let mut header = vec!["path".to_string(), "t".into(), "Yhat".into(), "Y".into()];
    if d == 1 {
        header.push("Z".into());
    } else {
        header.extend((1..=d).map(|k| format!("Z{k}")));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = solutions.iter().flat_map(|s| {
        (0..s.n_w()).flat_map(move |w| {
            (0..=s.start()).map(move |j| {
                let mut row = vec![
                    (s.index * s.n_w() as u64 + w as u64).to_string(),
                    num(grid.node(j)),
                    num(s.y_hat[j][w]),
                    num(s.y[j][w]),
                ];
                for k in 0..d {
                    row.push(if j == 0 { "NaN".into() } else { num(s.z[j - 1][w * d + k]) });
                }
                row
            })
        })
    });
    write_table(out, &header, rows)
}
