//! The linear equation `f = f1 x + f2 y + f3 z` with constant coefficients.
//!
//! Under `Q = exp(f3 W − f3² t/2) P` the conjugated BSDE has the representation
//! `Ŷ_s = E_Q[∫_0^s f1 X_r ε_r^{-1}(T_r) e^{f2(s−r)} dr + e^{f2 s} Φ(X_0)]`, whose
//! Gaussian moments are explicit when `b` and `σ` are constant.

use super::forward::CoeffKind;
use super::solver::BsdeProblem;
use super::{DriverKind, Terminal};
use crate::exec::Execution;
use crate::fractional::PathEnsemble;
use crate::girsanov::GirsanovFrame;
use crate::grid::TimeGrid;
use crate::rng::{fill_normal, stream, Purpose};
use crate::stats::MeanSe;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearExample {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub terminal: Terminal,
}

impl LinearExample {
    pub fn from_problem(problem: &BsdeProblem) -> Result<Self> {
        if problem.dim() != 1 {
            return Err(Error::Unsupported("the linear representation is scalar".into()));
        }
        let (f1, f2, f3) = match problem.driver.kind {
            DriverKind::Zero => (0.0, 0.0, 0.0),
            DriverKind::Linear { f1, f2, f3 } => (f1, f2, f3),
            _ => return Err(Error::Unsupported(format!("driver {:?} is not linear", problem.driver.kind))),
        };
        Ok(Self { f1, f2, f3, terminal: problem.terminal })
    }

    /// Closed form of `Ŷ_{t_s}` at `X_{t_s} = x` for affine coefficients; the `dr`
    /// integral uses the left-point rule on the grid, where `ε^{-1}` is known.
    pub fn hat(
        &self,
        problem: &BsdeProblem,
        grid: &TimeGrid,
        log_e: &dyn Fn(usize) -> f64,
        s: usize,
        x: f64,
    ) -> Result<f64> {
        let (b, sigma) = match problem.coeff.kind {
            CoeffKind::Affine { b, sigma } => (b, sigma),
            k => return Err(Error::Unsupported(format!("no closed form for coefficients {k:?}"))),
        };
        let ts = grid.node(s);
        let drift = b + sigma * self.f3;
        let mean = |j: usize| x + drift * (ts - grid.node(j));
        let mut acc = 0.0;
        for j in 0..s {
            acc += grid.dt() * self.f1 * (-log_e(j)).exp() * (self.f2 * (ts - grid.node(j))).exp() * mean(j);
        }
        let m0 = mean(0);
        let t = &self.terminal;
        Ok(acc + (self.f2 * ts).exp() * (t.c0 + t.c1 * m0 + t.c2 * (m0 * m0 + sigma * sigma * ts)))
    }

    /// `Y_{t_m} = ε_{t_m} Ŷ_{t_m}(A_{t_m})` at `X_{t_m} = x`.
    pub fn y(&self, problem: &BsdeProblem, frame: &GirsanovFrame, integrals: &[f64], m: usize, x: f64) -> Result<f64> {
        let hat = self.hat(problem, frame.grid(), &|j| frame.log_e_composed(integrals, j, m), m, x)?;
        Ok(frame.log_epsilon(integrals, m).exp() * hat)
    }

    /// Likelihood-ratio Monte Carlo for `Ŷ_{t_s}` at `X_{t_s} = x`, valid for any
    /// scalar coefficients.
    #[allow(clippy::too_many_arguments)]
    pub fn nested(
        &self,
        problem: &BsdeProblem,
        grid: &TimeGrid,
        log_e: &dyn Fn(usize) -> f64,
        s: usize,
        x: f64,
        n_inner: usize,
        seed: u64,
    ) -> MeanSe {
        let dt = grid.dt();
        let ts = grid.node(s);
        let inv_e: Vec<f64> = (0..s).map(|j| (-log_e(j)).exp()).collect();
        let mut dw = vec![0.0; s];
        let (mut bv, mut sv) = ([0.0], [0.0]);
        let samples: Vec<f64> = (0..n_inner as u64)
            .map(|k| {
                fill_normal(&mut stream(seed, Purpose::Auxiliary, k), dt, &mut dw);
                let mut xj = x;
                let mut acc = 0.0;
                for j in (0..s).rev() {
                    problem.coeff.drift(&[xj], &mut bv);
                    problem.coeff.sigma(&[xj], &mut sv);
                    xj += bv[0] * dt + sv[0] * dw[j];
                    acc += dt * self.f1 * inv_e[j] * (self.f2 * (ts - grid.node(j))).exp() * xj;
                }
                let w: f64 = dw.iter().sum();
                let lr = (self.f3 * w - 0.5 * self.f3 * self.f3 * ts).exp();
                lr * (acc + (self.f2 * ts).exp() * self.terminal.eval(&[xj]))
            })
            .collect();
        MeanSe::of(&samples)
    }
}

/// Solver mean of `Y` against the closed form at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub node: usize,
    pub t: f64,
    pub solver: f64,
    pub closed_form: f64,
    pub rel_error: f64,
    /// Standard error of the paired difference.
    pub se: f64,
}

/// Means over all `(B, W)` samples of `Y_{t_m}` from the solver and of the
/// closed form evaluated at the same `X_{t_m}`.
pub fn linear_mean_check(
    problem: &BsdeProblem,
    frame: &GirsanovFrame,
    ensemble: &PathEnsemble,
    nodes: &[usize],
    exec: Execution,
) -> Result<Vec<LinearRow>> {
    let ex = LinearExample::from_problem(problem)?;
    let per_path = super::solver::solve_ensemble(problem, frame, ensemble, exec, |_, sol| {
        nodes
            .iter()
            .map(|&m| {
                if m > sol.start() {
                    return Err(Error::InvalidArgument(format!("node {m} beyond the start node")));
                }
                let mut s = 0.0;
                let mut c = 0.0;
                for w in 0..sol.n_w() {
                    s += sol.y[m][w];
                    c += ex.y(problem, frame, &sol.integrals, m, sol.forward.x_at(m, w)[0])?;
                }
                Ok((s / sol.n_w() as f64, c / sol.n_w() as f64))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(nodes
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let s: Vec<f64> = per_path.iter().map(|v| v[i].0).collect();
            let c: Vec<f64> = per_path.iter().map(|v| v[i].1).collect();
            let (ms, mc) = (MeanSe::of(&s).mean, MeanSe::of(&c).mean);
            LinearRow {
                node: m,
                t: frame.grid().node(m),
                solver: ms,
                closed_form: mc,
                rel_error: (ms - mc).abs() / mc.abs(),
                se: MeanSe::paired(&s, &c).se,
            }
        })
        .collect())
}
