//! Wiener integrals against `B`, backward Itô sums against `W`, and Monte
//! Carlo checks of the duality `E[⟨K*K D^B F, u⟩] = E[F δ(u)]`.
//!
//! For a step function `φ`, `∫_{cell j} (K*Kφ)(r) dr = ⟨Kφ, K1_{cell j}⟩`, so the
//! left side only needs the table of `Λ`-products between `φ` and cell
//! indicators. On the grid these come from the kernel weights, which makes the
//! check exact for the discrete Gaussian model rather than biased by the
//! discretisation of the covariance.

use crate::exec::Execution;
use crate::export::{num, write_table};
use crate::fractional::{covariance_r, op_k, KernelWeights, PathEnsemble};
use crate::functional::{NodeCombination, TestFunctional};
use crate::grid::GridFunction;
use crate::stats::{z_score, MeanSe};
use crate::{Error, Result};
use std::io::Write;

/// `δ(u) = Σ_i (Ku)_i ΔW⁰_i` per path for a deterministic step `u`.
pub fn divergence_deterministic(u: &GridFunction, ensemble: &PathEnsemble, exec: Execution) -> Result<Vec<f64>> {
    let weights = ensemble.sampler.weights();
    if u.grid() != weights.grid() {
        return Err(Error::GridMismatch("integrand and ensemble live on different grids".into()));
    }
    let ku = op_k(u, *weights.hurst())?.cell_averages(weights)?;
    Ok(exec.map(ensemble.len(), |k| ku.iter().zip(&ensemble.paths[k].dw0).map(|(a, d)| a * d).sum()))
}

/// `Σ_i z_{t_{i+1}} ΔW_i` accumulated at every node (right-endpoint sums).
pub fn backward_ito_integral(z_nodes: &[f64], dw: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(dw.len() + 1);
    out.push(0.0);
    for (i, d) in dw.iter().enumerate() {
        acc += z_nodes[i + 1] * d;
        out.push(acc);
    }
    out
}

/// How `⟨Kφ, K1_{cell j}⟩` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramRoute {
    /// Cell-averaged kernel weights: the covariance of the simulated `B`.
    Discrete,
    /// Exact differences `R_H(t, t_{j+1}) − R_H(t, t_j)`.
    Continuum,
}

/// `⟨Kφ, K1_{cell j}⟩` for every cell `j`.
pub fn gram_row(phi: &NodeCombination, weights: &KernelWeights, route: GramRoute) -> Vec<f64> {
    let g = weights.grid();
    let n = g.n_steps();
    let h = weights.hurst();
    let lam = |m: usize, k: usize| match route {
        GramRoute::Discrete => weights.gram(m, k),
        GramRoute::Continuum => covariance_r(h, g.node(m), g.node(k)),
    };
    (0..n).map(|j| phi.terms().iter().map(|(c, m)| c * (lam(*m, j + 1) - lam(*m, j))).sum()).collect()
}

/// Per-sample evaluator of both sides of the duality for a family of functionals.
#[derive(Debug, Clone)]
pub struct Duality {
    functionals: Vec<TestFunctional>,
    /// `gram[f][i]`: the Gram row of the `i`-th B-coordinate of functional `f`.
    gram: Vec<Vec<Vec<f64>>>,
}

impl Duality {
    pub fn new(functionals: Vec<TestFunctional>, weights: &KernelWeights, route: GramRoute) -> Self {
        let gram =
            functionals.iter().map(|f| f.b_coords().iter().map(|c| gram_row(c, weights, route)).collect()).collect();
        Self { functionals, gram }
    }

    pub fn functionals(&self) -> &[TestFunctional] {
        &self.functionals
    }

    /// `(⟨K*K D^B F, u⟩, F δ)` for each functional on one sample; `u` holds cell values.
    pub fn sample(&self, b_nodes: &[f64], dw: Option<&[f64]>, u: &[f64], delta: f64) -> Vec<(f64, f64)> {
        self.functionals
            .iter()
            .zip(&self.gram)
            .map(|(f, rows)| {
                let x = f.coordinates(b_nodes, dw);
                let lhs = rows
                    .iter()
                    .enumerate()
                    .map(|(i, g)| f.partial(i, &x) * g.iter().zip(u).map(|(a, b)| a * b).sum::<f64>())
                    .sum();
                (lhs, f.eval(&x) * delta)
            })
            .collect()
    }

    /// Aggregates samples; consecutive blocks of `cluster` samples share one
    /// fBm path and are averaged before the standard error is taken.
    pub fn finish(&self, samples: &[Vec<(f64, f64)>], cluster: usize) -> Result<Vec<DualityRow>> {
        if cluster == 0 || samples.is_empty() || !samples.len().is_multiple_of(cluster) {
            return Err(Error::InvalidArgument(format!(
                "{} samples cannot be split into clusters of {cluster}",
                samples.len()
            )));
        }
        Ok(self
            .functionals
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let block = |pick: &dyn Fn(&(f64, f64)) -> f64| -> Vec<f64> {
                    samples
                        .chunks(cluster)
                        .map(|c| c.iter().map(|s| pick(&s[k])).sum::<f64>() / cluster as f64)
                        .collect()
                };
                let lhs = block(&|s| s.0);
                let rhs = block(&|s| s.1);
                let d = MeanSe::paired(&lhs, &rhs);
                let (l, r) = (MeanSe::of(&lhs).mean, MeanSe::of(&rhs).mean);
                DualityRow {
                    functional: f.name.clone(),
                    lhs: l,
                    rhs: r,
                    diff: l - r,
                    se: d.se,
                    z: z_score(l - r, d.se),
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualityRow {
    pub functional: String,
    pub lhs: f64,
    pub rhs: f64,
    pub diff: f64,
    pub se: f64,
    pub z: f64,
}

/// Duality for a deterministic step `u` with `δ(u)` from [`divergence_deterministic`].
pub fn duality_check_deterministic(
    u: &GridFunction,
    functionals: Vec<TestFunctional>,
    ensemble: &PathEnsemble,
    route: GramRoute,
    exec: Execution,
) -> Result<Vec<DualityRow>> {
    let delta = divergence_deterministic(u, ensemble, exec)?;
    let d = Duality::new(functionals, ensemble.sampler.weights(), route);
    let samples = exec.map(ensemble.len(), |k| d.sample(&ensemble.paths[k].b, None, u.values(), delta[k]));
    d.finish(&samples, 1)
}

pub fn write_duality_report<W: Write>(out: W, rows: &[DualityRow]) -> Result<()> {
    write_table(
        out,
        &["functional", "lhs", "rhs", "diff", "se", "z"],
        rows.iter().map(|r| [r.functional.clone(), num(r.lhs), num(r.rhs), num(r.diff), num(r.se), num(r.z)]),
    )
}
