//! Checks on solver output: duality of the residual, comparison, moment
//! estimates, self-convergence and the round trip through the Girsanov map.

use super::solver::{solve_b_path, solve_classical, solve_ensemble, BPathSolution, BsdeProblem};
use crate::divergence::{Duality, DualityRow, GramRoute};
use crate::exec::Execution;
use crate::fractional::{FbmPath, KernelWeights, PathEnsemble};
use crate::functional::TestFunctional;
use crate::girsanov::{GirsanovFrame, Shift};
use crate::rng::{fill_normal, stream, Purpose};
use crate::stats::{convergence_order, fit_line, LineFit, MeanSe};
use crate::{Error, Result};
use std::sync::Arc;

/// Duality between the residual `Y_{t_m} − ξ − ∫f + ∫Z↓dW` and `u = γY1_{[0,t_m]}`,
/// with standard errors clustered by fBm path.
pub fn residual_duality_check(
    problem: &BsdeProblem,
    frame: &GirsanovFrame,
    ensemble: &PathEnsemble,
    functionals: Vec<TestFunctional>,
    m: usize,
    exec: Execution,
) -> Result<Vec<DualityRow>> {
    if m > problem.start {
        return Err(Error::InvalidArgument(format!("node {m} beyond the start node")));
    }
    let duality = Duality::new(functionals, frame.weights(), GramRoute::Discrete);
    let grid = frame.grid();
    let blocks = solve_ensemble(problem, frame, ensemble, exec, |path, sol| {
        let delta = sol.residual(&problem.driver, grid, m);
        Ok((0..sol.n_w())
            .map(|w| duality.sample(&path.b, None, &sol.integrand(frame, m, w), delta[w]))
            .collect::<Vec<_>>())
    })?;
    let samples: Vec<_> = blocks.into_iter().flatten().collect();
    duality.finish(&samples, problem.n_w)
}

/// Means of `Ŷ` at one node for two ordered problems.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub node: usize,
    pub lower: f64,
    pub upper: f64,
    /// `sqrt(se_lower² + se_upper²)`.
    pub se: f64,
}

impl ComparisonRow {
    /// `E[Ŷ¹] ≤ E[Ŷ²] + 2 se`.
    pub fn holds(&self) -> bool {
        self.lower <= self.upper + 2.0 * self.se
    }
}

/// Compares `Ŷ` of two problems meant to satisfy `ξ₁ ≤ ξ₂`, `f₁ ≤ f₂`; both
/// use the same Brownian sub-ensembles.
pub fn comparison_check(
    lower: &BsdeProblem,
    upper: &BsdeProblem,
    frame: &GirsanovFrame,
    ensemble: &PathEnsemble,
    exec: Execution,
) -> Result<Vec<ComparisonRow>> {
    if lower.start != upper.start {
        return Err(Error::InvalidArgument("compared problems need the same start node".into()));
    }
    let means = |p: &BsdeProblem| {
        solve_ensemble(p, frame, ensemble, exec, |_, s| {
            Ok((0..=s.start()).map(|j| s.mean_y_hat(j)).collect::<Vec<_>>())
        })
    };
    let (a, b) = (means(lower)?, means(upper)?);
    Ok((0..=lower.start)
        .map(|j| {
            let sa = MeanSe::of(&a.iter().map(|v| v[j]).collect::<Vec<_>>());
            let sb = MeanSe::of(&b.iter().map(|v| v[j]).collect::<Vec<_>>());
            ComparisonRow { node: j, lower: sa.mean, upper: sb.mean, se: sa.se.hypot(sb.se) }
        })
        .collect())
}

/// `E^W[sup_j Ŷ_j² + Σ_j |Ẑ_{j+1}|² Δ]` for one fBm path.
pub fn apriori_functional(sol: &BPathSolution, dt: f64) -> f64 {
    let n = sol.n_w();
    (0..n)
        .map(|w| {
            let sup = sol.y_hat.iter().map(|y| y[w] * y[w]).fold(0.0, f64::max);
            let d = sol.d();
            let zz: f64 = sol.z_hat.iter().map(|z| z[w * d..(w + 1) * d].iter().map(|v| v * v).sum::<f64>()).sum();
            sup + dt * zz
        })
        .sum::<f64>()
        / n as f64
}

/// Fit of `log E^W[sup Ŷ² + ∫Ẑ²]` against `I*_T` pooled over several frames.
#[derive(Debug, Clone)]
pub struct AprioriFit {
    pub fit: LineFit,
    /// `(I*_T, E^W[…])` per fBm path and frame.
    pub points: Vec<(f64, f64)>,
}

pub fn apriori_fit(
    problem: &BsdeProblem,
    frames: &[GirsanovFrame],
    ensemble: &PathEnsemble,
    exec: Execution,
) -> Result<AprioriFit> {
    let mut points = Vec::new();
    for f in frames {
        let dt = f.grid().dt();
        points.extend(solve_ensemble(problem, f, ensemble, exec, |_, s| {
            Ok((f.running_sup(&s.integrals), apriori_functional(s, dt)))
        })?);
    }
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    Ok(AprioriFit { fit: fit_line(&x, &y), points })
}

/// `E[exp(p I*_T) ∫_0^t (|Y|² + |Z|²)]` on the first half of the ensemble and on all of it.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMoment {
    pub p: f64,
    /// `true` for `(Y, Z)`, `false` for `(Ŷ, Ẑ)`.
    pub transformed: bool,
    pub half: f64,
    pub full: f64,
}

impl WeightedMoment {
    pub fn ratio(&self) -> f64 {
        self.full / self.half
    }
}

pub fn weighted_moments(
    problem: &BsdeProblem,
    frame: &GirsanovFrame,
    ensemble: &PathEnsemble,
    powers: &[f64],
    exec: Execution,
) -> Result<Vec<WeightedMoment>> {
    let dt = frame.grid().dt();
    let integral = |y: &[Vec<f64>], z: &[Vec<f64>], n: usize| -> f64 {
        let d = z.first().map_or(1, |c| c.len() / n);
        (0..n)
            .map(|w| {
                let yy: f64 = y[..y.len() - 1].iter().map(|c| c[w] * c[w]).sum();
                let zz: f64 = z.iter().map(|c| c[w * d..(w + 1) * d].iter().map(|v| v * v).sum::<f64>()).sum();
                dt * (yy + zz)
            })
            .sum::<f64>()
            / n as f64
    };
    let per_path = solve_ensemble(problem, frame, ensemble, exec, |_, s| {
        let n = s.n_w();
        Ok((frame.running_sup(&s.integrals), integral(&s.y_hat, &s.z_hat, n), integral(&s.y, &s.z, n)))
    })?;
    let half = per_path.len().div_ceil(2);
    let mut out = Vec::new();
    for &p in powers {
        for transformed in [false, true] {
            let vals: Vec<f64> =
                per_path.iter().map(|(i, a, b)| (p * i).exp() * if transformed { *b } else { *a }).collect();
            out.push(WeightedMoment {
                p,
                transformed,
                half: MeanSe::of(&vals[..half]).mean,
                full: MeanSe::of(&vals).mean,
            });
        }
    }
    Ok(out)
}

/// Means of `Ŷ` at the start node on successively refined grids sharing one
/// underlying Brownian motion and one Wiener driver of the fBm.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfConvergence {
    pub steps: Vec<usize>,
    pub means: Vec<f64>,
    /// Paired standard errors of successive differences.
    pub diff_se: Vec<f64>,
    pub order: f64,
}

/// `frames` must be built on grids `n, 2n, 4n, …` over the same horizon; the
/// problem's `start` is interpreted on the finest grid and scaled down.
pub fn self_convergence(
    problem: &BsdeProblem,
    frames: &[GirsanovFrame],
    fbm_seed: u64,
    n_b: usize,
    exec: Execution,
) -> Result<SelfConvergence> {
    if frames.len() < 3 {
        return Err(Error::InvalidArgument("self-convergence needs three grids".into()));
    }
    let fine = *frames.last().expect("non-empty").grid();
    let nf = fine.n_steps();
    let mut levels = Vec::new();
    let mut steps = Vec::new();
    for f in frames {
        let n = f.grid().n_steps();
        if !nf.is_multiple_of(n) || !(problem.start * n).is_multiple_of(nf) {
            return Err(Error::InvalidArgument(format!("grid of {n} steps does not divide {nf}")));
        }
        let r = nf / n;
        let p = problem.clone().with_refine(problem.refine * r).with_start(problem.start * n / nf);
        let vals = exec.try_map(n_b, |k| {
            let path = coarse_fbm_path(fbm_seed, k as u64, nf, f.weights())?;
            let s = solve_b_path(&p, f, &path)?;
            Ok::<_, Error>(s.mean_y_hat(p.start))
        })?;
        steps.push(n);
        levels.push(vals);
    }
    let means: Vec<f64> = levels.iter().map(|v| MeanSe::of(v).mean).collect();
    let diffs: Vec<MeanSe> = levels.windows(2).map(|w| MeanSe::paired(&w[0], &w[1])).collect();
    let k = diffs.len();
    let order = convergence_order(diffs[k - 2].mean.abs(), diffs[k - 1].mean.abs(), 2.0);
    Ok(SelfConvergence { steps, means, diff_se: diffs.iter().map(|d| d.se).collect(), order })
}

/// fBm path `index` on a coarse grid from Wiener increments drawn on `fine_steps` cells.
pub fn coarse_fbm_path(seed: u64, index: u64, fine_steps: usize, weights: &Arc<KernelWeights>) -> Result<FbmPath> {
    let g = weights.grid();
    let n = g.n_steps();
    if !fine_steps.is_multiple_of(n) {
        return Err(Error::InvalidArgument(format!("{fine_steps} cells cannot be aggregated into {n}")));
    }
    let r = fine_steps / n;
    let mut fine = vec![0.0; fine_steps];
    fill_normal(&mut stream(seed, Purpose::Fbm, index), g.horizon() / fine_steps as f64, &mut fine);
    let dw0 = fine.chunks(r).map(|c| c.iter().sum()).collect();
    Ok(FbmPath::from_increments(index, dw0, weights))
}

/// Largest relative gap between `Ŷ_{t_m}(ω)` and `Y_{t_m}(T_{t_m} ω) ε_{t_m}^{-1}(T_{t_m} ω)`.
pub fn round_trip_error(problem: &BsdeProblem, frame: &GirsanovFrame, path: &FbmPath, m: usize) -> Result<f64> {
    let base = solve_b_path(&problem.clone().with_start(problem.start.max(m)), frame, path)?;
    let shifted_path = frame.shift_path(path, m, Shift::Forward);
    let shifted = solve_b_path(&problem.clone().with_start(problem.start.max(m)), frame, &shifted_path)?;
    let scale = base.y_hat[m].iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let inv = (-frame.log_epsilon(&shifted.integrals, m)).exp();
    Ok(base.y_hat[m].iter().zip(&shifted.y[m]).map(|(a, b)| (a - b * inv).abs() / scale).fold(0.0, f64::max))
}

/// Whether the solution under a trivial frame equals the classical run bit for bit.
pub fn classical_equivalence(problem: &BsdeProblem, frame: &GirsanovFrame, path: &FbmPath) -> Result<bool> {
    if !frame.is_trivial() {
        return Err(Error::InvalidArgument("the classical run only applies to γ ≡ 0".into()));
    }
    let s = solve_b_path(problem, frame, path)?;
    let c = solve_classical(problem, frame.grid(), path.index)?;
    let same = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        a.len() == b.len()
            && a.iter()
                .zip(b)
                .all(|(x, y)| x.len() == y.len() && x.iter().zip(y).all(|(u, v)| u.to_bits() == v.to_bits()))
    };
    Ok(same(&s.y, &c.y) && same(&s.z, &c.z) && same(&s.y_hat, &c.y))
}
