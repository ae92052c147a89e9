//! The deterministic coefficient `γ`, the shifts `T_t` and `A_t` of the
//! underlying Wiener path, the exponential `ε_t` and the closed-form algebra
//! that relates shifted and unshifted quantities.
//!
//! With `h_t = Kγ1_{[0,t]}`, `T_t` adds `∫_0^· h_t(r) dr` to `W⁰` and `A_t`
//! subtracts it. On a grid, `h_t` is stored through its cell averages
//! `kg[j][i]`, so a shift changes every increment by `±Δ·kg[j][i]` and every
//! linear functional of the path by a deterministic offset.

use crate::exec::Execution;
use crate::export::{num, write_table};
use crate::fractional::{FbmPath, Hurst, KernelWeights, PathEnsemble};
use crate::functional::TestFunctional;
use crate::grid::TimeGrid;
use crate::quad::{integrate_singular_offset, End, Tolerance};
use crate::stats::{fit_line, MeanSe};
use crate::{Error, Result};
use std::io::Write;
use std::sync::Arc;

/// Piecewise-constant `γ` before it is placed on a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum GammaProfile {
    Constant(f64),
    /// `(value, right end)` pairs with increasing right ends; the last end is the horizon.
    Pieces(Vec<(f64, f64)>),
}

impl GammaProfile {
    pub fn zero() -> Self {
        GammaProfile::Constant(0.0)
    }

    pub fn scaled(&self, a: f64) -> Self {
        match self {
            GammaProfile::Constant(c) => GammaProfile::Constant(a * c),
            GammaProfile::Pieces(p) => GammaProfile::Pieces(p.iter().map(|(v, e)| (a * v, *e)).collect()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            GammaProfile::Constant(c) => *c == 0.0,
            GammaProfile::Pieces(p) => p.iter().all(|(v, _)| *v == 0.0),
        }
    }

    /// Parses `c` or `v1@t1,v2@t2,...`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if !text.contains('@') {
            return text
                .parse()
                .map(GammaProfile::Constant)
                .map_err(|_| Error::InvalidArgument(format!("cannot parse gamma `{text}`")));
        }
        let mut pieces = Vec::new();
        for part in text.split(',') {
            let (v, e) = part
                .split_once('@')
                .ok_or_else(|| Error::InvalidArgument(format!("gamma piece `{part}` is not value@end")))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad gamma value `{v}`")))?;
            let e: f64 = e.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad gamma end `{e}`")))?;
            if !v.is_finite() || pieces.last().is_some_and(|(_, prev): &(f64, f64)| e <= *prev) || e <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "gamma pieces must have finite values and increasing ends: `{text}`"
                )));
            }
            pieces.push((v, e));
        }
        Ok(GammaProfile::Pieces(pieces))
    }

    /// Cell values on `grid`; piece ends must be nodes and the last one the horizon.
    pub fn on_grid(&self, grid: &TimeGrid, p: f64) -> Result<GammaSpec> {
        let n = grid.n_steps();
        let values = match self {
            GammaProfile::Constant(c) => vec![*c; n],
            GammaProfile::Pieces(pieces) => {
                let last = pieces.last().map(|(_, e)| *e).unwrap_or(0.0);
                if (last - grid.horizon()).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "gamma pieces end at {last}, not at the horizon {}",
                        grid.horizon()
                    )));
                }
                let mut values = Vec::with_capacity(n);
                for (v, e) in pieces {
                    let k = grid.node_index(*e)?;
                    values.resize(k, *v);
                }
                values
            }
        };
        GammaSpec::new(*grid, values, p)
    }
}

impl std::fmt::Display for GammaProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GammaProfile::Constant(c) => write!(f, "{c}"),
            GammaProfile::Pieces(p) => {
                let parts: Vec<String> = p.iter().map(|(v, e)| format!("{v}@{e}")).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

/// `γ` as one value per grid cell, with the integrability exponent `p` of the
/// exponential-moment bound.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSpec {
    grid: TimeGrid,
    values: Vec<f64>,
    p: f64,
}

impl GammaSpec {
    pub fn new(grid: TimeGrid, values: Vec<f64>, p: f64) -> Result<Self> {
        if values.len() != grid.n_steps() {
            return Err(Error::GridMismatch(format!("{} gamma values for {} cells", values.len(), grid.n_steps())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("gamma values must be finite".into()));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!("exponent p = {p} must exceed 1")));
        }
        Ok(Self { grid, values, p })
    }

    pub fn constant(grid: TimeGrid, c: f64, p: f64) -> Result<Self> {
        let n = grid.n_steps();
        Self::new(grid, vec![c; n], p)
    }

    /// A `p` strictly between `1/H` and, when jumps are to be admissible, `1/(1/2 − H)`.
    pub fn default_p(h: &Hurst) -> f64 {
        let lo = 1.0 / h.value();
        let hi = 1.0 / h.alpha();
        if hi > lo {
            0.5 * (lo + hi)
        } else {
            1.25 * lo
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn validate_p(&self, h: &Hurst) -> Result<()> {
        if self.p * h.value() <= 1.0 {
            return Err(Error::Hypothesis(format!("p = {} must exceed 1/H = {}", self.p, 1.0 / h.value())));
        }
        Ok(())
    }

    /// Maximal runs of equal cell values as `(value, start, end)`.
    pub fn pieces(&self) -> Vec<(f64, f64, f64)> {
        let mut out: Vec<(f64, f64, f64)> = Vec::new();
        for (i, v) in self.values.iter().enumerate() {
            let (a, b) = (self.grid.node(i), self.grid.node(i + 1));
            match out.last_mut() {
                Some(last) if last.0 == *v => last.2 = b,
                _ => out.push((*v, a, b)),
            }
        }
        out
    }
}

/// Direction of a shift: `Forward` is `T_t`, `Backward` is `A_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shift {
    Forward,
    Backward,
}

impl Shift {
    fn sign(self) -> f64 {
        match self {
            Shift::Forward => 1.0,
            Shift::Backward => -1.0,
        }
    }
}

/// Precomputed shift tables for one `(grid, H, γ)`.
#[derive(Debug, Clone)]
pub struct GirsanovFrame {
    weights: Arc<KernelWeights>,
    gamma: GammaSpec,
    /// `kg[j][i]`: cell average of `Kγ1_{[0,t_j]}` on cell `i`, flattened.
    kg: Vec<f64>,
    /// `q_j = ‖Kγ1_{[0,t_j]}‖²`.
    q: Vec<f64>,
    /// `c_{j,k} = ⟨Kγ1_{[0,t_j]}, Kγ1_{[0,t_k]}⟩`, flattened.
    cross: Vec<f64>,
    /// `M[j][k] = B_{t_k}(T_{t_j}) − B_{t_k}`, flattened.
    offset: Vec<f64>,
}

impl GirsanovFrame {
    pub fn build(weights: Arc<KernelWeights>, gamma: GammaSpec, exec: Execution) -> Result<Self> {
        let grid = *weights.grid();
        if gamma.grid() != &grid {
            return Err(Error::GridMismatch("gamma and kernel weights live on different grids".into()));
        }
        gamma.validate_p(weights.hurst())?;
        let n = grid.n_steps();
        let dt = grid.dt();
        let mut kg = vec![0.0; (n + 1) * n];
        for j in 1..=n {
            let g = gamma.values()[j - 1];
            let (prev, cur) = kg.split_at_mut(j * n);
            let prev = &prev[(j - 1) * n..];
            let cur = &mut cur[..n];
            for i in 0..n {
                cur[i] = prev[i] + g * (weights.get(j, i) - weights.get(j - 1, i));
            }
        }
        let dot = |a: &[f64], b: &[f64]| dt * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let row = |j: usize| &kg[j * n..(j + 1) * n];
        let cross_rows = exec.map(n + 1, |j| (0..=n).map(|k| dot(row(j), row(k))).collect::<Vec<f64>>());
        let offset_rows = exec.map(n + 1, |j| (0..=n).map(|k| dot(row(j), weights.row(k))).collect::<Vec<f64>>());
        let cross = cross_rows.concat();
        let q = (0..=n).map(|j| cross[j * (n + 1) + j]).collect();
        Ok(Self { weights, gamma, kg, q, cross, offset: offset_rows.concat() })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.weights.grid()
    }

    pub fn hurst(&self) -> &Hurst {
        self.weights.hurst()
    }

    pub fn weights(&self) -> &Arc<KernelWeights> {
        &self.weights
    }

    pub fn gamma(&self) -> &GammaSpec {
        &self.gamma
    }

    pub fn is_trivial(&self) -> bool {
        self.gamma.is_zero()
    }

    pub fn kg_row(&self, j: usize) -> &[f64] {
        let n = self.grid().n_steps();
        &self.kg[j * n..(j + 1) * n]
    }

    pub fn q(&self, j: usize) -> f64 {
        self.q[j]
    }

    pub fn cross(&self, j: usize, k: usize) -> f64 {
        self.cross[j * (self.grid().n_steps() + 1) + k]
    }

    /// `B_{t_k}(T_{t_j}) − B_{t_k}`.
    pub fn offset(&self, j: usize, k: usize) -> f64 {
        self.offset[j * (self.grid().n_steps() + 1) + k]
    }

    /// `∫_0^{t_k ∧ t_j} Kγ1_{[0,t_j]}(r) dr`: the `W⁰` drift of `T_{t_j}` at node `k`.
    pub fn drift(&self, j: usize, k: usize) -> f64 {
        self.grid().dt() * self.kg_row(j)[..k].iter().sum::<f64>()
    }

    /// `∫_0^{t_j} γ dB` at every node.
    pub fn gamma_integrals(&self, dw0: &[f64]) -> Vec<f64> {
        (0..=self.grid().n_steps()).map(|j| self.kg_row(j)[..j].iter().zip(dw0).map(|(k, d)| k * d).sum()).collect()
    }

    /// `log ε_{t_j}` from the stochastic integrals.
    pub fn log_epsilon(&self, integrals: &[f64], j: usize) -> f64 {
        integrals[j] - 0.5 * self.q[j]
    }

    /// `log ε_{t_j}(T_{t_j}) = log ε_{t_j} + q_j`.
    pub fn log_e(&self, integrals: &[f64], j: usize) -> f64 {
        integrals[j] + 0.5 * self.q[j]
    }

    /// `log ε_{t_s}(T_{t_s})` evaluated on `A_{t_m} ω`.
    pub fn log_e_composed(&self, integrals: &[f64], s: usize, m: usize) -> f64 {
        integrals[s] - self.cross(m, s) + 0.5 * self.q[s]
    }

    /// `log J_r^v = c_{v,r}`.
    pub fn log_j_factor(&self, r: usize, v: usize) -> f64 {
        self.cross(v, r)
    }

    pub fn j_factor(&self, r: usize, v: usize) -> f64 {
        self.log_j_factor(r, v).exp()
    }

    /// `sup_j |∫_0^{t_j} γ dB|`.
    pub fn running_sup(&self, integrals: &[f64]) -> f64 {
        integrals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// The path moved by `±∫_0^{·∧t_j} Kγ1_{[0,t_j]}`; `B` is re-derived from the weights.
    pub fn shift_path(&self, path: &FbmPath, j: usize, shift: Shift) -> FbmPath {
        let a = shift.sign() * self.grid().dt();
        let dw0 = path.dw0.iter().zip(self.kg_row(j)).map(|(d, k)| d + a * k).collect();
        FbmPath::from_increments(path.index, dw0, &self.weights)
    }

    /// `(t, s, kg)` in long format.
    pub fn write_kg_csv<W: Write>(&self, out: W) -> Result<()> {
        let g = self.grid();
        let n = g.n_steps();
        let rows =
            (0..=n).flat_map(|j| (0..n).map(move |i| [num(g.node(j)), num(g.midpoint(i)), num(self.kg_row(j)[i])]));
        write_table(out, &["t", "s", "kg"], rows)
    }

    /// `(t, drift)` with the drift of `T_T` at every node.
    pub fn write_drift_csv<W: Write>(&self, out: W) -> Result<()> {
        let g = self.grid();
        let n = g.n_steps();
        write_table(out, &["t", "drift"], (0..=n).map(|k| [num(g.node(k)), num(self.drift(n, k))]))
    }

    pub fn write_cross_csv<W: Write>(&self, out: W) -> Result<()> {
        let g = self.grid();
        let n = g.n_steps();
        let rows = (0..=n).flat_map(|r| (0..=n).map(move |v| [num(g.node(r)), num(g.node(v)), num(self.cross(v, r))]));
        write_table(out, &["r", "v", "cross"], rows)
    }
}

/// One row of a Girsanov identity report.
#[derive(Debug, Clone, PartialEq)]
pub struct GirsanovRow {
    pub functional: String,
    /// `E[F]`.
    pub lhs: f64,
    /// `E[F(A_t) ε_t]`.
    pub rhs: f64,
    /// Standard error of the paired difference.
    pub se: f64,
    pub z: f64,
}

/// `E[F] = E[F(A_t) ε_t]` by Monte Carlo on one ensemble.
pub fn girsanov_expectation_check(
    functionals: &[TestFunctional],
    frame: &GirsanovFrame,
    t: usize,
    ensemble: &PathEnsemble,
    exec: Execution,
) -> Vec<GirsanovRow> {
    let per_path = exec.map(ensemble.len(), |k| {
        let p = &ensemble.paths[k];
        let eps = frame.log_epsilon(&frame.gamma_integrals(&p.dw0), t).exp();
        functionals
            .iter()
            .map(|f| {
                let x = f.coordinates(&p.b, None);
                let shifted = f.shift_coordinates(&x, |m| -frame.offset(t, m));
                (f.eval(&x), f.eval(&shifted) * eps)
            })
            .collect::<Vec<_>>()
    });
    functionals
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let a: Vec<f64> = per_path.iter().map(|r| r[i].0).collect();
            let b: Vec<f64> = per_path.iter().map(|r| r[i].1).collect();
            let d = MeanSe::paired(&a, &b);
            let lhs = MeanSe::of(&a).mean;
            let rhs = MeanSe::of(&b).mean;
            GirsanovRow { functional: f.name.clone(), lhs, rhs, se: d.se, z: d.z() }
        })
        .collect()
}

pub fn write_girsanov_report<W: Write>(out: W, rows: &[GirsanovRow]) -> Result<()> {
    write_table(
        out,
        &["functional", "lhs", "rhs", "se", "z"],
        rows.iter().map(|r| [r.functional.clone(), num(r.lhs), num(r.rhs), num(r.se), num(r.z)]),
    )
}

/// `G_p(0, T, γ)` of the exponential-moment bound.
///
/// For step `γ` the inner integral over `t` is closed form piece by piece; the
/// outer integral has an endpoint singularity of order `p(H − 1/2)` at every
/// jump, which diverges once `p(1/2 − H) ≥ 1`.
pub fn g_p(gamma: &GammaSpec, h: &Hurst) -> Result<f64> {
    let p = gamma.p();
    let hv = h.value();
    let horizon = gamma.grid().horizon();
    let pieces = gamma.pieces();
    let lp = pieces.iter().map(|(v, a, b)| v.abs().powf(p) * (b - a)).sum::<f64>().powf(1.0 / p);
    let first = lp * horizon.powf(hv - 1.0 / p);
    if pieces.len() == 1 {
        return Ok(first);
    }
    let exponent = p * (hv - 0.5);
    if exponent <= -1.0 {
        return Err(Error::Divergent(format!(
            "γ has jumps and p(1/2 − H) = {} ≥ 1, so the difference integral diverges",
            -exponent
        )));
    }
    let a = h.alpha();
    let mut outer = 0.0;
    for (k, &(gx, lo, hi)) in pieces.iter().enumerate() {
        if k + 1 == pieces.len() {
            continue;
        }
        // `d = hi − x`, passed exactly so the jump singularity is resolved.
        let inner = |d: f64| -> f64 {
            pieces[k + 1..]
                .iter()
                .map(|(gt, s, e)| (gt - gx).abs() * (((s - hi) + d).powf(-a) - ((e - hi) + d).powf(-a)) / a)
                .sum()
        };
        let est = integrate_singular_offset(
            |_, d| inner(d).powf(p),
            lo,
            hi,
            End::Right,
            exponent,
            Tolerance::new(1e-12, 1e-9),
        )?;
        outer += est.value;
    }
    Ok(first + horizon.powf(0.5 - 1.0 / p) * outer.powf(1.0 / p))
}

/// The exponential-moment bound `2 exp{½ (C·G_p + 4√2)²}` with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBound {
    pub g_p: f64,
    pub constant: f64,
    pub bound: f64,
}

pub fn exp_moment_bound(gamma: &GammaSpec, h: &Hurst, constant: f64) -> Result<MomentBound> {
    gamma.validate_p(h)?;
    let g = g_p(gamma, h)?;
    let bound = 2.0 * (0.5 * (constant * g + 4.0 * std::f64::consts::SQRT_2).powi(2)).exp();
    Ok(MomentBound { g_p: g, constant, bound })
}

/// Fitted `q` in `max_k |c_{v+ℓ,k} − c_{v,k}| ≈ C ℓ^q` over dyadic lags `ℓ`.
pub fn cross_holder_exponent(frame: &GirsanovFrame) -> f64 {
    let n = frame.grid().n_steps();
    let dt = frame.grid().dt();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut lag = 1;
    while lag <= n / 4 {
        let mut worst: f64 = 0.0;
        for v in 0..=n - lag {
            for k in 0..=n {
                worst = worst.max((frame.cross(v + lag, k) - frame.cross(v, k)).abs());
            }
        }
        if worst > 0.0 {
            xs.push((lag as f64 * dt).ln());
            ys.push(worst.ln());
        }
        lag *= 2;
    }
    if xs.len() < 2 {
        return f64::NAN;
    }
    fit_line(&xs, &ys).slope
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn frame(n: usize, gamma: &GammaProfile) -> GirsanovFrame {
        let grid = TimeGrid::new(1.0, n).unwrap();
        let h = Hurst::new(0.3).unwrap();
        let w = Arc::new(KernelWeights::new(grid, h, Execution::default()).unwrap());
        let g = gamma.on_grid(&grid, GammaSpec::default_p(&h)).unwrap();
        GirsanovFrame::build(w, g, Execution::default()).unwrap()
    }

    #[test]
    fn profile_parsing() {
        assert_eq!(GammaProfile::parse("0.5").unwrap(), GammaProfile::Constant(0.5));
        let p = GammaProfile::parse("0.8@0.5, 0.4@1").unwrap();
        assert_eq!(p, GammaProfile::Pieces(vec![(0.8, 0.5), (0.4, 1.0)]));
        assert_eq!(GammaProfile::parse(&p.to_string()).unwrap(), p);
        assert!(GammaProfile::parse("1@0.5,2@0.4").is_err());
        assert!(GammaProfile::parse("x").is_err());
        let g = TimeGrid::new(1.0, 8).unwrap();
        let spec = p.on_grid(&g, 4.0).unwrap();
        assert_eq!(spec.values(), &[0.8, 0.8, 0.8, 0.8, 0.4, 0.4, 0.4, 0.4]);
        assert_eq!(spec.pieces(), vec![(0.8, 0.0, 0.5), (0.4, 0.5, 1.0)]);
        assert!(GammaProfile::parse("1@0.3,2@1").unwrap().on_grid(&g, 4.0).is_err());
    }

    #[test]
    fn p_is_validated_against_h() {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let h = Hurst::new(0.3).unwrap();
        let w = Arc::new(KernelWeights::new(grid, h, Execution::default()).unwrap());
        let g = GammaSpec::constant(grid, 0.5, 3.0).unwrap();
        assert!(matches!(GirsanovFrame::build(w, g, Execution::default()), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn zero_gamma_gives_zero_tables() {
        let f = frame(16, &GammaProfile::zero());
        assert!(f.is_trivial());
        for j in 0..=16 {
            assert_eq!(f.q(j), 0.0);
            assert!(f.kg_row(j).iter().all(|v| *v == 0.0));
            assert_eq!(f.j_factor(j, 16), 1.0);
        }
    }

    #[test]
    fn constant_gamma_rows_are_scaled_kernel_rows() {
        let f = frame(32, &GammaProfile::Constant(0.7));
        for j in 0..=32 {
            for (a, b) in f.kg_row(j).iter().zip(f.weights().row(j)) {
                assert_relative_eq!(*a, 0.7 * b, max_relative = 1e-12, epsilon = 1e-14);
            }
            assert_relative_eq!(f.q(j), 0.49 * f.weights().gram(j, j), max_relative = 1e-12, epsilon = 1e-15);
        }
    }

    #[test]
    fn cross_table_is_symmetric_with_norm_diagonal() {
        let f = frame(16, &GammaProfile::parse("0.8@0.5,-0.4@1").unwrap());
        for j in 0..=16 {
            assert_eq!(f.cross(j, j), f.q(j));
            assert_eq!(f.j_factor(j, 0), 1.0);
            for k in 0..=16 {
                assert_relative_eq!(f.cross(j, k), f.cross(k, j), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn g_p_constant_and_zero() {
        let grid = TimeGrid::new(2.0, 8).unwrap();
        let h = Hurst::new(0.3).unwrap();
        let g = GammaSpec::constant(grid, -0.5, 4.0).unwrap();
        assert_relative_eq!(g_p(&g, &h).unwrap(), 0.5 * 2f64.powf(0.3), max_relative = 1e-14);
        let z = GammaSpec::constant(grid, 0.0, 4.0).unwrap();
        let b = exp_moment_bound(&z, &h, 1.0).unwrap();
        assert_relative_eq!(b.bound, 2.0 * 16f64.exp(), max_relative = 1e-14);
    }

    #[test]
    fn g_p_single_jump_matches_closed_form() {
        // γ = 1 on [0, 1/2), 0 after: the inner integral is ((1/2 − x)^{-α} − (1 − x)^{-α})/α.
        // Oracle: midpoint rule after x = 1/2 − u^5, which removes the endpoint singularity.
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let h = Hurst::new(0.3).unwrap();
        let p = 4.0;
        let g = GammaSpec::new(grid, vec![1.0, 1.0, 0.0, 0.0], p).unwrap();
        let a = h.alpha();
        let n = 200_000;
        let u_max = 0.5f64.powf(0.2);
        let mut acc = 0.0;
        for k in 0..n {
            let u = u_max * (k as f64 + 0.5) / n as f64;
            let d = u.powi(5);
            let inner = (d.powf(-a) - (0.5 + d).powf(-a)) / a;
            acc += inner.powf(p) * 5.0 * u.powi(4) * u_max / n as f64;
        }
        let expected = (0.5f64).powf(0.25) + acc.powf(0.25);
        assert_relative_eq!(g_p(&g, &h).unwrap(), expected, max_relative = 1e-7);
    }

    #[test]
    fn g_p_diverges_for_rough_exponent() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let h = Hurst::new(0.3).unwrap();
        let g = GammaSpec::new(grid, vec![1.0, 1.0, 0.0, 0.0], 6.0).unwrap();
        assert!(matches!(g_p(&g, &h), Err(Error::Divergent(_))));
    }

    #[test]
    fn frame_csvs_have_expected_shape() {
        let f = frame(4, &GammaProfile::Constant(0.5));
        let mut buf = Vec::new();
        f.write_kg_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 5 * 4);
        let mut buf = Vec::new();
        f.write_drift_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,drift\n0,0\n"));
        let mut buf = Vec::new();
        f.write_cross_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("r,v,cross\n"));
    }
}
