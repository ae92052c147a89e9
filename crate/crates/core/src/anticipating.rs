//! The anticipating equation `X_t = ξ + ∫_0^t b(s, X_s) ds + ∫_0^t γ_s X_s dB_s`
//! solved through its pathwise ODE.
//!
//! `ζ_t(ω, x) = x + ∫_0^t ε_s^{-1}(T_s ω) b(T_s ω, s, ε_s(T_s ω) ζ_s(ω, x)) ds` is integrated
//! by Heun's method, and the solution is `X_t = ε_t ζ_t(A_t ω, ξ(A_t ω))`. Along
//! `A_{t_m} ω`, every quantity the ODE needs is a deterministic correction of
//! the unshifted path, so one ODE solve per node suffices.

use crate::divergence::{Duality, DualityRow, GramRoute};
use crate::exec::Execution;
use crate::export::{num, write_table};
use crate::fractional::{FbmPath, PathEnsemble};
use crate::functional::TestFunctional;
use crate::girsanov::GirsanovFrame;
use crate::rng::{stream, Purpose};
use crate::{Error, Result};
use rand::Rng;
use std::io::Write;

/// Registered drifts `b(t, B_t, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftKind {
    Zero,
    Constant(f64),
    /// `λ x`.
    Linear(f64),
    /// `a sin x + cos t`.
    Sine(f64),
    /// `λ x + κ sin B_t`: random through the fBm path.
    PathSine {
        lambda: f64,
        kappa: f64,
    },
}

/// A drift with its declared Lipschitz constant `ν` and bound `L ≥ sup_t |b(t, 0)|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSpec {
    pub kind: DriftKind,
    pub nu: f64,
    pub bound: f64,
}

impl DriftSpec {
    pub fn new(kind: DriftKind) -> Self {
        let (nu, bound) = match kind {
            DriftKind::Zero => (0.0, 0.0),
            DriftKind::Constant(a) => (0.0, a.abs()),
            DriftKind::Linear(l) => (l.abs(), 0.0),
            DriftKind::Sine(a) => (a.abs(), 1.0),
            DriftKind::PathSine { lambda, kappa } => (lambda.abs(), kappa.abs()),
        };
        Self { kind, nu, bound }
    }

    /// `zero`, `const:a`, `linear:λ`, `sine:a` or `path-sine:λ,κ`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, args) = text.split_once(':').unwrap_or((text, ""));
        let nums: Vec<f64> = if args.is_empty() {
            vec![]
        } else {
            args.split(',')
                .map(|a| a.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad drift parameter `{a}`"))))
                .collect::<Result<_>>()?
        };
        let kind = match (name.trim(), nums.as_slice()) {
            ("zero", []) => DriftKind::Zero,
            ("const", [a]) => DriftKind::Constant(*a),
            ("linear", [l]) => DriftKind::Linear(*l),
            ("sine", [a]) => DriftKind::Sine(*a),
            ("path-sine", [l, k]) => DriftKind::PathSine { lambda: *l, kappa: *k },
            _ => return Err(Error::InvalidArgument(format!("unknown drift `{text}`"))),
        };
        Ok(Self::new(kind))
    }

    pub fn eval(&self, t: f64, b: f64, x: f64) -> f64 {
        match self.kind {
            DriftKind::Zero => 0.0,
            DriftKind::Constant(a) => a,
            DriftKind::Linear(l) => l * x,
            DriftKind::Sine(a) => a * x.sin() + t.cos(),
            DriftKind::PathSine { lambda, kappa } => lambda * x + kappa * b.sin(),
        }
    }

    /// Samples random `(t, B, x, y)` and checks the declared constants.
    pub fn spot_check(&self, horizon: f64, seed: u64, samples: usize) -> Result<()> {
        let mut rng = stream(seed, Purpose::Auxiliary, 0);
        for _ in 0..samples {
            let t = rng.random_range(0.0..=horizon);
            let b = rng.random_range(-5.0..5.0);
            let x = rng.random_range(-10.0..10.0);
            let y = rng.random_range(-10.0..10.0);
            let lhs = (self.eval(t, b, x) - self.eval(t, b, y)).abs();
            if lhs > self.nu * (x - y).abs() * (1.0 + 1e-12) + 1e-14 {
                return Err(Error::Hypothesis(format!(
                    "drift {:?} breaks its Lipschitz constant {} at t = {t}, x = {x}, y = {y}",
                    self.kind, self.nu
                )));
            }
            if self.eval(t, b, 0.0).abs() > self.bound * (1.0 + 1e-12) {
                return Err(Error::Hypothesis(format!("drift {:?} exceeds |b(t, 0)| ≤ {}", self.kind, self.bound)));
            }
        }
        Ok(())
    }
}

/// Data of the ODE along one (possibly composed) path: `log ε_s(T_s)` and `B_s(T_s)` at nodes.
struct OdeData<'a> {
    log_e: &'a [f64],
    b: &'a [f64],
}

fn heun(
    frame: &GirsanovFrame,
    drift: &DriftSpec,
    data: &OdeData,
    x: f64,
    upto: usize,
    substeps: usize,
) -> Result<Vec<f64>> {
    let grid = frame.grid();
    let h = grid.dt() / substeps as f64;
    let rhs = |t: f64, le: f64, b: f64, z: f64| {
        let e = le.exp();
        drift.eval(t, b, e * z) / e
    };
    let mut out = Vec::with_capacity(upto + 1);
    let mut z = x;
    out.push(z);
    for j in 0..upto {
        let t0 = grid.node(j);
        let (l0, l1) = (data.log_e[j], data.log_e[j + 1]);
        let (b0, b1) = (data.b[j], data.b[j + 1]);
        let at = |k: usize| {
            let w = k as f64 / substeps as f64;
            (t0 + k as f64 * h, l0 + w * (l1 - l0), b0 + w * (b1 - b0))
        };
        for k in 0..substeps {
            let (ta, la, ba) = at(k);
            let (tb, lb, bb) = at(k + 1);
            let ka = rhs(ta, la, ba, z);
            let kb = rhs(tb, lb, bb, z + h * ka);
            z += 0.5 * h * (ka + kb);
        }
        if !z.is_finite() {
            return Err(Error::BlowUp { what: "ζ-ODE".into(), step: j + 1 });
        }
        out.push(z);
    }
    Ok(out)
}

/// Per-path quantities shared by all solves.
struct PathData {
    integrals: Vec<f64>,
}

impl PathData {
    fn new(frame: &GirsanovFrame, path: &FbmPath) -> Self {
        Self { integrals: frame.gamma_integrals(&path.dw0) }
    }

    /// ODE data along `A_{t_m} ω`, or along `ω` when `m` is `None`.
    fn ode_data(&self, frame: &GirsanovFrame, path: &FbmPath, m: Option<usize>) -> (Vec<f64>, Vec<f64>) {
        let n = frame.grid().n_steps();
        let log_e = (0..=n)
            .map(|s| match m {
                Some(m) => frame.log_e_composed(&self.integrals, s, m),
                None => frame.log_e(&self.integrals, s),
            })
            .collect();
        let b = (0..=n).map(|s| path.b[s] + frame.offset(s, s) - m.map_or(0.0, |m| frame.offset(m, s))).collect();
        (log_e, b)
    }
}

/// `ζ_{t_j}(ω, x)` at every node.
pub fn solve_zeta(
    path: &FbmPath,
    frame: &GirsanovFrame,
    drift: &DriftSpec,
    x: f64,
    substeps: usize,
) -> Result<Vec<f64>> {
    if substeps == 0 {
        return Err(Error::InvalidArgument("at least one Heun substep per cell".into()));
    }
    let pd = PathData::new(frame, path);
    let (log_e, b) = pd.ode_data(frame, path, None);
    heun(frame, drift, &OdeData { log_e: &log_e, b: &b }, x, frame.grid().n_steps(), substeps)
}

/// Solution along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct AnticipatingPath {
    pub index: u64,
    pub x: Vec<f64>,
    /// `ζ_{t_j}(A_{t_j} ω, ξ(A_{t_j} ω))`.
    pub zeta: Vec<f64>,
    pub log_epsilon: Vec<f64>,
    /// `∫_{cell j} b(s, X_s) ds`, evaluated through the same conjugation as `X`.
    pub drift_cells: Vec<f64>,
    /// `ξ(ω)`.
    pub xi: f64,
}

impl AnticipatingPath {
    /// `X_{t_m} − ξ − ∫_0^{t_m} b(s, X_s) ds`, which identifies `∫_0^{t_m} γ X dB`.
    pub fn residual(&self, m: usize) -> f64 {
        self.x[m] - self.xi - self.drift_cells[..m].iter().sum::<f64>()
    }
}

/// Solves along one path. `xi` must be a functional of `B` only.
pub fn solve_path(
    path: &FbmPath,
    frame: &GirsanovFrame,
    drift: &DriftSpec,
    xi: &TestFunctional,
    substeps: usize,
) -> Result<AnticipatingPath> {
    if substeps == 0 {
        return Err(Error::InvalidArgument("at least one Heun substep per cell".into()));
    }
    let n = frame.grid().n_steps();
    let pd = PathData::new(frame, path);
    let xi_coords = xi.coordinates(&path.b, None);
    let mut x = Vec::with_capacity(n + 1);
    let mut zeta = Vec::with_capacity(n + 1);
    let mut drift_cells = Vec::with_capacity(n);
    let log_epsilon: Vec<f64> = (0..=n).map(|m| frame.log_epsilon(&pd.integrals, m)).collect();
    for m in 0..=n {
        let (log_e, b) = pd.ode_data(frame, path, Some(m));
        let start = xi.eval(&xi.shift_coordinates(&xi_coords, |k| -frame.offset(m, k)));
        let upto = (m + 1).min(n);
        let z = heun(frame, drift, &OdeData { log_e: &log_e, b: &b }, start, upto, substeps)?;
        let eps = log_epsilon[m].exp();
        x.push(eps * z[m]);
        zeta.push(z[m]);
        if m < n {
            drift_cells.push(eps * (z[m + 1] - z[m]));
        }
    }
    Ok(AnticipatingPath { index: path.index, x, zeta, log_epsilon, drift_cells, xi: xi.eval(&xi_coords) })
}

#[derive(Debug, Clone)]
pub struct AnticipatingSolution {
    pub paths: Vec<AnticipatingPath>,
}

pub fn solve_anticipating(
    ensemble: &PathEnsemble,
    frame: &GirsanovFrame,
    drift: &DriftSpec,
    xi: &TestFunctional,
    substeps: usize,
    exec: Execution,
) -> Result<AnticipatingSolution> {
    if xi.kind() == crate::functional::FunctionalKind::MixedWithW {
        return Err(Error::Unsupported("the initial value must be a functional of the fBm path".into()));
    }
    let paths = exec.try_map(ensemble.len(), |k| solve_path(&ensemble.paths[k], frame, drift, xi, substeps))?;
    Ok(AnticipatingSolution { paths })
}

impl AnticipatingSolution {
    /// Second moment of `X` at every node.
    pub fn second_moments(&self) -> Vec<f64> {
        let n = self.paths[0].x.len();
        (0..n).map(|j| self.paths.iter().map(|p| p.x[j] * p.x[j]).sum::<f64>() / self.paths.len() as f64).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W, frame: &GirsanovFrame) -> Result<()> {
        let g = frame.grid();
        let rows = self.paths.iter().flat_map(|p| {
            (0..p.x.len()).map(move |j| {
                [p.index.to_string(), num(g.node(j)), num(p.x[j]), num(p.zeta[j]), num(p.log_epsilon[j].exp())]
            })
        });
        write_table(out, &["path", "t", "X", "zeta", "epsilon"], rows)
    }
}

/// Duality check for `u = γ X 1_{[0, t_m]}` with `δ(u)` identified from the residual.
///
/// On cell `j` the integrand takes the value `γ_j X_{t_{j+1}}`: this is the
/// choice for which the conjugated drift integral makes the discrete identity
/// exact for linear functionals.
pub fn residual_duality_check(
    solution: &AnticipatingSolution,
    ensemble: &PathEnsemble,
    frame: &GirsanovFrame,
    functionals: Vec<TestFunctional>,
    m: usize,
    exec: Execution,
) -> Result<Vec<DualityRow>> {
    let duality = Duality::new(functionals, frame.weights(), GramRoute::Discrete);
    let gamma = frame.gamma().values();
    let n = frame.grid().n_steps();
    let samples = exec.map(solution.paths.len(), |k| {
        let p = &solution.paths[k];
        let u: Vec<f64> = (0..n).map(|j| if j < m { gamma[j] * p.x[j + 1] } else { 0.0 }).collect();
        duality.sample(&ensemble.paths[k].b, None, &u, p.residual(m))
    });
    duality.finish(&samples, 1)
}

/// Empirical order of the Heun scheme from `|ζ_T^{(k)} − ζ_T^{(ref)}|` at `k` and `2k`
/// substeps, averaged over `paths`.
pub fn heun_order(
    paths: &[FbmPath],
    frame: &GirsanovFrame,
    drift: &DriftSpec,
    x: f64,
    coarse: usize,
    reference: usize,
) -> Result<f64> {
    let n = frame.grid().n_steps();
    let mut e1 = 0.0;
    let mut e2 = 0.0;
    for p in paths {
        let r = solve_zeta(p, frame, drift, x, reference)?[n];
        e1 += (solve_zeta(p, frame, drift, x, coarse)?[n] - r).abs();
        e2 += (solve_zeta(p, frame, drift, x, 2 * coarse)?[n] - r).abs();
    }
    Ok((e1 / e2).log2())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_catalog_parses() {
        assert_eq!(DriftSpec::parse("zero").unwrap().kind, DriftKind::Zero);
        assert_eq!(DriftSpec::parse("linear:0.5").unwrap().kind, DriftKind::Linear(0.5));
        assert_eq!(
            DriftSpec::parse("path-sine:0.5,0.2").unwrap().kind,
            DriftKind::PathSine { lambda: 0.5, kappa: 0.2 }
        );
        assert!(DriftSpec::parse("linear").is_err());
        assert!(DriftSpec::parse("cubic:1").is_err());
    }

    #[test]
    fn spot_check_flags_wrong_constants() {
        for text in ["zero", "const:2", "linear:-1.5", "sine:0.7", "path-sine:0.5,0.3"] {
            DriftSpec::parse(text).unwrap().spot_check(1.0, 1, 2000).unwrap();
        }
        let mut d = DriftSpec::parse("linear:2").unwrap();
        d.nu = 1.0;
        assert!(matches!(d.spot_check(1.0, 1, 100), Err(Error::Hypothesis(_))));
    }
}
