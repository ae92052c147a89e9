//! The forward diffusion `dX = −b(X) ds − σ(X) ↓dW`, `X_t = x`, simulated
//! backwards from `t` by Euler–Maruyama on reversed Brownian increments.

use crate::grid::TimeGrid;
use crate::rng::{fill_normal, nested_index, stream, Purpose};
use crate::{Error, Result};
use rand::Rng;

/// Registered coefficient sets `(b, σ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoeffKind {
    /// `b ≡ b`, `σ ≡ σ` in one dimension.
    Affine { b: f64, sigma: f64 },
    /// `b(x) = −κ x`, `σ ≡ σ`.
    Ou { kappa: f64, sigma: f64 },
    /// `b ≡ b`, `σ(x) = σ (1 + a sin x)` with `|a| < 1`.
    SineVol { b: f64, sigma: f64, amp: f64 },
    /// Two independent coordinates with `b = 0`, `σ = σ I`.
    Heat2 { sigma: f64 },
    /// Two coordinates with `b = 0` and correlation `ρ`.
    Correlated2 { sigma: f64, rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub kind: CoeffKind,
}

impl std::fmt::Display for Coefficients {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            CoeffKind::Affine { b, sigma } => write!(f, "affine:{b},{sigma}"),
            CoeffKind::Ou { kappa, sigma } => write!(f, "ou:{kappa},{sigma}"),
            CoeffKind::SineVol { b, sigma, amp } => write!(f, "sine-vol:{b},{sigma},{amp}"),
            CoeffKind::Heat2 { sigma } => write!(f, "heat2:{sigma}"),
            CoeffKind::Correlated2 { sigma, rho } => write!(f, "corr2:{sigma},{rho}"),
        }
    }
}

impl Coefficients {
    pub fn new(kind: CoeffKind) -> Result<Self> {
        let ok = match kind {
            CoeffKind::SineVol { amp, .. } => amp.abs() < 1.0,
            CoeffKind::Correlated2 { rho, .. } => rho.abs() < 1.0,
            _ => true,
        };
        if !ok {
            return Err(Error::InvalidArgument(format!("coefficients {kind:?} out of range")));
        }
        Ok(Self { kind })
    }

    /// `affine:b,σ`, `ou:κ,σ`, `sine-vol:b,σ,a`, `heat2:σ` or `corr2:σ,ρ`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, args) = split_call(text)?;
        let kind = match (name, args.as_slice()) {
            ("affine", [b, s]) => CoeffKind::Affine { b: *b, sigma: *s },
            ("ou", [k, s]) => CoeffKind::Ou { kappa: *k, sigma: *s },
            ("sine-vol", [b, s, a]) => CoeffKind::SineVol { b: *b, sigma: *s, amp: *a },
            ("heat2", [s]) => CoeffKind::Heat2 { sigma: *s },
            ("corr2", [s, r]) => CoeffKind::Correlated2 { sigma: *s, rho: *r },
            _ => return Err(Error::InvalidArgument(format!("unknown coefficient set `{text}`"))),
        };
        Self::new(kind)
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            CoeffKind::Heat2 { .. } | CoeffKind::Correlated2 { .. } => 2,
            _ => 1,
        }
    }

    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        match self.kind {
            CoeffKind::Affine { b, .. } | CoeffKind::SineVol { b, .. } => out[0] = b,
            CoeffKind::Ou { kappa, .. } => out[0] = -kappa * x[0],
            CoeffKind::Heat2 { .. } | CoeffKind::Correlated2 { .. } => out.fill(0.0),
        }
    }

    /// `σ(x)` row-major, `d × d`.
    pub fn sigma(&self, x: &[f64], out: &mut [f64]) {
        match self.kind {
            CoeffKind::Affine { sigma, .. } | CoeffKind::Ou { sigma, .. } => out[0] = sigma,
            CoeffKind::SineVol { sigma, amp, .. } => out[0] = sigma * (1.0 + amp * x[0].sin()),
            CoeffKind::Heat2 { sigma } => out.copy_from_slice(&[sigma, 0.0, 0.0, sigma]),
            CoeffKind::Correlated2 { sigma, rho } => {
                out.copy_from_slice(&[sigma, 0.0, rho * sigma, sigma * (1.0 - rho * rho).sqrt()])
            }
        }
    }

    /// `b'(x)` and `σ'(x)` in one dimension.
    pub fn derivatives(&self, x: f64) -> Result<(f64, f64)> {
        match self.kind {
            CoeffKind::Affine { .. } => Ok((0.0, 0.0)),
            CoeffKind::Ou { kappa, .. } => Ok((-kappa, 0.0)),
            CoeffKind::SineVol { sigma, amp, .. } => Ok((0.0, sigma * amp * x.cos())),
            _ => Err(Error::Unsupported("tangent flows are implemented in one dimension".into())),
        }
    }

    /// Lipschitz constants of `b` and `σ` (Frobenius norm).
    pub fn lipschitz(&self) -> (f64, f64) {
        match self.kind {
            CoeffKind::Affine { .. } | CoeffKind::Heat2 { .. } | CoeffKind::Correlated2 { .. } => (0.0, 0.0),
            CoeffKind::Ou { kappa, .. } => (kappa.abs(), 0.0),
            CoeffKind::SineVol { sigma, amp, .. } => (0.0, (sigma * amp).abs()),
        }
    }

    /// Samples random pairs and checks the declared Lipschitz constants.
    pub fn spot_check(&self, seed: u64, samples: usize) -> Result<()> {
        let d = self.dim();
        let (lb, ls) = self.lipschitz();
        let mut rng = stream(seed, Purpose::Auxiliary, 1);
        let (mut bx, mut by) = (vec![0.0; d], vec![0.0; d]);
        let (mut sx, mut sy) = (vec![0.0; d * d], vec![0.0; d * d]);
        for _ in 0..samples {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-10.0..10.0)).collect();
            let y: Vec<f64> = (0..d).map(|_| rng.random_range(-10.0..10.0)).collect();
            let dist = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            self.drift(&x, &mut bx);
            self.drift(&y, &mut by);
            self.sigma(&x, &mut sx);
            self.sigma(&y, &mut sy);
            let db = bx.iter().zip(&by).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let ds = sx.iter().zip(&sy).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let slack = 1.0 + 1e-12;
            if db > lb * dist * slack + 1e-14 || ds > ls * dist * slack + 1e-14 {
                return Err(Error::Hypothesis(format!("coefficients {:?} break their Lipschitz constants", self.kind)));
            }
        }
        Ok(())
    }
}

/// Splits `name:a,b,c` into the name and its numeric arguments.
pub(crate) fn split_call(text: &str) -> Result<(&str, Vec<f64>)> {
    let (name, args) = text.split_once(':').unwrap_or((text, ""));
    let nums = if args.trim().is_empty() {
        vec![]
    } else {
        args.split(',')
            .map(|a| a.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad parameter `{a}` in `{text}`"))))
            .collect::<Result<_>>()?
    };
    Ok((name.trim(), nums))
}

/// Brownian increments of sub-path `inner` under outer path `outer`, drawn on a
/// grid `refine` times finer and summed back, so that different resolutions
/// share the same underlying motion. Layout: cell-major, `d` values per cell.
pub fn brownian_increments(seed: u64, outer: u64, inner: u64, grid: &TimeGrid, d: usize, refine: usize) -> Vec<f64> {
    let n = grid.n_steps();
    let mut fine = vec![0.0; n * refine * d];
    fill_normal(&mut stream(seed, Purpose::Brownian, nested_index(outer, inner)), grid.dt() / refine as f64, &mut fine);
    if refine == 1 {
        return fine;
    }
    let mut out = vec![0.0; n * d];
    for j in 0..n {
        for r in 0..refine {
            for k in 0..d {
                out[j * d + k] += fine[((j * refine + r) * d) + k];
            }
        }
    }
    out
}

/// A sub-ensemble of the forward diffusion started at `(t_start, x0)`.
///
/// Arrays are node-major: entry `(j, w, k)` lives at `(j * n_paths + w) * d + k`.
#[derive(Debug, Clone)]
pub struct WEnsemble {
    pub d: usize,
    pub n_paths: usize,
    pub start: usize,
    pub dt: f64,
    pub x0: Vec<f64>,
    /// `X_{t_j}` for `j ≤ start`.
    pub x: Vec<f64>,
    /// `W_{t_{j+1}} − W_{t_j}` for `j < start`.
    pub dw: Vec<f64>,
}

impl WEnsemble {
    /// Simulates from increments given per path with the layout of [`brownian_increments`];
    /// only the first `start` cells are used.
    pub fn simulate(
        coeff: &Coefficients,
        grid: &TimeGrid,
        start: usize,
        x0: &[f64],
        increments: &[Vec<f64>],
    ) -> Result<Self> {
        let d = coeff.dim();
        if x0.len() != d {
            return Err(Error::InvalidArgument(format!("start point has {} coordinates, expected {d}", x0.len())));
        }
        if start > grid.n_steps() {
            return Err(Error::InvalidArgument(format!("start node {start} beyond the grid")));
        }
        let n_paths = increments.len();
        if n_paths == 0 {
            return Err(Error::InvalidArgument("an ensemble needs at least one path".into()));
        }
        let dt = grid.dt();
        let mut x = vec![0.0; (start + 1) * n_paths * d];
        let mut dw = vec![0.0; start * n_paths * d];
        for (w, inc) in increments.iter().enumerate() {
            for j in 0..start {
                for k in 0..d {
                    dw[(j * n_paths + w) * d + k] = inc[j * d + k];
                }
            }
            x[(start * n_paths + w) * d..(start * n_paths + w + 1) * d].copy_from_slice(x0);
        }
        let mut b = vec![0.0; d];
        let mut s = vec![0.0; d * d];
        for j in (0..start).rev() {
            for w in 0..n_paths {
                let hi = (j + 1) * n_paths + w;
                let lo = j * n_paths + w;
                let xr: Vec<f64> = x[hi * d..(hi + 1) * d].to_vec();
                coeff.drift(&xr, &mut b);
                coeff.sigma(&xr, &mut s);
                for k in 0..d {
                    let noise: f64 = (0..d).map(|l| s[k * d + l] * dw[lo * d + l]).sum();
                    let v = xr[k] + b[k] * dt + noise;
                    if !v.is_finite() {
                        return Err(Error::BlowUp { what: "forward diffusion".into(), step: j });
                    }
                    x[lo * d + k] = v;
                }
            }
        }
        Ok(Self { d, n_paths, start, dt, x0: x0.to_vec(), x, dw })
    }

    /// Draws `n_paths` sub-paths for fBm path `outer` and simulates.
    pub fn generate(
        coeff: &Coefficients,
        grid: &TimeGrid,
        start: usize,
        x0: &[f64],
        seed: u64,
        outer: u64,
        n_paths: usize,
    ) -> Result<Self> {
        let d = coeff.dim();
        let inc: Vec<Vec<f64>> = (0..n_paths as u64).map(|w| brownian_increments(seed, outer, w, grid, d, 1)).collect();
        Self::simulate(coeff, grid, start, x0, &inc)
    }

    pub fn x_at(&self, j: usize, w: usize) -> &[f64] {
        let i = (j * self.n_paths + w) * self.d;
        &self.x[i..i + self.d]
    }

    pub fn dw_at(&self, j: usize, w: usize) -> &[f64] {
        let i = (j * self.n_paths + w) * self.d;
        &self.dw[i..i + self.d]
    }

    /// `X_{t_j}` of all paths, coordinate-interleaved.
    pub fn x_node(&self, j: usize) -> &[f64] {
        &self.x[j * self.n_paths * self.d..(j + 1) * self.n_paths * self.d]
    }
}

/// Tangent flow `∇X_{t_j}` in one dimension, with `∇X_{t_start} = 1`.
pub fn tangent_flow(coeff: &Coefficients, ens: &WEnsemble) -> Result<Vec<f64>> {
    if ens.d != 1 {
        return Err(Error::Unsupported("tangent flows are implemented in one dimension".into()));
    }
    let n = ens.n_paths;
    let mut g = vec![0.0; (ens.start + 1) * n];
    g[ens.start * n..].fill(1.0);
    for j in (0..ens.start).rev() {
        for w in 0..n {
            let xr = ens.x_at(j + 1, w)[0];
            let (db, ds) = coeff.derivatives(xr)?;
            let gr = g[(j + 1) * n + w];
            let v = gr * (1.0 + db * ens.dt + ds * ens.dw_at(j, w)[0]);
            if v.abs() < 1e-12 {
                return Err(Error::SingularFlow { node: j, det: v });
            }
            g[j * n + w] = v;
        }
    }
    Ok(g)
}
