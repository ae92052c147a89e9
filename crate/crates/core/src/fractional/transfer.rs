//! The transfer operator `K` (exact on step functions) and its adjoint `K*`.

use super::calculus::{frac_derivative_left, frac_derivative_right_at};
use super::kernel::{covariance_r, kernel_moment, kernel_product, kernel_unchecked, KernelWeights};
use super::Hurst;
use crate::grid::{GridFunction, Layout, TimeGrid};
use crate::{Error, Result};
use statrs::function::gamma::gamma;

/// `Σ_k c_k K_H(t_k, ·) 1_{[0, t_k]}`: the image under `K` of `Σ_k c_k 1_{[0, t_k]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSum {
    hurst: Hurst,
    terms: Vec<(f64, f64)>,
}

impl KernelSum {
    /// From `(coefficient, time)` pairs; zero coefficients and `t = 0` terms are dropped.
    pub fn new(hurst: Hurst, terms: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let terms = terms.into_iter().filter(|(c, t)| *c != 0.0 && *t > 0.0).collect();
        Self { hurst, terms }
    }

    /// `K 1_{[0,t]}`.
    pub fn indicator(hurst: Hurst, t: f64) -> Self {
        Self::new(hurst, [(1.0, t)])
    }

    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    pub fn hurst(&self) -> &Hurst {
        &self.hurst
    }

    /// Pointwise value; singular at the term times.
    pub fn eval(&self, s: f64) -> f64 {
        self.terms.iter().map(|(c, t)| c * kernel_unchecked(&self.hurst, *t, s)).sum()
    }

    /// `⟨Kφ, Kψ⟩_{L²}` by quadrature of kernel products.
    pub fn inner(&self, other: &KernelSum) -> Result<f64> {
        let mut acc = 0.0;
        for (c, t) in &self.terms {
            for (d, r) in &other.terms {
                acc += c * d * kernel_product(&self.hurst, *t, *r)?;
            }
        }
        Ok(acc)
    }

    /// `⟨φ, ψ⟩_Λ` through the covariance bilinear form `Σ c_k d_l R_H(t_k, r_l)`.
    pub fn lambda_inner(&self, other: &KernelSum) -> f64 {
        let mut acc = 0.0;
        for (c, t) in &self.terms {
            for (d, r) in &other.terms {
                acc += c * d * covariance_r(&self.hurst, *t, *r);
            }
        }
        acc
    }

    /// `⟨g, Kφ⟩_{L²}` for bounded `g`.
    pub fn pair(&self, g: impl Fn(f64) -> f64 + Copy) -> Result<f64> {
        let mut acc = 0.0;
        for (c, t) in &self.terms {
            acc += c * kernel_moment(&self.hurst, *t, g)?;
        }
        Ok(acc)
    }

    /// Cell averages on the weight grid; every term time must be a node.
    pub fn cell_averages(&self, weights: &KernelWeights) -> Result<Vec<f64>> {
        let grid = weights.grid();
        let mut out = vec![0.0; grid.n_steps()];
        for (c, t) in &self.terms {
            let j = grid.node_index(*t)?;
            for (o, w) in out.iter_mut().zip(weights.row(j)) {
                *o += c * w;
            }
        }
        Ok(out)
    }

    /// Midpoint samples as a cell-based function.
    pub fn sample_midpoints(&self, grid: TimeGrid) -> GridFunction {
        GridFunction::from_cells(grid, |s| self.eval(s))
    }
}

/// Exact `Kφ` for a step function `φ` given by its cell values.
pub fn op_k(phi: &GridFunction, hurst: Hurst) -> Result<KernelSum> {
    if phi.layout() != Layout::Cell {
        return Err(Error::InvalidArgument(
            "the exact transfer operator needs a step function (cell-based values)".into(),
        ));
    }
    let g = phi.grid();
    let v = phi.values();
    let n = g.n_steps();
    // φ = Σ_i φ_i (1_{[0,t_{i+1}]} − 1_{[0,t_i]}).
    let terms = (1..=n).map(|m| {
        let next = if m < n { v[m] } else { 0.0 };
        (v[m - 1] - next, g.node(m))
    });
    Ok(KernelSum::new(hurst, terms))
}

fn transfer_constant(h: &Hurst) -> f64 {
    h.c_h() * gamma(h.value() + 0.5)
}

/// Fallback `Kφ(s) = C_H Γ(H+1/2) s^{1/2−H} D^{1/2−H}_{T−}(u^{H−1/2} φ(u))(s)` for node-based `φ`.
///
/// Needs `s ≥ t_1`: the weight `u^{H−1/2}` is infinite at the origin.
pub fn op_k_quadrature_at(phi: &GridFunction, hurst: Hurst, s: f64) -> Result<f64> {
    phi.ensure_layout(Layout::Node, "op_k_quadrature")?;
    let g = phi.grid();
    if s < g.node(1) {
        return Err(Error::InvalidArgument(format!("quadrature transfer is unresolved below t_1, got {s}")));
    }
    let alpha = hurst.alpha();
    let mut weighted: Vec<f64> =
        phi.values().iter().enumerate().map(|(k, v)| if k == 0 { 0.0 } else { g.node(k).powf(-alpha) * v }).collect();
    weighted[0] = weighted[1];
    let weighted = GridFunction::new(*g, Layout::Node, weighted)?;
    Ok(transfer_constant(&hurst) * s.powf(alpha) * frac_derivative_right_at(&weighted, alpha, s)?)
}

/// Fallback transfer at the cell midpoints; the first cell is reported as NaN.
pub fn op_k_quadrature(phi: &GridFunction, hurst: Hurst) -> Result<GridFunction> {
    let g = *phi.grid();
    let mut values = vec![f64::NAN; g.n_steps()];
    for (k, v) in values.iter_mut().enumerate().skip(1) {
        *v = op_k_quadrature_at(phi, hurst, g.midpoint(k))?;
    }
    GridFunction::new(g, Layout::Cell, values)
}

/// `K*g(u) = C_H Γ(H+1/2) u^{H−1/2} D^{1/2−H}_{0+}(s^{1/2−H} g(s))(u)` at the cell midpoints.
pub fn op_k_star(g: &GridFunction, hurst: Hurst) -> Result<GridFunction> {
    g.ensure_layout(Layout::Node, "op_k_star")?;
    let grid = *g.grid();
    let alpha = hurst.alpha();
    let weighted = GridFunction::new(
        grid,
        Layout::Node,
        g.values().iter().enumerate().map(|(k, v)| grid.node(k).powf(alpha) * v).collect(),
    )?;
    let d = frac_derivative_left(&weighted, alpha)?;
    let c = transfer_constant(&hurst);
    let values = d.values().iter().enumerate().map(|(k, v)| c * grid.midpoint(k).powf(-alpha) * v).collect();
    GridFunction::new(grid, Layout::Cell, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use approx::assert_relative_eq;

    #[test]
    fn indicator_maps_to_kernel_column() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let h = Hurst::new(0.3).unwrap();
        let k = op_k(&GridFunction::indicator(g, 0.5).unwrap(), h).unwrap();
        assert_eq!(k.terms(), &[(1.0, 0.5)]);
        let zero = op_k(&GridFunction::zeros(g, Layout::Cell), h).unwrap();
        assert!(zero.terms().is_empty());
        assert!(op_k(&GridFunction::zeros(g, Layout::Node), h).is_err());
    }

    #[test]
    fn cell_averages_reproduce_weight_rows() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let h = Hurst::new(0.3).unwrap();
        let w = KernelWeights::new(g, h, Execution::Sequential).unwrap();
        let k = KernelSum::indicator(h, 0.75);
        assert_eq!(k.cell_averages(&w).unwrap(), w.row(6).to_vec());
    }

    #[test]
    fn isometry_on_indicators() {
        let h = Hurst::new(0.3).unwrap();
        let a = KernelSum::indicator(h, 0.75);
        let b = KernelSum::indicator(h, 0.5);
        assert_relative_eq!(a.inner(&b).unwrap(), a.lambda_inner(&b), max_relative = 1e-8);
    }

    #[test]
    fn adjoint_of_zero_is_zero() {
        let g = TimeGrid::new(1.0, 32).unwrap();
        let z = op_k_star(&GridFunction::zeros(g, Layout::Node), Hurst::new(0.3).unwrap()).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));
    }
}
