//! Smooth test functionals `F = f(B(φ_1), …, B(φ_n), W(ψ_1), …, W(ψ_m))` with
//! polynomial `f` and symbolic Malliavin derivatives.

use crate::grid::{GridFunction, Layout, TimeGrid};
use crate::{Error, Result};

/// `B(φ) = Σ_m c_m B_{t_m}` for the step function `φ = Σ_m c_m 1_{[0, t_m]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeCombination {
    terms: Vec<(f64, usize)>,
}

impl NodeCombination {
    pub fn new(terms: Vec<(f64, usize)>) -> Self {
        Self { terms: terms.into_iter().filter(|(c, m)| *c != 0.0 && *m > 0).collect() }
    }

    /// `B_{t_m}`.
    pub fn node(m: usize) -> Self {
        Self::new(vec![(1.0, m)])
    }

    /// Representation of a cell-based step function.
    pub fn from_step(phi: &GridFunction) -> Result<Self> {
        phi.ensure_layout(Layout::Cell, "B(φ)")?;
        let v = phi.values();
        let n = v.len();
        Ok(Self::new((1..=n).map(|m| (v[m - 1] - if m < n { v[m] } else { 0.0 }, m)).collect()))
    }

    pub fn terms(&self) -> &[(f64, usize)] {
        &self.terms
    }

    pub fn eval(&self, b_nodes: &[f64]) -> f64 {
        self.terms.iter().map(|(c, m)| c * b_nodes[*m]).sum()
    }

    /// `Σ_m c_m table(m)`, e.g. a shift offset per node.
    pub fn apply(&self, table: impl Fn(usize) -> f64) -> f64 {
        self.terms.iter().map(|(c, m)| c * table(*m)).sum()
    }

    /// Cell values of the step function.
    pub fn step_values(&self, n_cells: usize) -> Vec<f64> {
        (0..n_cells).map(|i| self.terms.iter().filter(|(_, m)| *m > i).map(|(c, _)| c).sum()).collect()
    }
}

/// Polynomial `Σ_k a_k Π_i x_i^{e_{k,i}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    n_vars: usize,
    terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    pub fn new(n_vars: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        for (_, e) in &terms {
            if e.len() != n_vars {
                return Err(Error::InvalidArgument(format!(
                    "monomial with {} exponents for {n_vars} variables",
                    e.len()
                )));
            }
        }
        Ok(Self { n_vars, terms })
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, e)| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(a, e)| a * e.iter().zip(x).map(|(p, v)| v.powi(*p as i32)).product::<f64>()).sum()
    }

    pub fn partial(&self, i: usize, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .filter(|(_, e)| e[i] > 0)
            .map(|(a, e)| {
                let mut prod = a * e[i] as f64;
                for (k, (p, v)) in e.iter().zip(x).enumerate() {
                    let p = if k == i { p - 1 } else { *p };
                    prod *= v.powi(p as i32);
                }
                prod
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalKind {
    Constant,
    LinearInB,
    PolynomialInB,
    MixedWithW,
}

/// `F = f(B(φ_1..φ_n), W(ψ_1..ψ_m))`; the B-coordinates come first in `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctional {
    pub name: String,
    b_coords: Vec<NodeCombination>,
    /// `ψ` sampled at the left end of each cell; `W(ψ) = Σ_i ψ_i ΔW_i`.
    w_coords: Vec<Vec<f64>>,
    poly: Polynomial,
}

impl TestFunctional {
    pub fn new(
        name: impl Into<String>,
        b_coords: Vec<NodeCombination>,
        w_coords: Vec<Vec<f64>>,
        poly: Polynomial,
    ) -> Result<Self> {
        if poly.n_vars() != b_coords.len() + w_coords.len() {
            return Err(Error::InvalidArgument("polynomial arity does not match the coordinates".into()));
        }
        if poly.n_vars() > 3 || poly.degree() > 4 {
            return Err(Error::InvalidArgument("test functionals use at most 3 coordinates and degree 4".into()));
        }
        Ok(Self { name: name.into(), b_coords, w_coords, poly })
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), vec![], vec![], Polynomial::new(0, vec![(c, vec![])]).unwrap()).unwrap()
    }

    /// `B(φ)^k`.
    pub fn b_power(name: impl Into<String>, phi: NodeCombination, k: u32) -> Self {
        Self::new(name, vec![phi], vec![], Polynomial::new(1, vec![(1.0, vec![k])]).unwrap()).unwrap()
    }

    /// `B_{t_m}^k`.
    pub fn node_power(m: usize, t: f64, k: u32) -> Self {
        let name = if k == 1 { format!("B({t})") } else { format!("B({t})^{k}") };
        Self::b_power(name, NodeCombination::node(m), k)
    }

    pub fn kind(&self) -> FunctionalKind {
        if !self.w_coords.is_empty() {
            FunctionalKind::MixedWithW
        } else if self.poly.degree() == 0 {
            FunctionalKind::Constant
        } else if self.poly.degree() == 1 {
            FunctionalKind::LinearInB
        } else {
            FunctionalKind::PolynomialInB
        }
    }

    pub fn b_coords(&self) -> &[NodeCombination] {
        &self.b_coords
    }

    pub fn n_b(&self) -> usize {
        self.b_coords.len()
    }

    /// Coordinates `(B(φ_i)..., W(ψ_k)...)` from fBm nodes and Brownian increments.
    pub fn coordinates(&self, b_nodes: &[f64], dw: Option<&[f64]>) -> Vec<f64> {
        let mut x: Vec<f64> = self.b_coords.iter().map(|c| c.eval(b_nodes)).collect();
        for psi in &self.w_coords {
            let dw = dw.expect("W-coordinates need Brownian increments");
            x.push(psi.iter().zip(dw).map(|(p, d)| p * d).sum());
        }
        x
    }

    /// Coordinates after adding `offset(m)` to every `B_{t_m}`.
    pub fn shift_coordinates(&self, x: &[f64], offset: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut y = x.to_vec();
        for (yi, c) in y.iter_mut().zip(&self.b_coords) {
            *yi += c.apply(&offset);
        }
        y
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.poly.eval(x)
    }

    /// `∂f/∂x_i`; `D^B F = Σ_{i<n_b} ∂_i f · φ_i`.
    pub fn partial(&self, i: usize, x: &[f64]) -> f64 {
        self.poly.partial(i, x)
    }

    /// `D^B F` as cell values.
    pub fn malliavin_b(&self, x: &[f64], n_cells: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_cells];
        for (i, c) in self.b_coords.iter().enumerate() {
            let d = self.partial(i, x);
            for (o, v) in out.iter_mut().zip(c.step_values(n_cells)) {
                *o += d * v;
            }
        }
        out
    }

    /// `D^W F` as cell values.
    pub fn malliavin_w(&self, x: &[f64], n_cells: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_cells];
        for (k, psi) in self.w_coords.iter().enumerate() {
            let d = self.partial(self.b_coords.len() + k, x);
            for (o, v) in out.iter_mut().zip(psi) {
                *o += d * v;
            }
        }
        out
    }
}

/// The functionals used by the identity and duality checks: `1`, `B_t`,
/// `B_t²`, `B_{T/2} B_T`, a two-piece step integral and `B_{T/2}³`.
pub fn standard_family(grid: &TimeGrid) -> Vec<TestFunctional> {
    let n = grid.n_steps();
    let half = n / 2;
    let th = grid.node(half);
    let t = grid.horizon();
    let quarter = n / 4;
    let step = NodeCombination::new(vec![(1.0, quarter), (-1.0, 3 * quarter), (1.0, half)]);
    vec![
        TestFunctional::constant(1.0),
        TestFunctional::node_power(n, t, 1),
        TestFunctional::node_power(n, t, 2),
        TestFunctional::new(
            format!("B({th})*B({t})"),
            vec![NodeCombination::node(half), NodeCombination::node(n)],
            vec![],
            Polynomial::new(2, vec![(1.0, vec![1, 1])]).unwrap(),
        )
        .unwrap(),
        TestFunctional::b_power("B(step)", step, 1),
        TestFunctional::node_power(half, th, 3),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_function_round_trip() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let phi = GridFunction::from_cells(g, |s| if s < 0.5 { 2.0 } else { -1.0 });
        let c = NodeCombination::from_step(&phi).unwrap();
        assert_eq!(c.terms(), &[(3.0, 4), (-1.0, 8)]);
        assert_eq!(c.step_values(8), phi.values().to_vec());
    }

    #[test]
    fn polynomial_partials() {
        let p = Polynomial::new(2, vec![(2.0, vec![2, 1]), (-1.0, vec![0, 3])]).unwrap();
        let x = [1.5, -0.5];
        assert_eq!(p.eval(&x), 2.0 * 2.25 * -0.5 + 0.125);
        assert_eq!(p.partial(0, &x), 4.0 * 1.5 * -0.5);
        assert_eq!(p.partial(1, &x), 2.0 * 2.25 - 3.0 * 0.25);
    }

    #[test]
    fn kinds_and_limits() {
        assert_eq!(TestFunctional::constant(1.0).kind(), FunctionalKind::Constant);
        assert_eq!(TestFunctional::node_power(4, 0.5, 1).kind(), FunctionalKind::LinearInB);
        assert_eq!(TestFunctional::node_power(4, 0.5, 2).kind(), FunctionalKind::PolynomialInB);
        let too_high = Polynomial::new(1, vec![(1.0, vec![5])]).unwrap();
        assert!(TestFunctional::new("x", vec![NodeCombination::node(1)], vec![], too_high).is_err());
    }
}
