//! Uniform time grids and functions sampled on them.

use crate::{Error, Result};

/// Uniform partition `0 = t_0 < … < t_n = T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if n_steps < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 steps, got {n_steps}")));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Node `t_j`; the last node is exactly the horizon.
    pub fn node(&self, j: usize) -> f64 {
        if j == self.n_steps {
            self.horizon
        } else {
            self.horizon * j as f64 / self.n_steps as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|j| self.node(j)).collect()
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        0.5 * (self.node(i) + self.node(i + 1))
    }

    /// Index of the node equal to `t` up to a relative tolerance of 1e-9 of the step.
    pub fn node_index(&self, t: f64) -> Result<usize> {
        let x = t / self.dt();
        let j = x.round();
        if j < 0.0 || j > self.n_steps as f64 || (x - j).abs() > 1e-9 {
            return Err(Error::NotANode(t));
        }
        Ok(j as usize)
    }

    /// Grid with the same horizon and `factor` times fewer steps.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.n_steps.is_multiple_of(factor) {
            return Err(Error::InvalidGrid(format!("{} steps cannot be coarsened by {factor}", self.n_steps)));
        }
        Self::new(self.horizon, self.n_steps / factor)
    }
}

/// Whether values sit on nodes (`n + 1` values) or on cells (`n` values).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Node,
    Cell,
}

/// Real function sampled on a [`TimeGrid`].
///
/// Node-based functions are read as piecewise linear; cell-based functions
/// are step functions constant on `(t_i, t_{i+1}]` (or carry midpoint values
/// when produced by an operator evaluated at midpoints).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: TimeGrid,
    layout: Layout,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: TimeGrid, layout: Layout, values: Vec<f64>) -> Result<Self> {
        let expected = match layout {
            Layout::Node => grid.n_steps() + 1,
            Layout::Cell => grid.n_steps(),
        };
        if values.len() != expected {
            return Err(Error::GridMismatch(format!(
                "{layout:?}-based function needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(Self { grid, layout, values })
    }

    pub fn from_nodes(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self { grid, layout: Layout::Node, values }
    }

    pub fn from_cells(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n_steps()).map(|i| f(grid.midpoint(i))).collect();
        Self { grid, layout: Layout::Cell, values }
    }

    /// Step function equal to 1 on `(0, t]`; `t` must be a node.
    pub fn indicator(grid: TimeGrid, t: f64) -> Result<Self> {
        let m = grid.node_index(t)?;
        let values = (0..grid.n_steps()).map(|i| if i < m { 1.0 } else { 0.0 }).collect();
        Ok(Self { grid, layout: Layout::Cell, values })
    }

    pub fn zeros(grid: TimeGrid, layout: Layout) -> Self {
        let n = match layout {
            Layout::Node => grid.n_steps() + 1,
            Layout::Cell => grid.n_steps(),
        };
        Self { grid, layout, values: vec![0.0; n] }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Time attached to value `k`: the node for node-based, the midpoint for cell-based.
    pub fn time(&self, k: usize) -> f64 {
        match self.layout {
            Layout::Node => self.grid.node(k),
            Layout::Cell => self.grid.midpoint(k),
        }
    }

    pub fn ensure_layout(&self, layout: Layout, what: &str) -> Result<()> {
        if self.layout != layout {
            return Err(Error::GridMismatch(format!(
                "{what} expects a {layout:?}-based function, got {:?}-based",
                self.layout
            )));
        }
        Ok(())
    }

    pub fn ensure_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("functions live on different grids".into()));
        }
        Ok(())
    }

    /// `L²` inner product of two cell-based functions (midpoint rule).
    pub fn l2_inner(&self, other: &GridFunction) -> Result<f64> {
        self.ensure_same_grid(other)?;
        self.ensure_layout(Layout::Cell, "l2_inner")?;
        other.ensure_layout(Layout::Cell, "l2_inner")?;
        let dt = self.grid.dt();
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * dt)
    }
}
