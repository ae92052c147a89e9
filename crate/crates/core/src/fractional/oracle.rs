//! Covariance-matrix sampling, used only to cross-check the kernel sampler.

use super::{covariance_r, Hurst};
use crate::grid::TimeGrid;
use crate::rng::{fill_normal, stream, Purpose};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// `R_H(t_j, t_k)` over the nonzero nodes `t_1..t_n`.
pub fn covariance_matrix(grid: &TimeGrid, hurst: &Hurst) -> DMatrix<f64> {
    let n = grid.n_steps();
    DMatrix::from_fn(n, n, |j, k| covariance_r(hurst, grid.node(j + 1), grid.node(k + 1)))
}

/// Exact-law fBm node values `B_{t_0..t_n}` by Cholesky factorisation.
pub struct CholeskySampler {
    grid: TimeGrid,
    factor: DMatrix<f64>,
    seed: u64,
}

impl CholeskySampler {
    pub fn new(grid: TimeGrid, hurst: Hurst, seed: u64) -> Result<Self> {
        let chol = covariance_matrix(&grid, &hurst)
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("covariance matrix not positive definite".into()))?;
        Ok(Self { grid, factor: chol.l(), seed })
    }

    pub fn path(&self, index: u64) -> Vec<f64> {
        let n = self.grid.n_steps();
        let mut z = vec![0.0; n];
        fill_normal(&mut stream(self.seed, Purpose::Auxiliary, index), 1.0, &mut z);
        let b = &self.factor * DVector::from_vec(z);
        std::iter::once(0.0).chain(b.iter().copied()).collect()
    }
}
