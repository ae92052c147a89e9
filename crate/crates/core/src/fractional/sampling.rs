//! fBm paths generated from Wiener increments through the kernel weights.

use super::{Hurst, KernelWeights};
use crate::exec::Execution;
use crate::export::num;
use crate::grid::TimeGrid;
use crate::rng::{fill_normal, stream, Purpose};
use crate::{Error, Result};
use std::io::Write;
use std::sync::Arc;

/// One sample of the underlying Wiener increments and the resulting fBm nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub index: u64,
    /// `ΔW⁰_i`, one per cell.
    pub dw0: Vec<f64>,
    /// `B_{t_j}`, one per node, `B_0 = 0`.
    pub b: Vec<f64>,
}

impl FbmPath {
    /// Builds a path from increments, deriving `B` from the weights.
    pub fn from_increments(index: u64, dw0: Vec<f64>, weights: &KernelWeights) -> Self {
        let b = weights.apply(&dw0);
        Self { index, dw0, b }
    }

    /// Node values of `W⁰`.
    pub fn w0(&self) -> Vec<f64> {
        let mut acc = 0.0;
        std::iter::once(0.0)
            .chain(self.dw0.iter().map(|d| {
                acc += d;
                acc
            }))
            .collect()
    }
}

/// Reproducible source of fBm paths: path `k` depends only on `(seed, k)`.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    weights: Arc<KernelWeights>,
    seed: u64,
}

impl FbmSampler {
    pub fn new(weights: Arc<KernelWeights>, seed: u64) -> Self {
        Self { weights, seed }
    }

    pub fn weights(&self) -> &Arc<KernelWeights> {
        &self.weights
    }

    pub fn grid(&self) -> &TimeGrid {
        self.weights.grid()
    }

    pub fn hurst(&self) -> &Hurst {
        self.weights.hurst()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn increments(&self, index: u64) -> Vec<f64> {
        let g = self.weights.grid();
        let mut dw0 = vec![0.0; g.n_steps()];
        fill_normal(&mut stream(self.seed, Purpose::Fbm, index), g.dt(), &mut dw0);
        dw0
    }

    pub fn path(&self, index: u64) -> FbmPath {
        FbmPath::from_increments(index, self.increments(index), &self.weights)
    }
}

/// A materialised collection of paths `0..n_paths`.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub sampler: FbmSampler,
    pub paths: Vec<FbmPath>,
}

impl PathEnsemble {
    pub fn generate(sampler: &FbmSampler, n_paths: usize, exec: Execution) -> Result<Self> {
        if n_paths == 0 {
            return Err(Error::InvalidArgument("an ensemble needs at least one path".into()));
        }
        let paths = exec.map(n_paths, |k| sampler.path(k as u64));
        Ok(Self { sampler: sampler.clone(), paths })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.sampler.grid()
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Long-format export with header `path,t,W0,B`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let grid = self.grid();
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["path", "t", "W0", "B"])?;
        for p in &self.paths {
            for (j, (w, b)) in p.w0().iter().zip(&p.b).enumerate() {
                wtr.write_record([p.index.to_string(), num(grid.node(j)), num(*w), num(*b)])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Builds the weights for `(grid, hurst)` and samples `n_paths` paths.
pub fn sample_fbm(grid: TimeGrid, hurst: Hurst, seed: u64, n_paths: usize, exec: Execution) -> Result<PathEnsemble> {
    let weights = Arc::new(KernelWeights::new(grid, hurst, exec)?);
    PathEnsemble::generate(&FbmSampler::new(weights, seed), n_paths, exec)
}
