//! Fractional calculus on uniform grids, the Volterra kernel of fBm with
//! `H < 1/2`, the transfer operators and path sampling.

mod calculus;
mod kernel;
pub mod oracle;
mod sampling;
mod transfer;

pub use calculus::{
    frac_derivative_left, frac_derivative_left_at, frac_derivative_right, frac_derivative_right_at, frac_integral_left,
    frac_integral_right,
};
pub use kernel::{covariance_r, kernel_cell_integral, kernel_k_h, kernel_moment, kernel_product, KernelWeights};
pub use sampling::{sample_fbm, FbmPath, FbmSampler, PathEnsemble};
pub use transfer::{op_k, op_k_quadrature, op_k_quadrature_at, op_k_star, KernelSum};

use crate::quad::{integrate, Tolerance};
use crate::{Error, Result};
use statrs::function::beta::beta;

/// Hurst index `H ∈ (0, 1/2)` with the kernel normalisation `C_H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hurst {
    h: f64,
    c_h: f64,
    beta_full: f64,
    j_upper_half: f64,
}

impl Hurst {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 0.5) {
            return Err(Error::InvalidHurst(h));
        }
        let a = 1.0 - 2.0 * h;
        let b = h + 0.5;
        let beta_full = beta(a, b);
        let c_h = (2.0 * h / (a * beta_full)).sqrt();
        // ∫_{1/2}^1 w^{-2H}(1-w)^{H-1/2} dw with 1-w = v^{1/(H+1/2)}.
        let upper = integrate(
            |v: f64| (1.0 - v.powf(1.0 / b)).powf(-2.0 * h) / b,
            0.0,
            0.5f64.powf(b),
            Tolerance::new(1e-15, 1e-13),
        )?;
        Ok(Self { h, c_h, beta_full, j_upper_half: upper.value })
    }

    pub fn value(&self) -> f64 {
        self.h
    }

    /// `C_H = sqrt(2H / ((1−2H)·B(1−2H, H+1/2)))`.
    pub fn c_h(&self) -> f64 {
        self.c_h
    }

    /// `B(1−2H, H+1/2)`.
    pub fn beta_full(&self) -> f64 {
        self.beta_full
    }

    /// `α = 1/2 − H`, the order of the transfer derivatives.
    pub fn alpha(&self) -> f64 {
        0.5 - self.h
    }

    pub(crate) fn j_upper_half(&self) -> f64 {
        self.j_upper_half
    }
}
