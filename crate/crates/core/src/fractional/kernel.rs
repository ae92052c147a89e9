//! The Volterra kernel `K_H`, the covariance `R_H` and cell-averaged kernel weights.

use super::Hurst;
use crate::exec::Execution;
use crate::grid::TimeGrid;
use crate::quad::{integrate, integrate_singular, integrate_singular_offset, integrate_two_sided, End, Tolerance};
use crate::{Error, Result};
use std::io::Write;

const INNER_TOL: Tolerance = Tolerance::new(1e-15, 1e-12);
const CELL_TOL: Tolerance = Tolerance::new(1e-14, 1e-10);

/// `J(x) = ∫_x^1 w^{−2H}(1−w)^{H−1/2} dw`, the inner integral of the kernel after `u = s/w`.
#[cfg(test)]
fn inner_j(h: &Hurst, x: f64) -> f64 {
    inner_j_split(h, x, 1.0 - x)
}

/// `J(x)` with `1 − x` supplied separately to keep precision near `x = 1`.
fn inner_j_split(h: &Hurst, x: f64, one_minus_x: f64) -> f64 {
    let hv = h.value();
    let b = hv + 0.5;
    let a = 1.0 - 2.0 * hv;
    let est = if x >= 0.5 {
        // 1 − w = v^{1/b} on [x, 1].
        integrate(|v: f64| (1.0 - v.powf(1.0 / b)).powf(-2.0 * hv) / b, 0.0, one_minus_x.powf(b), INNER_TOL)
    } else {
        // w = v^{1/a} on [x, 1/2].
        integrate(|v: f64| (1.0 - v.powf(1.0 / a)).powf(hv - 0.5) / a, x.powf(a), 0.5f64.powf(a), INNER_TOL)
            .map(|e| crate::quad::Estimate { value: e.value + h.j_upper_half(), error: e.error })
    };
    // Both integrands are smooth after substitution; a failure here is a bug.
    est.expect("kernel inner integral").value
}

pub(crate) fn kernel_unchecked(h: &Hurst, t: f64, s: f64) -> f64 {
    kernel_gap(h, t, s, t - s)
}

/// Kernel with the gap `t − s` passed in exactly.
pub(crate) fn kernel_gap(h: &Hurst, t: f64, s: f64, gap: f64) -> f64 {
    if !(s > 0.0 && gap > 0.0) {
        return 0.0;
    }
    let e = h.value() - 0.5;
    h.c_h() * ((t / s).powf(e) * gap.powf(e) - e * s.powf(e) * inner_j_split(h, s / t, gap / t))
}

/// `K_H(t, s)` for `0 < s < t`.
pub fn kernel_k_h(h: &Hurst, t: f64, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < t) {
        return Err(Error::InvalidArgument(format!("kernel needs 0 < s < t, got s = {s}, t = {t}")));
    }
    Ok(kernel_unchecked(h, t, s))
}

/// `R_H(t, s) = (t^{2H} + s^{2H} − |t−s|^{2H}) / 2`.
pub fn covariance_r(h: &Hurst, t: f64, s: f64) -> f64 {
    let two_h = 2.0 * h.value();
    0.5 * (t.abs().powf(two_h) + s.abs().powf(two_h) - (t - s).abs().powf(two_h))
}

/// `∫_a^b K_H(t, s) ds` for `0 ≤ a < b ≤ t`.
pub fn kernel_cell_integral(h: &Hurst, t: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0 <= a && a < b && b <= t) {
        return Err(Error::InvalidArgument(format!("cell [{a}, {b}] not inside [0, {t}]")));
    }
    let e = h.value() - 0.5;
    let f = |s: f64| kernel_unchecked(h, t, s);
    let at_end = |s: f64, d: f64| kernel_gap(h, t, s, d);
    let est = match (a == 0.0, b == t) {
        (true, true) => integrate_two_sided(at_end, a, b, e, e, CELL_TOL)?,
        (true, false) => integrate_singular(f, a, b, End::Left, e, CELL_TOL)?,
        (false, true) => integrate_singular_offset(at_end, a, b, End::Right, e, CELL_TOL)?,
        (false, false) => integrate(f, a, b, CELL_TOL)?,
    };
    Ok(est.value)
}

/// `∫_0^{t∧r} K_H(t, s) K_H(r, s) ds`.
pub fn kernel_product(h: &Hurst, t: f64, r: f64) -> Result<f64> {
    let (lo, hi) = if t <= r { (t, r) } else { (r, t) };
    if lo <= 0.0 {
        return Ok(0.0);
    }
    let e = h.value() - 0.5;
    let tol = Tolerance { abs: 1e-14, rel: 1e-11, max_intervals: 1000 };
    let f = |s: f64| kernel_unchecked(h, lo, s) * kernel_unchecked(h, hi, s);
    let g = |s: f64, d: f64| kernel_gap(h, lo, s, d) * kernel_gap(h, hi, s, d + (hi - lo));
    let m = 0.5 * lo;
    let left = integrate_singular(f, 0.0, m, End::Left, 2.0 * e, tol)?;
    let right = if hi == lo {
        integrate_singular_offset(g, m, lo, End::Right, 2.0 * e, tol)?
    } else {
        // K_H(hi, ·) is nearly singular just beyond lo when hi − lo is small.
        let split = (lo - (hi - lo)).max(m);
        let near = integrate_singular_offset(g, split, lo, End::Right, e, tol)?;
        let far = if split > m { integrate(f, m, split, tol)?.value } else { 0.0 };
        crate::quad::Estimate { value: near.value + far, error: near.error }
    };
    Ok(left.value + right.value)
}

/// `∫_0^t g(s) K_H(t, s) ds` for bounded `g`.
pub fn kernel_moment(h: &Hurst, t: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let e = h.value() - 0.5;
    Ok(integrate_two_sided(|s: f64, d: f64| g(s) * kernel_gap(h, t, s, d), 0.0, t, e, e, CELL_TOL)?.value)
}

/// Cell-averaged kernel weights `w[j][i] = Δ^{-1} ∫_{cell i} K_H(t_j, s) ds`.
///
/// Row `j` has nonzero entries for `i < j` only. `B_{t_j} = Σ_i w[j][i] ΔW⁰_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeights {
    grid: TimeGrid,
    hurst: Hurst,
    w: Vec<f64>,
}

impl KernelWeights {
    pub fn new(grid: TimeGrid, hurst: Hurst, exec: Execution) -> Result<Self> {
        let n = grid.n_steps();
        let dt = grid.dt();
        let rows = exec.try_map(n + 1, |j| -> Result<Vec<f64>> {
            let mut row = vec![0.0; n];
            let t = grid.node(j);
            for (i, w) in row.iter_mut().enumerate().take(j) {
                let b = if i + 1 == j { t } else { grid.node(i + 1) };
                *w = kernel_cell_integral(&hurst, t, grid.node(i), b)? / dt;
            }
            Ok(row)
        })?;
        Ok(Self { grid, hurst, w: rows.concat() })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hurst(&self) -> &Hurst {
        &self.hurst
    }

    /// Row `j` (length `n`).
    pub fn row(&self, j: usize) -> &[f64] {
        let n = self.grid.n_steps();
        &self.w[j * n..(j + 1) * n]
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.row(j)[i]
    }

    /// Node values of `B` generated by the increments `dw0`.
    pub fn apply(&self, dw0: &[f64]) -> Vec<f64> {
        let n = self.grid.n_steps();
        debug_assert_eq!(dw0.len(), n);
        (0..=n).map(|j| self.row(j)[..j].iter().zip(dw0).map(|(w, d)| w * d).sum()).collect()
    }

    /// `Δ Σ_i w[j][i] w[k][i]`, the discrete covariance of `B_{t_j}` and `B_{t_k}`.
    pub fn gram(&self, j: usize, k: usize) -> f64 {
        self.grid.dt() * self.row(j).iter().zip(self.row(k)).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Writes the table with one row per node and one column per cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.grid.n_steps();
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["node".to_string()];
        header.extend((0..n).map(|i| format!("cell_{i}")));
        wtr.write_record(&header)?;
        for j in 0..=n {
            let mut rec = vec![j.to_string()];
            rec.extend(self.row(j).iter().map(|v| crate::export::num(*v)));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
