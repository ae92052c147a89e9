//! Least-squares projections onto polynomials of the forward state.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Condition number of `R` above which a basis is rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Exponent vectors of all monomials in `d` variables with total degree `≤ p`.
pub fn monomials(d: usize, p: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0; d]];
    if d == 0 {
        return out;
    }
    for deg in 1..=p as u32 {
        let mut cur = vec![0u32; d];
        push_degree(&mut out, &mut cur, 0, deg);
    }
    out
}

fn push_degree(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, k: usize, left: u32) {
    if k + 1 == cur.len() {
        cur[k] = left;
        out.push(cur.clone());
        cur[k] = 0;
        return;
    }
    for e in (0..=left).rev() {
        cur[k] = e;
        push_degree(out, cur, k + 1, left - e);
    }
    cur[k] = 0;
}

/// Orthonormal basis of span{monomials(standardised X)} over the sample, plus
/// fits on the two halves of the sample for cross-fitted predictions.
#[derive(Debug, Clone)]
pub struct RegressionPlan {
    q: DMatrix<f64>,
    condition: f64,
    design: DMatrix<f64>,
    half: usize,
    folds: [(DMatrix<f64>, DMatrix<f64>); 2],
}

fn thin_qr(a: DMatrix<f64>, node: usize) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    let qr = a.qr();
    let r = qr.r();
    let sv = r.singular_values();
    let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition.is_nan() || condition > MAX_CONDITION {
        return Err(Error::RankDeficient { node, condition });
    }
    Ok((qr.q(), r, condition))
}

impl RegressionPlan {
    /// `x` holds `n` samples of `d` coordinates, interleaved.
    pub fn new(x: &[f64], d: usize, degree: usize, node: usize) -> Result<Self> {
        let n = x.len() / d;
        let mut mean = vec![0.0; d];
        let mut sd = vec![0.0; d];
        for k in 0..d {
            mean[k] = (0..n).map(|w| x[w * d + k]).sum::<f64>() / n as f64;
            sd[k] = ((0..n).map(|w| (x[w * d + k] - mean[k]).powi(2)).sum::<f64>() / n as f64).sqrt();
        }
        // Coordinates that do not vary over the sample only contribute to the intercept.
        let active: Vec<usize> = (0..d)
            .filter(|&k| {
                let (lo, hi) = (0..n)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), w| (a.min(x[w * d + k]), b.max(x[w * d + k])));
                hi - lo > 1e-12 * lo.abs().max(hi.abs()).max(1.0)
            })
            .collect();
        let basis: Vec<Vec<u32>> = monomials(active.len(), degree)
            .into_iter()
            .map(|e| {
                let mut full = vec![0; d];
                for (i, k) in active.iter().enumerate() {
                    full[*k] = e[i];
                }
                full
            })
            .collect();
        if 2 * basis.len() > n {
            return Err(Error::RankDeficient { node, condition: f64::INFINITY });
        }
        let a = DMatrix::from_fn(n, basis.len(), |w, c| {
            basis[c]
                .iter()
                .enumerate()
                .filter(|(_, e)| **e > 0)
                .map(|(k, e)| ((x[w * d + k] - mean[k]) / sd[k]).powi(*e as i32))
                .product()
        });
        let half = n / 2;
        let k = basis.len();
        let (q0, r0, c0) = thin_qr(a.rows(0, half).into_owned(), node)?;
        let (q1, r1, c1) = thin_qr(a.rows(half, n - half).into_owned(), node)?;
        let (q, _, c) = thin_qr(a.clone(), node)?;
        debug_assert_eq!(q.ncols(), k);
        Ok(Self { q, condition: c.max(c0).max(c1), design: a, half, folds: [(q0, r0), (q1, r1)] })
    }

    pub fn n_samples(&self) -> usize {
        self.q.nrows()
    }

    /// Condition number of the triangular factor.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn n_basis(&self) -> usize {
        self.q.ncols()
    }

    /// The two halves of the sample used by [`RegressionPlan::cross_fit`].
    pub fn folds(&self) -> [std::ops::Range<usize>; 2] {
        let n = self.design.nrows();
        [0..self.half, self.half..n]
    }

    /// `v − P_f v` within each half `f`, with `P_f` the in-sample projection of that half.
    pub fn fold_residual(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        for (f, r) in self.folds().into_iter().enumerate() {
            let q = &self.folds[f].0;
            let part = DVector::from_column_slice(&v[r.clone()]);
            let fit = q * q.tr_mul(&part);
            for (o, p) in out[r].iter_mut().zip(fit.iter()) {
                *o -= p;
            }
        }
        out
    }

    /// Predictions where each half of the sample is evaluated with the fit from
    /// the other half, so a sample's value does not depend on its own response.
    pub fn cross_fit(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let ranges = [(0, self.half), (self.half, n - self.half)];
        let mut out = vec![0.0; n];
        for (fit, eval) in [(0usize, 1usize), (1, 0)] {
            let (q, r) = &self.folds[fit];
            let (s, len) = ranges[fit];
            let rhs = q.tr_mul(&DVector::from_column_slice(&v[s..s + len]));
            let beta = r.solve_upper_triangular(&rhs).expect("condition checked at construction");
            let (se, le) = ranges[eval];
            let pred = self.design.rows(se, le) * beta;
            out[se..se + le].copy_from_slice(pred.as_slice());
        }
        out
    }

    /// Orthogonal projection `Q Qᵀ v`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(v);
        let c = self.q.tr_mul(&v);
        (&self.q * c).data.into()
    }
}
