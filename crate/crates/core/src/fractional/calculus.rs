//! Riemann–Liouville integrals and Marchaud derivatives of piecewise linear
//! grid functions.
//!
//! Every cell integral is evaluated in closed form against the linear
//! interpolant, so the singular weights `(u−x)^{α−1}` and `(u−s)^{−1−α}` never
//! meet a quadrature rule.

use crate::grid::{GridFunction, Layout};
use crate::{Error, Result};
use statrs::function::gamma::gamma;

fn check_order(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidOrder(alpha))
    }
}

/// `∫_a^b (c + σv) v^{α−1} dv` for `0 ≤ a ≤ b`.
fn power_moment(c: f64, sigma: f64, a: f64, b: f64, alpha: f64) -> f64 {
    c * (b.powf(alpha) - a.powf(alpha)) / alpha + sigma * (b.powf(alpha + 1.0) - a.powf(alpha + 1.0)) / (alpha + 1.0)
}

/// `∫_a^b (c + σv) v^{−1−α} dv` for `0 < a ≤ b`.
fn marchaud_moment(c: f64, sigma: f64, a: f64, b: f64, alpha: f64) -> f64 {
    c * (a.powf(-alpha) - b.powf(-alpha)) / alpha + sigma * (b.powf(1.0 - alpha) - a.powf(1.0 - alpha)) / (1.0 - alpha)
}

struct Linear<'a> {
    t: Vec<f64>,
    f: &'a [f64],
    dt: f64,
}

impl<'a> Linear<'a> {
    fn new(g: &'a GridFunction) -> Result<Self> {
        g.ensure_layout(Layout::Node, "fractional operator")?;
        if g.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("fractional operators need finite node values".into()));
        }
        Ok(Self { t: g.grid().nodes(), f: g.values(), dt: g.grid().dt() })
    }

    fn slope(&self, i: usize) -> f64 {
        (self.f[i + 1] - self.f[i]) / self.dt
    }

    fn n(&self) -> usize {
        self.f.len() - 1
    }

    /// Cell containing `s` and the interpolated value there.
    fn locate(&self, s: f64) -> (usize, f64) {
        let k = ((s / self.dt).floor() as usize).min(self.n() - 1);
        (k, self.f[k] + self.slope(k) * (s - self.t[k]))
    }
}

/// `I^α_{T−} f` at the nodes.
pub fn frac_integral_right(f: &GridFunction, alpha: f64) -> Result<GridFunction> {
    check_order(alpha)?;
    let lin = Linear::new(f)?;
    let n = lin.n();
    let norm = gamma(alpha);
    let values = (0..=n)
        .map(|k| {
            let x = lin.t[k];
            let mut acc = 0.0;
            for i in k..n {
                let (a, b) = (lin.t[i] - x, lin.t[i + 1] - x);
                let sigma = lin.slope(i);
                acc += power_moment(lin.f[i] - sigma * a, sigma, a, b, alpha);
            }
            acc / norm
        })
        .collect();
    GridFunction::new(*f.grid(), Layout::Node, values)
}

/// `I^α_{0+} f` at the nodes.
pub fn frac_integral_left(f: &GridFunction, alpha: f64) -> Result<GridFunction> {
    check_order(alpha)?;
    let lin = Linear::new(f)?;
    let n = lin.n();
    let norm = gamma(alpha);
    let values = (0..=n)
        .map(|k| {
            let x = lin.t[k];
            let mut acc = 0.0;
            for i in 0..k {
                let (a, b) = (x - lin.t[i + 1], x - lin.t[i]);
                let sigma = lin.slope(i);
                acc += power_moment(lin.f[i] + sigma * b, -sigma, a, b, alpha);
            }
            acc / norm
        })
        .collect();
    GridFunction::new(*f.grid(), Layout::Node, values)
}

/// `D^α_{T−} f(s)` for `s ∈ (0, T)` not on a node.
pub fn frac_derivative_right_at(f: &GridFunction, alpha: f64, s: f64) -> Result<f64> {
    check_order(alpha)?;
    let lin = Linear::new(f)?;
    right_at(&lin, alpha, s)
}

fn right_at(lin: &Linear, alpha: f64, s: f64) -> Result<f64> {
    let n = lin.n();
    let horizon = lin.t[n];
    if !(s > 0.0 && s < horizon) {
        return Err(Error::InvalidArgument(format!("evaluation point {s} outside (0, T)")));
    }
    let (k, fs) = lin.locate(s);
    // Partial cell [s, t_{k+1}]: f(s) − f(u) = −σ_k (u − s).
    let h = lin.t[k + 1] - s;
    let mut integral = -lin.slope(k) * h.powf(1.0 - alpha) / (1.0 - alpha);
    for i in k + 1..n {
        let (a, b) = (lin.t[i] - s, lin.t[i + 1] - s);
        let sigma = lin.slope(i);
        integral += marchaud_moment(fs - lin.f[i] + sigma * a, -sigma, a, b, alpha);
    }
    Ok((fs / (horizon - s).powf(alpha) + alpha * integral) / gamma(1.0 - alpha))
}

/// `D^α_{0+} f(s)` for `s ∈ (0, T)` not on a node.
pub fn frac_derivative_left_at(f: &GridFunction, alpha: f64, s: f64) -> Result<f64> {
    check_order(alpha)?;
    let lin = Linear::new(f)?;
    left_at(&lin, alpha, s)
}

fn left_at(lin: &Linear, alpha: f64, s: f64) -> Result<f64> {
    let n = lin.n();
    if !(s > 0.0 && s < lin.t[n]) {
        return Err(Error::InvalidArgument(format!("evaluation point {s} outside (0, T)")));
    }
    let (k, fs) = lin.locate(s);
    // Partial cell [t_k, s]: f(s) − f(u) = σ_k (s − u).
    let h = s - lin.t[k];
    let mut integral = lin.slope(k) * h.powf(1.0 - alpha) / (1.0 - alpha);
    for i in 0..k {
        let (a, b) = (s - lin.t[i + 1], s - lin.t[i]);
        let sigma = lin.slope(i);
        integral += marchaud_moment(fs - lin.f[i] - sigma * b, sigma, a, b, alpha);
    }
    Ok((fs / s.powf(alpha) + alpha * integral) / gamma(1.0 - alpha))
}

/// `D^α_{T−} f` at the cell midpoints (the endpoint `s = T` is singular).
pub fn frac_derivative_right(f: &GridFunction, alpha: f64) -> Result<GridFunction> {
    check_order(alpha)?;
    let lin = Linear::new(f)?;
    let g = *f.grid();
    let values = (0..g.n_steps()).map(|k| right_at(&lin, alpha, g.midpoint(k))).collect::<Result<_>>()?;
    GridFunction::new(g, Layout::Cell, values)
}

/// `D^α_{0+} f` at the cell midpoints (the endpoint `s = 0` is singular).
pub fn frac_derivative_left(f: &GridFunction, alpha: f64) -> Result<GridFunction> {
    check_order(alpha)?;
    let lin = Linear::new(f)?;
    let g = *f.grid();
    let values = (0..g.n_steps()).map(|k| left_at(&lin, alpha, g.midpoint(k))).collect::<Result<_>>()?;
    GridFunction::new(g, Layout::Cell, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::quad::{integrate_singular, End, Tolerance};
    use approx::assert_relative_eq;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(1.0, n).unwrap()
    }

    #[test]
    fn power_rules_are_exact() {
        let g = grid(64);
        for alpha in [0.1, 0.3, 0.7] {
            let one = GridFunction::from_nodes(g, |_| 1.0);
            let ir = frac_integral_right(&one, alpha).unwrap();
            let il = frac_integral_left(&one, alpha).unwrap();
            for (k, t) in g.nodes().into_iter().enumerate() {
                assert_relative_eq!(ir.values()[k], (1.0 - t).powf(alpha) / gamma(1.0 + alpha), epsilon = 1e-13);
                assert_relative_eq!(il.values()[k], t.powf(alpha) / gamma(1.0 + alpha), epsilon = 1e-13);
            }
            let dr = frac_derivative_right(&one, alpha).unwrap();
            let dl = frac_derivative_left(&one, alpha).unwrap();
            for k in 0..64 {
                let s = g.midpoint(k);
                assert_relative_eq!(dr.values()[k], (1.0 - s).powf(-alpha) / gamma(1.0 - alpha), max_relative = 1e-12);
                assert_relative_eq!(dl.values()[k], s.powf(-alpha) / gamma(1.0 - alpha), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn zero_maps_to_zero() {
        let z = GridFunction::zeros(grid(16), Layout::Node);
        assert!(frac_integral_right(&z, 0.4).unwrap().values().iter().all(|v| *v == 0.0));
        assert!(frac_derivative_left(&z, 0.4).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_integrand_matches_quadrature_oracle() {
        // ∫_0^1 u · u^{-0.7} du / Γ(0.3) by substitution-based adaptive quadrature.
        let oracle = integrate_singular(|u: f64| u * u.powf(-0.7), 0.0, 1.0, End::Left, -0.7, Tolerance::default())
            .unwrap()
            .value
            / gamma(0.3);
        let f = GridFunction::from_nodes(grid(32), |u| u);
        let v = frac_integral_right(&f, 0.3).unwrap().values()[0];
        assert_relative_eq!(v, oracle, max_relative = 1e-12);
    }

    #[test]
    fn marchaud_of_power_is_constant() {
        // D^α_{T−}(T−u)^α = Γ(1+α).
        let alpha = 0.3;
        let f = GridFunction::from_nodes(grid(1024), |u| (1.0 - u).powf(alpha));
        let d = frac_derivative_right(&f, alpha).unwrap();
        for k in (0..900).step_by(50) {
            assert_relative_eq!(d.values()[k], gamma(1.0 + alpha), max_relative = 2e-3);
        }
    }

    #[test]
    fn rejects_bad_order_and_layout() {
        let f = GridFunction::from_nodes(grid(8), |u| u);
        assert!(frac_integral_right(&f, 0.0).is_err());
        assert!(frac_derivative_left(&f, 1.0).is_err());
        let c = GridFunction::from_cells(grid(8), |u| u);
        assert!(frac_integral_left(&c, 0.5).is_err());
    }
}
