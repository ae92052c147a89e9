//! Backward doubly stochastic equations driven by fractional noise.
//!
//! The equation is conjugated by the Girsanov frame into a BSDE that is
//! solved separately for every frozen fBm path by a regression sweep over a
//! sub-ensemble of Brownian paths. The value at node `m` is obtained by
//! re-solving on `A_{t_m} ω`, which only changes the ε factors of the driver.

mod diagnostics;
mod forward;
mod linear;
mod regression;
mod solver;

pub use diagnostics::*;
pub use forward::{brownian_increments, tangent_flow, CoeffKind, Coefficients, WEnsemble};
pub use linear::*;
pub use regression::{monomials, RegressionPlan, MAX_CONDITION};
pub use solver::*;

pub(crate) use forward::split_call;

use crate::rng::{stream, Purpose};
use crate::{Error, Result};
use rand::Rng;

/// Registered drivers `f(t, x, y, z)`; `Σz` sums the coordinates of `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriverKind {
    Zero,
    /// `f ≡ a`.
    Constant(f64),
    /// `f = f1 Σx + f2 y + f3 Σz`.
    Linear {
        f1: f64,
        f2: f64,
        f3: f64,
    },
    /// `f = a sin y + f3 Σz`.
    Sine {
        a: f64,
        f3: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Driver {
    pub kind: DriverKind,
}

impl Driver {
    pub fn new(kind: DriverKind) -> Self {
        Self { kind }
    }

    /// `zero`, `const:a`, `linear:f1,f2,f3` or `sine:a,f3`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, args) = split_call(text)?;
        let kind = match (name, args.as_slice()) {
            ("zero", []) => DriverKind::Zero,
            ("const", [a]) => DriverKind::Constant(*a),
            ("linear", [f1, f2, f3]) => DriverKind::Linear { f1: *f1, f2: *f2, f3: *f3 },
            ("sine", [a, f3]) => DriverKind::Sine { a: *a, f3: *f3 },
            _ => return Err(Error::InvalidArgument(format!("unknown driver `{text}`"))),
        };
        Ok(Self { kind })
    }

    pub fn eval(&self, _t: f64, x: &[f64], y: f64, z: &[f64]) -> f64 {
        match self.kind {
            DriverKind::Zero => 0.0,
            DriverKind::Constant(a) => a,
            DriverKind::Linear { f1, f2, f3 } => f1 * x.iter().sum::<f64>() + f2 * y + f3 * z.iter().sum::<f64>(),
            DriverKind::Sine { a, f3 } => a * y.sin() + f3 * z.iter().sum::<f64>(),
        }
    }

    /// `(∂_x f, ∂_y f, ∂_z f)` in one dimension.
    pub fn partials(&self, _t: f64, _x: f64, y: f64, _z: f64) -> (f64, f64, f64) {
        match self.kind {
            DriverKind::Zero | DriverKind::Constant(_) => (0.0, 0.0, 0.0),
            DriverKind::Linear { f1, f2, f3 } => (f1, f2, f3),
            DriverKind::Sine { a, f3 } => (0.0, a * y.cos(), f3),
        }
    }

    /// Lipschitz constant in `(y, z)` for `d` coordinates of `z`.
    pub fn lipschitz(&self, d: usize) -> f64 {
        let root = (d as f64).sqrt();
        match self.kind {
            DriverKind::Zero | DriverKind::Constant(_) => 0.0,
            DriverKind::Linear { f2, f3, .. } => f2.abs().max(f3.abs() * root),
            DriverKind::Sine { a, f3 } => a.abs().max(f3.abs() * root),
        }
    }

    /// Checks `|f(y₁,z₁) − f(y₂,z₂)| ≤ C(|y₁−y₂| + |z₁−z₂|)` on random samples.
    pub fn spot_check(&self, d: usize, seed: u64, samples: usize) -> Result<()> {
        let c = self.lipschitz(d);
        let mut rng = stream(seed, Purpose::Auxiliary, 2);
        for _ in 0..samples {
            let t = rng.random_range(0.0..1.0);
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
            let (y1, y2) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let z1: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
            let z2: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
            let dz = z1.iter().zip(&z2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let lhs = (self.eval(t, &x, y1, &z1) - self.eval(t, &x, y2, &z2)).abs();
            if lhs > c * ((y1 - y2).abs() + dz) * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::Hypothesis(format!("driver {:?} breaks its Lipschitz constant", self.kind)));
            }
        }
        Ok(())
    }
}

/// Terminal values `Φ(X_0)` with `Φ(x) = c0 + c1 Σx + c2 |x|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terminal {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Terminal {
    pub fn constant(c: f64) -> Self {
        Self { c0: c, c1: 0.0, c2: 0.0 }
    }

    pub fn poly(c0: f64, c1: f64, c2: f64) -> Self {
        Self { c0, c1, c2 }
    }

    /// `const:c` or `poly:c0,c1,c2`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, args) = split_call(text)?;
        match (name, args.as_slice()) {
            ("const", [c]) => Ok(Self::constant(*c)),
            ("poly", [a, b, c]) => Ok(Self::poly(*a, *b, *c)),
            _ => Err(Error::InvalidArgument(format!("unknown terminal `{text}`"))),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.c0 + self.c1 * x.iter().sum::<f64>() + self.c2 * x.iter().map(|v| v * v).sum::<f64>()
    }

    /// `Φ'` in one dimension.
    pub fn derivative(&self, x: f64) -> f64 {
        self.c1 + 2.0 * self.c2 * x
    }
}

impl std::fmt::Display for Driver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            DriverKind::Zero => write!(f, "zero"),
            DriverKind::Constant(a) => write!(f, "const:{a}"),
            DriverKind::Linear { f1, f2, f3 } => write!(f, "linear:{f1},{f2},{f3}"),
            DriverKind::Sine { a, f3 } => write!(f, "sine:{a},{f3}"),
        }
    }
}

impl std::fmt::Display for Terminal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "poly:{},{},{}", self.c0, self.c1, self.c2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_entries_print_as_they_parse() {
        for t in ["zero", "const:0.5", "linear:0.3,-0.5,0.2", "sine:0.7,0.4"] {
            assert_eq!(Driver::parse(t).unwrap().to_string(), t);
        }
        assert_eq!(Terminal::parse("poly:1,-2,0.5").unwrap().to_string(), "poly:1,-2,0.5");
        for t in ["affine:0.2,1", "ou:0.5,0.7", "sine-vol:0.1,0.6,0.2", "heat2:0.7", "corr2:1,0.3"] {
            assert_eq!(Coefficients::parse(t).unwrap().to_string(), t);
        }
    }

    #[test]
    fn driver_catalog() {
        for t in ["zero", "const:0.5", "linear:0.3,-0.5,0.2", "sine:0.7,0.4"] {
            let f = Driver::parse(t).unwrap();
            f.spot_check(1, 3, 400).unwrap();
            f.spot_check(2, 3, 400).unwrap();
        }
        assert!(Driver::parse("linear:1").is_err());
        assert!(Driver::parse("cubic:1").is_err());
        let f = Driver::parse("linear:1,2,3").unwrap();
        assert_eq!(f.eval(0.0, &[1.0, 1.0], 1.0, &[1.0, -1.0]), 4.0);
    }

    #[test]
    fn terminal_catalog() {
        let t = Terminal::parse("poly:1,2,3").unwrap();
        assert_eq!(t.eval(&[1.0]), 6.0);
        assert_eq!(t.eval(&[1.0, 2.0]), 1.0 + 6.0 + 15.0);
        assert_eq!(t.derivative(1.0), 8.0);
        assert_eq!(Terminal::parse("const:2").unwrap().eval(&[5.0]), 2.0);
        assert!(Terminal::parse("poly:1,2").is_err());
    }
}
