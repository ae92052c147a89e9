//! Adaptive Gauss–Kronrod quadrature and power substitutions for integrable
//! endpoint singularities.

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_64, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Stopping rule for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel, max_intervals: 400 }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-12, 1e-10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// One 15-point Kronrod rule with the embedded 7-point Gauss error estimate.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Estimate {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let x = h * XGK[k];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    Estimate { value: kronrod * h, error: ((kronrod - gauss) * h).abs() }
}

/// Globally adaptive bisection until the summed error estimate meets `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let first = gk15(&mut f, a, b);
    let mut pieces = vec![(a, b, first)];
    let mut total = first;
    loop {
        if !total.value.is_finite() {
            return Err(Error::Quadrature {
                what: "non-finite integrand".into(),
                value: total.value,
                error: total.error,
            });
        }
        if total.error <= tol.abs.max(tol.rel * total.value.abs()) {
            return Ok(total);
        }
        if pieces.len() >= tol.max_intervals {
            return Err(Error::Quadrature {
                what: format!("interval budget of {} exhausted on [{a}, {b}]", tol.max_intervals),
                value: total.value,
                error: total.error,
            });
        }
        let (k, _) = pieces.iter().enumerate().max_by(|x, y| x.1 .2.error.total_cmp(&y.1 .2.error)).expect("non-empty");
        let (lo, hi, pieces_removed) = pieces.swap_remove(k);
        let mid = 0.5 * (lo + hi);
        let (l, r) = (gk15(&mut f, lo, mid), gk15(&mut f, mid, hi));
        pieces.push((lo, mid, l));
        pieces.push((mid, hi, r));
        if pieces.len() % 64 == 0 {
            total = pieces.iter().fold(Estimate { value: 0.0, error: 0.0 }, |acc, p| Estimate {
                value: acc.value + p.2.value,
                error: acc.error + p.2.error,
            });
        } else {
            let old = pieces_removed;
            total.value += l.value + r.value - old.value;
            total.error += l.error + r.error - old.error;
        }
    }
}

/// Which endpoint carries the singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Left,
    Right,
}

/// `∫_a^b f` for `f ~ |s − endpoint|^exponent` near one end (`exponent > −1`).
///
/// Substitutes `|s − endpoint| = (b − a)·v^{1/(1+exponent)}`, which turns the
/// leading power into a constant.
pub fn integrate_singular<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    end: End,
    exponent: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    integrate_singular_offset(|s, _| f(s), a, b, end, exponent, tol)
}

/// As [`integrate_singular`], but `f(s, d)` also receives the exact distance
/// `d = |s − endpoint|`, which cannot be recovered from `s` without cancellation.
pub fn integrate_singular_offset<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    end: End,
    exponent: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    if exponent <= -1.0 {
        return Err(Error::Divergent(format!("endpoint exponent {exponent} is not integrable")));
    }
    let len = b - a;
    let p = 1.0 / (1.0 + exponent);
    let g = move |v: f64| {
        if v <= 0.0 {
            return 0.0;
        }
        let d = len * v.powf(p);
        let s = match end {
            End::Left => a + d,
            End::Right => b - d,
        };
        f(s, d) * len * p * v.powf(p - 1.0)
    };
    integrate(g, 0.0, 1.0, tol)
}

/// Both endpoints singular: split at the midpoint. `f(s, b − s)` gets the
/// distance to the right end computed without cancellation.
pub fn integrate_two_sided<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    left_exponent: f64,
    right_exponent: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    let m = 0.5 * (a + b);
    let l = integrate_singular_offset(|s, _| f(s, b - s), a, m, End::Left, left_exponent, tol)?;
    let r = integrate_singular_offset(&mut f, m, b, End::Right, right_exponent, tol)?;
    Ok(Estimate { value: l.value + r.value, error: l.error + r.error })
}
