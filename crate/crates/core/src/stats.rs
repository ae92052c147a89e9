//! Monte Carlo summaries and small regression fits.

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    /// Summary of i.i.d. samples.
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, sd: f64::NAN, se: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        let sd = var.sqrt();
        Self { mean, sd, se: sd / (n as f64).sqrt(), n }
    }

    /// Summary of `a - b` for paired samples.
    pub fn paired(a: &[f64], b: &[f64]) -> Self {
        assert_eq!(a.len(), b.len(), "paired samples need equal lengths");
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        Self::of(&d)
    }

    /// `mean / se`, or 0 when both vanish.
    pub fn z(&self) -> f64 {
        z_score(self.mean, self.se)
    }
}

/// `diff / se` with the convention `0/0 = 0`.
pub fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// Sample skewness and excess kurtosis with their large-sample standard errors.
#[derive(Debug, Clone, Copy)]
pub struct ShapeMoments {
    pub skewness: f64,
    pub skewness_se: f64,
    pub excess_kurtosis: f64,
    pub kurtosis_se: f64,
}

pub fn shape_moments(xs: &[f64]) -> ShapeMoments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    ShapeMoments {
        skewness: m3 / m2.powf(1.5),
        skewness_se: (6.0 / n).sqrt(),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        kurtosis_se: (24.0 / n).sqrt(),
    }
}

/// Ordinary least squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_se: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    LineFit { intercept, slope, slope_se }
}

/// Empirical order from errors measured at successive refinements by `ratio`.
pub fn convergence_order(coarse_err: f64, fine_err: f64, ratio: f64) -> f64 {
    (coarse_err / fine_err).ln() / ratio.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mean_and_se_of_known_sample() {
        let s = MeanSe::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_relative_eq!(s.mean, 2.5);
        assert_relative_eq!(s.sd, (5.0f64 / 3.0).sqrt());
        assert_relative_eq!(s.se, s.sd / 2.0);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 0.25 * v).collect();
        let f = fit_line(&x, &y);
        assert_relative_eq!(f.slope, -0.25, epsilon = 1e-14);
        assert_relative_eq!(f.intercept, 1.5, epsilon = 1e-14);
    }

    #[test]
    fn order_of_halving_errors() {
        assert_relative_eq!(convergence_order(0.04, 0.01, 2.0), 2.0, epsilon = 1e-12);
    }
}
