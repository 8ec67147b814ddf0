//! Least-squares helpers shared by the diagnostic modules: straight-line
//! fits with confidence information and geometric-decay fits.

/// Ordinary least squares `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard error of the slope.
    pub slope_se: f64,
    pub n: usize,
}

impl LineFit {
    /// Half-width of the ~95% confidence interval for the slope
    /// (2·SE; adequate at the sample sizes used here).
    pub fn slope_ci95(&self) -> f64 {
        2.0 * self.slope_se
    }
}

/// Fit a straight line through `(x, y)` pairs.
pub fn line_fit(points: &[(f64, f64)]) -> Option<LineFit> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let slope_se = if n > 2 {
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
        slope_se,
        n,
    })
}

/// Geometric fit `d_n ≈ B·ϑⁿ` through positive values, via the log-line fit.
#[derive(Debug, Clone, Copy)]
pub struct GeometricFit {
    pub theta: f64,
    pub amplitude: f64,
    pub r_squared: f64,
}

/// Fit `values[i] ≈ B·ϑ^(ns[i])`, ignoring non-positive entries.
pub fn geometric_fit(ns: &[f64], values: &[f64]) -> Option<GeometricFit> {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > 0.0 && v.is_finite())
        .map(|(&n, &v)| (n, v.ln()))
        .collect();
    let fit = line_fit(&pts)?;
    Some(GeometricFit {
        theta: fit.slope.exp(),
        amplitude: fit.intercept.exp(),
        r_squared: fit.r_squared,
    })
}

/// Sample mean and (unbiased) variance.
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn recovers_a_line() {
        let pts: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 3.0 * i as f64 - 1.0)).collect();
        let fit = line_fit(&pts).unwrap();
        assert_abs_diff_eq!(fit.slope, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn recovers_geometric_decay() {
        let ns: Vec<f64> = (1..15).map(|n| n as f64).collect();
        let vals: Vec<f64> = ns.iter().map(|n| 7.0 * 0.6f64.powf(*n)).collect();
        let fit = geometric_fit(&ns, &vals).unwrap();
        assert_abs_diff_eq!(fit.theta, 0.6, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.amplitude, 7.0, epsilon = 1e-8);
    }

    #[test]
    fn degenerate_inputs_yield_none() {
        assert!(line_fit(&[(1.0, 2.0)]).is_none());
        assert!(line_fit(&[(1.0, 2.0), (1.0, 3.0)]).is_none());
    }
}
