//! Small statistics toolbox: percentiles, Pearson correlation, and linear
//! regression with pointwise confidence bounds for the mean response.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};

/// Percentile with linear interpolation between order statistics.
/// `values` must be sorted ascending; `p` in [0, 100].
pub fn percentile_sorted(values: &[f64], p: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let rank = (p / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = rank as usize;
    let frac = rank - lo as f64;
    if lo + 1 < n {
        values[lo] * (1.0 - frac) + values[lo + 1] * frac
    } else {
        values[n - 1]
    }
}

/// Sorts a copy and takes the interpolated percentile.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite values"));
    percentile_sorted(&sorted, p)
}

pub fn median(values: &[f64]) -> f64 {
    percentile(values, 50.0)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation (divide by N).
pub fn std_pop(values: &[f64]) -> f64 {
    let mu = mean(values);
    let var = values.iter().map(|&v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64;
    libm::sqrt(var)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> CoreResult<f64> {
    if xs.len() != ys.len() {
        return Err(CoreError::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    if xs.len() < 3 {
        return Err(CoreError::InvalidConfig("pearson needs at least 3 points".into()));
    }
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CoreError::ConstantInput);
    }
    Ok(sxy / libm::sqrt(sxx * syy))
}

/// Least-squares line with pointwise confidence band for the mean response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinFit {
    pub slope: f64,
    pub intercept: f64,
    /// Per input x: (lower, upper) bound of the mean response.
    pub band: Vec<(f64, f64)>,
}

/// Fits `ys ~ slope * xs + intercept` and computes the confidence band at
/// level `p` (e.g. 0.95) using the t-distribution with `m - 2` degrees of
/// freedom.
pub fn linfit_bounds(xs: &[f64], ys: &[f64], p: f64) -> CoreResult<LinFit> {
    if xs.len() != ys.len() {
        return Err(CoreError::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    let m = xs.len();
    if m < 3 {
        return Err(CoreError::InvalidConfig("linear fit needs at least 3 points".into()));
    }
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(CoreError::ConstantInput);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;

    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let df = (m - 2) as f64;
    let sigma = libm::sqrt((sse / df).max(0.0));
    let t_crit = student_t_quantile(1.0 - (1.0 - p) / 2.0, df);

    let band = xs
        .iter()
        .map(|&x| {
            let fit = intercept + slope * x;
            let half = t_crit * sigma * libm::sqrt(1.0 / m as f64 + (x - mx) * (x - mx) / sxx);
            (fit - half, fit + half)
        })
        .collect();
    Ok(LinFit { slope, intercept, band })
}

/// Quantile of the Student t distribution, by inverting the regularized
/// incomplete beta representation of its CDF.
pub fn student_t_quantile(prob: f64, df: f64) -> f64 {
    assert!(prob > 0.0 && prob < 1.0 && df > 0.0);
    if (prob - 0.5).abs() < 1e-15 {
        return 0.0;
    }
    if prob < 0.5 {
        return -student_t_quantile(1.0 - prob, df);
    }
    // For t >= 0: F(t) = 1 - 0.5 I_x(df/2, 1/2) with x = df / (df + t^2).
    let target = 2.0 * (1.0 - prob);
    let x = inv_betai(0.5 * df, 0.5, target);
    libm::sqrt(df * (1.0 - x) / x)
}

/// Regularized incomplete beta function I_x(a, b).
pub fn betai(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_bt = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
        + a * libm::log(x)
        + b * libm::log(1.0 - x);
    let bt = libm::exp(ln_bt);
    if x < (a + 1.0) / (a + b + 2.0) {
        bt * betacf(a, b, x) / a
    } else {
        1.0 - bt * betacf(b, a, 1.0 - x) / b
    }
}

/// Continued-fraction evaluation for the incomplete beta (modified Lentz).
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m_f = m as f64;
        let m2 = 2.0 * m_f;
        let aa = m_f * (b - m_f) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m_f) * (qab + m_f) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Inverts I_x(a, b) = target for x by bisection.
fn inv_betai(a: f64, b: f64, target: f64) -> f64 {
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if betai(a, b, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use alloc::vec;

    #[test]
    fn percentile_interpolates_linearly() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 100.0), 4.0);
        assert!((percentile(&v, 50.0) - 2.5).abs() < 1e-15);
        assert!((percentile(&v, 25.0) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn pearson_detects_perfect_linear_dependence() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|&x| 2.0 * x + 1.0).collect();
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = xs.iter().map(|&x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_hand_value() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [1.0, 3.0, 2.0, 4.0];
        assert!((pearson(&xs, &ys).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pearson_is_affine_invariant() {
        let xs = [0.3, 1.7, 2.9, 5.1, 6.0];
        let ys = [2.0, 1.0, 4.0, 3.5, 7.0];
        let r = pearson(&xs, &ys).unwrap();
        let xs2: Vec<f64> = xs.iter().map(|&x| 3.0 * x - 7.0).collect();
        assert!((pearson(&xs2, &ys).unwrap() - r).abs() < 1e-12);
        let xs3: Vec<f64> = xs.iter().map(|&x| -2.0 * x + 1.0).collect();
        assert!((pearson(&xs3, &ys).unwrap() + r).abs() < 1e-12);
    }

    #[test]
    fn pearson_rejects_constant_input() {
        let xs = [1.0, 1.0, 1.0];
        let ys = [1.0, 2.0, 3.0];
        assert!(matches!(pearson(&xs, &ys), Err(CoreError::ConstantInput)));
    }

    #[test]
    fn exact_line_has_zero_band_width() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|&x| 0.5 * x - 1.0).collect();
        let fit = linfit_bounds(&xs, &ys, 0.95).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!((fit.intercept + 1.0).abs() < 1e-12);
        for (lo, hi) in fit.band {
            assert!((hi - lo).abs() < 1e-10);
        }
    }

    #[test]
    fn band_is_narrowest_at_the_mean_x() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [0.1, 1.3, 1.9, 3.3, 3.8];
        let fit = linfit_bounds(&xs, &ys, 0.95).unwrap();
        let widths: Vec<f64> = fit.band.iter().map(|(lo, hi)| hi - lo).collect();
        // Mean of xs is 2.0, index 2.
        for (i, &w) in widths.iter().enumerate() {
            assert!(w >= widths[2] - 1e-12, "width at {i} below the center width");
        }
    }

    #[test]
    fn t_quantiles_match_table_values() {
        // Standard two-sided 95% critical values.
        for (df, expect) in [(3.0, 3.182446), (5.0, 2.570582), (10.0, 2.228139), (30.0, 2.042272)] {
            let t = student_t_quantile(0.975, df);
            assert!((t - expect).abs() < 1e-5, "df {df}: {t} vs {expect}");
        }
        assert_eq!(student_t_quantile(0.5, 7.0), 0.0);
        assert!((student_t_quantile(0.025, 10.0) + 2.228139).abs() < 1e-5);
    }

    #[test]
    fn betai_endpoint_behaviour() {
        assert_eq!(betai(2.0, 3.0, 0.0), 0.0);
        assert_eq!(betai(2.0, 3.0, 1.0), 1.0);
        // I_x(1, 1) = x.
        for &x in &[0.1, 0.5, 0.9] {
            assert!((betai(1.0, 1.0, x) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn std_pop_uses_the_population_convention() {
        let v = vec![1.0, 2.0, 3.0, 4.0];
        // Population variance of 1..4 is 1.25.
        assert!((std_pop(&v) - libm::sqrt(1.25)).abs() < 1e-14);
    }
}
