//! Goodness-of-fit distances against a continuous reference law.

use crate::numeric::normal_cdf;

/// Kolmogorov-Smirnov distance `sup |F_n - F|`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Anderson-Darling statistic `A^2`.
pub fn anderson_darling<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let clamp = |p: f64| p.clamp(1e-300, 1.0 - 1e-16);
    let s: f64 = (0..n)
        .map(|i| {
            let lo = clamp(cdf(xs[i]));
            let hi = clamp(cdf(xs[n - 1 - i]));
            (2 * i + 1) as f64 * (lo.ln() + (1.0 - hi).ln())
        })
        .sum();
    -(n as f64) - s / n as f64
}

/// CDF of `N(0, variance)`.
pub fn normal_cdf_with_variance(variance: f64) -> impl Fn(f64) -> f64 {
    let sd = variance.sqrt();
    move |x| normal_cdf(x / sd)
}

/// Asymptotic 1 - alpha quantile of `sqrt(n) D_n`: `sqrt(-ln(alpha/2)/2)`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}
