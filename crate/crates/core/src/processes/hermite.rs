//! Pointwise transforms of a latent linear process and Hermite expansions
//! of functions of a standard normal variable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{GaussHermite, NormalQuadrature};

/// Probabilists' Hermite polynomials `H_0..=H_q` at `x`, by
/// `H_{q+1} = x H_q - q H_{q-1}`.
pub fn hermite_values(x: f64, q: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(q + 1);
    out.push(1.0);
    if q >= 1 {
        out.push(x);
    }
    for k in 1..q {
        let next = x * out[k] - k as f64 * out[k - 1];
        out.push(next);
    }
    out
}

/// `phi` applied to the latent linear process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Abs,
    /// `sign(y) |y|^exponent`, Hölder with that exponent.
    SignedPower { exponent: f64 },
    Square,
    Cube,
    Tanh,
    /// `sum_{q >= 1} c_q H_q(y)` with `coeffs[q - 1] = c_q`.
    HermiteSeries { coeffs: Vec<f64> },
}

impl Transform {
    pub fn validate(&self) -> Result<()> {
        match self {
            Transform::SignedPower { exponent } if !(*exponent > 0.0 && *exponent <= 1.0) => Err(
                Error::InvalidCoefficients(format!("signed power exponent must lie in (0, 1], got {exponent}")),
            ),
            Transform::HermiteSeries { coeffs } if coeffs.iter().any(|c| !c.is_finite()) => {
                Err(Error::InvalidCoefficients("Hermite coefficients must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn apply(&self, y: f64) -> f64 {
        match self {
            Transform::Identity => y,
            Transform::Abs => y.abs(),
            Transform::SignedPower { exponent } => y.signum() * y.abs().powf(*exponent),
            Transform::Square => y * y,
            Transform::Cube => y * y * y,
            Transform::Tanh => y.tanh(),
            Transform::HermiteSeries { coeffs } => {
                let (mut h_prev, mut h) = (1.0, y);
                let mut acc = 0.0;
                for (q, c) in coeffs.iter().enumerate() {
                    acc += c * h;
                    let next = y * h - (q + 1) as f64 * h_prev;
                    h_prev = h;
                    h = next;
                }
                acc
            }
        }
    }

    /// Hölder exponent and constant, when the transform is globally Hölder.
    pub fn hoelder(&self) -> Option<(f64, f64)> {
        match self {
            Transform::Identity | Transform::Abs | Transform::Tanh => Some((1.0, 1.0)),
            Transform::SignedPower { exponent } => Some((*exponent, 2f64.powf(1.0 - exponent))),
            _ => None,
        }
    }

    /// Points where the transform is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            Transform::Abs | Transform::SignedPower { .. } => vec![0.0],
            _ => Vec::new(),
        }
    }

    /// `E phi(sd * Z)^k` by quadrature.
    pub fn gaussian_moment(&self, sd: f64, k: u32) -> f64 {
        let rule = if matches!(self, Transform::SignedPower { .. }) {
            NormalQuadrature::graded(30)
        } else {
            NormalQuadrature::default()
        };
        rule.expect(0.0, sd, &self.kinks(), |y| self.apply(y).powi(k as i32))
    }
}

/// Hermite coefficients `c_q = E[phi(Y) H_q(Y)] / q!`, `q = 1..=Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteExpansion {
    /// `E phi(Y)`; the expansion itself starts at `q = 1`.
    pub mean: f64,
    pub coefficients: Vec<f64>,
    /// Partial sums of `q! c_q^2`; their limit is `Var phi(Y)`.
    pub variance_partial_sums: Vec<f64>,
    /// Partial sums of `sqrt(q q!) |c_q|`.
    pub summability_partial_sums: Vec<f64>,
    pub variance: f64,
}

impl HermiteExpansion {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficient(&self, q: usize) -> f64 {
        if q == 0 {
            self.mean
        } else {
            self.coefficients.get(q - 1).copied().unwrap_or(0.0)
        }
    }

    /// Share of `Var phi(Y)` captured by the first `Q` terms.
    pub fn captured_variance(&self) -> f64 {
        match self.variance_partial_sums.last() {
            Some(s) if self.variance > 0.0 => s / self.variance,
            _ => 1.0,
        }
    }
}

/// Expands `phi` in Hermite polynomials up to order `q_max` using the
/// order-64 Gauss-Hermite rule. `kinks` switches to the piecewise rule.
pub fn hermite_expand<F: Fn(f64) -> f64>(phi: F, q_max: usize, kinks: &[f64]) -> Result<HermiteExpansion> {
    if q_max == 0 {
        return Err(Error::InvalidParameter("expansion order must be at least 1".into()));
    }
    // square-integrability: the mass of phi^2 beyond |y| = 10 must be negligible
    let wide = NormalQuadrature::graded(8);
    let narrow = NormalQuadrature {
        half_width: 10.0,
        ..wide
    };
    let second_wide = wide.expect(0.0, 1.0, kinks, |y| phi(y).powi(2));
    let second_narrow = narrow.expect(0.0, 1.0, kinks, |y| phi(y).powi(2));
    if !second_wide.is_finite() || (second_wide - second_narrow).abs() > 1e-8 * second_wide.abs().max(1.0) {
        return Err(Error::NonSquareIntegrable(format!(
            "E phi^2 does not settle: {second_narrow:e} on |y| <= 10, {second_wide:e} on |y| <= 14"
        )));
    }

    let projections: Vec<f64> = if kinks.is_empty() {
        let gh = GaussHermite::order64();
        let mut acc = vec![0.0; q_max + 1];
        for (x, w) in gh.nodes().iter().zip(gh.weights()) {
            let y = std::f64::consts::SQRT_2 * x;
            let fy = phi(y);
            for (a, h) in acc.iter_mut().zip(hermite_values(y, q_max)) {
                *a += w * fy * h;
            }
        }
        acc.iter().map(|a| a / std::f64::consts::PI.sqrt()).collect()
    } else {
        (0..=q_max)
            .map(|q| wide.expect(0.0, 1.0, kinks, |y| phi(y) * hermite_values(y, q)[q]))
            .collect()
    };

    let mean = projections[0];
    let mut factorial = 1.0;
    let mut coefficients = Vec::with_capacity(q_max);
    let mut variance_partial_sums = Vec::with_capacity(q_max);
    let mut summability_partial_sums = Vec::with_capacity(q_max);
    let (mut var_acc, mut sum_acc) = (0.0, 0.0);
    for (q, proj) in projections.iter().enumerate().skip(1) {
        factorial *= q as f64;
        let c = proj / factorial;
        var_acc += factorial * c * c;
        sum_acc += (q as f64 * factorial).sqrt() * c.abs();
        coefficients.push(c);
        variance_partial_sums.push(var_acc);
        summability_partial_sums.push(sum_acc);
    }
    Ok(HermiteExpansion {
        mean,
        coefficients,
        variance_partial_sums,
        summability_partial_sums,
        variance: second_wide - mean * mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Expands a polynomial given by coefficients in powers of x into the
    /// Hermite basis by repeatedly peeling off the leading term.
    fn hermite_oracle(mut power_coeffs: Vec<f64>) -> Vec<f64> {
        let deg = power_coeffs.len() - 1;
        let mut out = vec![0.0; deg + 1];
        for q in (0..=deg).rev() {
            let c = power_coeffs[q];
            out[q] = c;
            // subtract c * H_q expressed in powers of x
            let mut h = vec![vec![1.0]];
            h.push(vec![0.0, 1.0]);
            for k in 1..q.max(1) {
                let mut next = vec![0.0; k + 2];
                for (i, v) in h[k].iter().enumerate() {
                    next[i + 1] += v;
                }
                for (i, v) in h[k - 1].iter().enumerate() {
                    next[i] -= k as f64 * v;
                }
                h.push(next);
            }
            for (i, v) in h[q].iter().enumerate() {
                power_coeffs[i] -= c * v;
            }
        }
        out
    }

    #[test]
    fn recursion_matches_closed_forms() {
        let x: f64 = 1.7;
        let h = hermite_values(x, 4);
        assert_eq!(h[2], x * x - 1.0);
        assert!((h[3] - (x.powi(3) - 3.0 * x)).abs() < 1e-14);
        assert!((h[4] - (x.powi(4) - 6.0 * x * x + 3.0)).abs() < 1e-13);
    }

    #[test]
    fn identity_expansion() {
        let e = hermite_expand(|x| x, 6, &[]).unwrap();
        assert!((e.coefficient(1) - 1.0).abs() < 1e-13);
        for q in 2..=6 {
            assert!(e.coefficient(q).abs() < 1e-13);
        }
    }

    #[test]
    fn cube_and_square_expansions_match_oracle() {
        let cube = hermite_oracle(vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(cube, vec![0.0, 3.0, 0.0, 1.0]);
        let e = hermite_expand(|x| x * x * x, 6, &[]).unwrap();
        for (q, want) in cube.iter().enumerate().skip(1) {
            assert!((e.coefficient(q) - want).abs() < 1e-12, "q={q}");
        }
        let sq = hermite_oracle(vec![-1.0, 0.0, 1.0]);
        assert_eq!(sq, vec![0.0, 0.0, 1.0]);
        let e = hermite_expand(|x| x * x - 1.0, 6, &[]).unwrap();
        assert!((e.coefficient(2) - 1.0).abs() < 1e-12);
        assert!(e.mean.abs() < 1e-12);
        for q in [1, 3, 4, 5, 6] {
            assert!(e.coefficient(q).abs() < 1e-12);
        }
        assert!((e.captured_variance() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn abs_expansion_partial_sums_stabilise() {
        let e = hermite_expand(f64::abs, 20, &[0.0]).unwrap();
        assert!(e.coefficient(1).abs() < 1e-12);
        // E|Y| H_2(Y) / 2 = sqrt(2/pi) / 2
        assert!((e.coefficient(2) - (2.0 / std::f64::consts::PI).sqrt() / 2.0).abs() < 1e-10);
        let s = &e.variance_partial_sums;
        assert!(s.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        assert!(e.captured_variance() > 0.97 && e.captured_variance() <= 1.0 + 1e-12);
    }

    #[test]
    fn non_square_integrable_is_rejected() {
        assert!(matches!(
            hermite_expand(|x| (x * x / 4.0).exp(), 4, &[]),
            Err(Error::NonSquareIntegrable(_))
        ));
    }

    #[test]
    fn series_transform_evaluates_hermite_sum() {
        let t = Transform::HermiteSeries {
            coeffs: vec![3.0, 0.0, 1.0],
        };
        for y in [-2.0, 0.3, 1.9] {
            assert!((t.apply(y) - y * y * y).abs() < 1e-12);
        }
    }
}
