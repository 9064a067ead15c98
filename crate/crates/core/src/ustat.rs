//! Degree-two U-statistics over block statistics, the Hoeffding
//! decomposition of the kernel, and the covariance `gamma_n^2`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{CenteringMethod, LimitLaw};
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, pairwise_sum, two_sided_p_value, CompensatedSum};
use crate::quadrature::NormalQuadrature;

/// Estimates of `gamma^2` at or below this are treated as zero.
pub const GAMMA_SQ_TOLERANCE: f64 = 1e-12;

/// A symmetric kernel `h: R^2 -> R`.
pub trait Kernel: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn eval(&self, x: f64, y: f64) -> f64;

    /// `None` if `h` is not globally Lipschitz.
    fn lipschitz_constant(&self) -> Option<f64>;

    /// Constant `C` of `|h(x,y)| <= C (1 + |x| + |y|)`, if it holds.
    fn growth_constant(&self) -> Option<f64>;

    fn shift_invariant(&self) -> bool {
        false
    }

    /// `k(d)` when `h(x, y) = k(x - y)` with `k` even.
    fn difference_profile(&self, _d: f64) -> Option<f64> {
        None
    }

    /// Points where `k` is not smooth (difference kernels only).
    fn difference_kinks(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Points `y` where `y -> h(x, y)` is not smooth.
    fn kinks(&self, _x: f64) -> Vec<f64> {
        Vec::new()
    }

    /// Degree `r` with `h(s x, s y) = s^r h(x, y)` for `s > 0`, if any.
    fn homogeneity_degree(&self) -> Option<f64> {
        None
    }
}

/// `|x - y|`, Gini's mean difference kernel.
#[derive(Debug, Clone, Copy)]
pub struct AbsDifference;

impl Kernel for AbsDifference {
    fn name(&self) -> String {
        "gini".into()
    }
    fn eval(&self, x: f64, y: f64) -> f64 {
        (x - y).abs()
    }
    fn lipschitz_constant(&self) -> Option<f64> {
        Some(1.0)
    }
    fn growth_constant(&self) -> Option<f64> {
        Some(1.0)
    }
    fn shift_invariant(&self) -> bool {
        true
    }
    fn difference_profile(&self, d: f64) -> Option<f64> {
        Some(d.abs())
    }
    fn difference_kinks(&self) -> Vec<f64> {
        vec![0.0]
    }
    fn kinks(&self, x: f64) -> Vec<f64> {
        vec![x]
    }
    fn homogeneity_degree(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// `x + y`, whose U-statistic is twice the sample mean.
#[derive(Debug, Clone, Copy)]
pub struct SumKernel;

impl Kernel for SumKernel {
    fn name(&self) -> String {
        "sum".into()
    }
    fn eval(&self, x: f64, y: f64) -> f64 {
        x + y
    }
    fn lipschitz_constant(&self) -> Option<f64> {
        Some(1.0)
    }
    fn growth_constant(&self) -> Option<f64> {
        Some(1.0)
    }
    fn homogeneity_degree(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// `x * y`; degenerate for centred inputs.
#[derive(Debug, Clone, Copy)]
pub struct ProductKernel;

impl Kernel for ProductKernel {
    fn name(&self) -> String {
        "product".into()
    }
    fn eval(&self, x: f64, y: f64) -> f64 {
        x * y
    }
    fn lipschitz_constant(&self) -> Option<f64> {
        None
    }
    fn growth_constant(&self) -> Option<f64> {
        None
    }
    fn homogeneity_degree(&self) -> Option<f64> {
        Some(2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelPreset {
    Gini,
    Sum,
    Product,
}

impl std::str::FromStr for KernelPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gini" | "abs_diff" => Ok(KernelPreset::Gini),
            "sum" => Ok(KernelPreset::Sum),
            "product" => Ok(KernelPreset::Product),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

/// Shared handle to a kernel.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    kernel: Arc<dyn Kernel>,
    is_gini: bool,
}

/// Outcome of sampled checks of the kernel's structural assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelCheck {
    pub symmetric: bool,
    pub growth_bounded: bool,
    pub shift_invariant: bool,
}

impl KernelSpec {
    pub fn gini() -> Self {
        Self {
            kernel: Arc::new(AbsDifference),
            is_gini: true,
        }
    }

    pub fn preset(preset: KernelPreset) -> Self {
        match preset {
            KernelPreset::Gini => Self::gini(),
            KernelPreset::Sum => Self::custom(Arc::new(SumKernel)),
            KernelPreset::Product => Self::custom(Arc::new(ProductKernel)),
        }
    }

    pub fn custom(kernel: Arc<dyn Kernel>) -> Self {
        Self {
            kernel,
            is_gini: false,
        }
    }

    pub fn name(&self) -> String {
        self.kernel.name()
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.kernel.eval(x, y)
    }

    pub fn kernel(&self) -> &dyn Kernel {
        self.kernel.as_ref()
    }

    pub fn is_gini(&self) -> bool {
        self.is_gini
    }

    pub fn is_difference(&self) -> bool {
        self.kernel.difference_profile(0.0).is_some()
    }

    pub fn lipschitz_constant(&self) -> Option<f64> {
        self.kernel.lipschitz_constant()
    }

    /// Checks symmetry, the linear growth bound and (when claimed) shift
    /// invariance on all pairs and triples drawn from `points`.
    pub fn check_on_samples(&self, points: &[f64]) -> KernelCheck {
        let tol = |v: f64| 1e-12 * (1.0 + v.abs());
        let mut check = KernelCheck {
            symmetric: true,
            growth_bounded: true,
            shift_invariant: true,
        };
        let growth = self.kernel.growth_constant();
        for &x in points {
            for &y in points {
                let hxy = self.eval(x, y);
                if (hxy - self.eval(y, x)).abs() > tol(hxy) {
                    check.symmetric = false;
                }
                match growth {
                    Some(c) if hxy.abs() <= c * (1.0 + x.abs() + y.abs()) + tol(hxy) => {}
                    _ => check.growth_bounded = false,
                }
                if self.kernel.shift_invariant() {
                    for &c in points {
                        if (self.eval(x + c, y + c) - hxy).abs() > 1e-9 * (1.0 + x.abs() + y.abs() + c.abs()) {
                            check.shift_invariant = false;
                        }
                    }
                } else {
                    check.shift_invariant = false;
                }
            }
        }
        check
    }
}

/// Exact double sum over ordered pairs `j != k`, divided by `b (b - 1)`.
/// Rows are summed in parallel and combined by a fixed pairwise tree.
pub fn u_statistic_double_sum(w: &[f64], h: &KernelSpec) -> Result<f64> {
    let b = w.len();
    if b < 2 {
        return Err(Error::TooFewBlocks(b));
    }
    let rows: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|j| {
            let mut acc = CompensatedSum::new();
            for (k, &wk) in w.iter().enumerate() {
                if k != j {
                    acc.add(h.eval(w[j], wk));
                }
            }
            acc.value()
        })
        .collect();
    Ok(pairwise_sum(&rows) / (b as f64 * (b - 1) as f64))
}

/// Gini mean difference in `O(b log b)`:
/// `sum_{j != k} |w_j - w_k| = 2 sum_i (2i - b - 1) w_(i)` over the sorted sample.
pub fn gini_mean_difference(w: &[f64]) -> Result<f64> {
    let b = w.len();
    if b < 2 {
        return Err(Error::TooFewBlocks(b));
    }
    let mut sorted = w.to_vec();
    sorted.sort_by(f64::total_cmp);
    let bf = b as f64;
    let total = compensated_sum(
        sorted
            .iter()
            .enumerate()
            .map(|(i, x)| (2.0 * (i as f64 + 1.0) - bf - 1.0) * x),
    );
    Ok(2.0 * total / (bf * (bf - 1.0)))
}

/// `U_n`; uses the sorted fast path for the Gini kernel.
pub fn u_statistic(w: &[f64], h: &KernelSpec) -> Result<f64> {
    if h.is_gini() {
        gini_mean_difference(w)
    } else {
        u_statistic_double_sum(w, h)
    }
}

/// Law of the entries against which expectations are taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform on the given sample points.
    Empirical { sample: Vec<f64> },
    /// Finite support with probabilities summing to one.
    Discrete { values: Vec<f64>, probs: Vec<f64> },
    Normal { mean: f64, sd: f64 },
}

impl Distribution {
    pub fn standard_normal() -> Self {
        Distribution::Normal { mean: 0.0, sd: 1.0 }
    }

    pub fn bernoulli(p: f64) -> Self {
        Distribution::Discrete {
            values: vec![0.0, 1.0],
            probs: vec![1.0 - p, p],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Distribution::Empirical { sample } if sample.is_empty() => {
                Err(Error::InvalidParameter("empirical distribution needs a sample".into()))
            }
            Distribution::Discrete { values, probs } => {
                if values.len() != probs.len() || values.is_empty() {
                    return Err(Error::InvalidParameter("support and probabilities differ in length".into()));
                }
                if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter("probabilities must be nonnegative and sum to 1".into()));
                }
                Ok(())
            }
            Distribution::Normal { sd, .. } if !(*sd > 0.0) => {
                Err(Error::InvalidParameter(format!("normal sd must be positive, got {sd}")))
            }
            _ => Ok(()),
        }
    }

    /// `E f(W)` by enumeration, quadrature or sample average.
    pub fn expect<F: Fn(f64) -> f64>(&self, kinks: &[f64], f: F) -> f64 {
        match self {
            Distribution::Empirical { sample } => {
                compensated_sum(sample.iter().map(|&x| f(x))) / sample.len() as f64
            }
            Distribution::Discrete { values, probs } => {
                compensated_sum(values.iter().zip(probs).map(|(&x, &p)| p * f(x)))
            }
            Distribution::Normal { mean, sd } => NormalQuadrature::default().expect(*mean, *sd, kinks, f),
        }
    }

    pub fn mode(&self) -> EstimationMode {
        match self {
            Distribution::Empirical { .. } => EstimationMode::Empirical,
            Distribution::Discrete { .. } => EstimationMode::ExactDiscrete,
            Distribution::Normal { .. } => EstimationMode::GaussianQuadrature,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationMode {
    Empirical,
    ExactDiscrete,
    GaussianQuadrature,
}

/// `h(x, y) = theta + h1(x) + h1(y) + h2(x, y)`.
#[derive(Debug, Clone)]
pub struct HoeffdingParts {
    pub theta: f64,
    pub mode: EstimationMode,
    kernel: KernelSpec,
    dist: Distribution,
}

impl HoeffdingParts {
    /// `E h(x, W') - theta`.
    pub fn h1(&self, x: f64) -> f64 {
        let kinks = self.kernel.kernel().kinks(x);
        self.dist.expect(&kinks, |y| self.kernel.eval(x, y)) - self.theta
    }

    pub fn h2(&self, x: f64, y: f64) -> f64 {
        self.kernel.eval(x, y) - self.h1(x) - self.h1(y) - self.theta
    }

    pub fn distribution(&self) -> &Distribution {
        &self.dist
    }
}

pub fn hoeffding(h: &KernelSpec, dist: &Distribution) -> Result<HoeffdingParts> {
    dist.validate()?;
    let theta = match dist {
        Distribution::Normal { sd, .. } if h.is_difference() => {
            let k = h.kernel();
            NormalQuadrature::default().expect(0.0, sd * std::f64::consts::SQRT_2, &k.difference_kinks(), |d| {
                k.difference_profile(d).unwrap()
            })
        }
        _ => dist.expect(&[], |x| {
            let kinks = h.kernel().kinks(x);
            dist.expect(&kinks, |y| h.eval(x, y))
        }),
    };
    Ok(HoeffdingParts {
        theta,
        mode: dist.mode(),
        kernel: h.clone(),
        dist: dist.clone(),
    })
}

/// `Cov(h(W1, W2), h(W2, W3))` for independent copies, i.e. `Var h1(W)`.
pub fn gamma_n_squared(h: &KernelSpec, dist: &Distribution) -> Result<f64> {
    dist.validate()?;
    let gamma_sq = match dist {
        Distribution::Normal { sd, .. } if h.is_difference() => gamma_sq_normal_difference(h, *sd),
        _ => gamma_sq_projection(h, dist)?,
    };
    if gamma_sq <= GAMMA_SQ_TOLERANCE {
        return Err(Error::DegenerateKernel { gamma_sq });
    }
    Ok(gamma_sq)
}

/// `Var h1(W)` from the projection, with `theta` and `h1` from
/// [`hoeffding`]. Works for every distribution mode.
pub fn gamma_sq_projection(h: &KernelSpec, dist: &Distribution) -> Result<f64> {
    let parts = hoeffding(h, dist)?;
    Ok(match dist {
        Distribution::Discrete { values, probs } => {
            // Cov(h(W1,W2), h(W2,W3)) = sum_w2 p(w2) (E h(W1, w2))^2 - theta^2
            let inner: Vec<f64> = values
                .iter()
                .map(|&w2| compensated_sum(values.iter().zip(probs).map(|(&w1, &p)| p * h.eval(w1, w2))))
                .collect();
            compensated_sum(inner.iter().zip(probs).map(|(m, p)| p * m * m)) - parts.theta * parts.theta
        }
        _ => dist.expect(&[], |x| {
            let v = parts.h1(x);
            v * v
        }),
    })
}

/// Difference kernels under `W ~ N(mu, sd^2)`: with `D1 = W1 - W2` and
/// `D2 = W2 - W3`, `D2 | D1 = d ~ N(-d/2, 1.5 sd^2)`.
pub fn gamma_sq_normal_difference(h: &KernelSpec, sd: f64) -> f64 {
    let k = h.kernel();
    let kinks = k.difference_kinks();
    let profile = |d: f64| k.difference_profile(d).expect("difference kernel");
    let q = NormalQuadrature::default();
    let outer_sd = sd * std::f64::consts::SQRT_2;
    let inner_sd = sd * 1.5f64.sqrt();
    let theta = q.expect(0.0, outer_sd, &kinks, profile);
    let cross = q.expect(0.0, outer_sd, &kinks, |d| profile(d) * q.expect(-0.5 * d, inner_sd, &kinks, profile));
    cross - theta * theta
}

/// Jackknife-style plug-in of `gamma_n^2` from observed block statistics.
pub fn gamma_sq_empirical(w: &[f64], h: &KernelSpec) -> Result<f64> {
    let b = w.len();
    if b < 2 {
        return Err(Error::TooFewBlocks(b));
    }
    let u = u_statistic(w, h)?;
    let proj: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|j| {
            let s = compensated_sum(w.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, &y)| h.eval(w[j], y)));
            s / (b - 1) as f64 - u
        })
        .collect();
    Ok(compensated_sum(proj.iter().map(|p| p * p)) / b as f64)
}

/// Result of one constancy test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub u_n: f64,
    pub centering: f64,
    pub centering_method: CenteringMethod,
    pub gamma_sq: f64,
    pub standardized: f64,
    pub p_value: f64,
    pub blocks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit_law: Option<LimitLaw>,
    pub diagnostics: std::collections::BTreeMap<String, f64>,
}

/// `sqrt(b) (U_n - centering) / (2 sqrt(gamma^2))` with its two-sided
/// normal p-value.
pub fn standardized_statistic(
    w: &[f64],
    h: &KernelSpec,
    centering: f64,
    centering_method: CenteringMethod,
    gamma_sq: f64,
) -> Result<TestReport> {
    if !(gamma_sq > GAMMA_SQ_TOLERANCE) {
        return Err(Error::DegenerateKernel { gamma_sq });
    }
    let u_n = u_statistic(w, h)?;
    let b = w.len();
    let standardized = (b as f64).sqrt() * (u_n - centering) / (2.0 * gamma_sq.sqrt());
    Ok(TestReport {
        u_n,
        centering,
        centering_method,
        gamma_sq,
        standardized,
        p_value: two_sided_p_value(standardized),
        blocks: b,
        limit_law: None,
        diagnostics: Default::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Brute-force enumeration over ordered pairs, independent of the
    /// library's summation code.
    fn brute_u(w: &[f64], h: impl Fn(f64, f64) -> f64) -> f64 {
        let b = w.len();
        let mut s = 0.0;
        for j in 0..b {
            for k in 0..b {
                if j != k {
                    s += h(w[j], w[k]);
                }
            }
        }
        s / (b * (b - 1)) as f64
    }

    #[test]
    fn gini_small_example() {
        let w = [1.0, 2.0, 4.0];
        assert_eq!(brute_u(&w, |x, y| (x - y).abs()), 2.0);
        assert_eq!(u_statistic_double_sum(&w, &KernelSpec::gini()).unwrap(), 2.0);
        assert_eq!(gini_mean_difference(&w).unwrap(), 2.0);
    }

    #[test]
    fn constant_sample_gives_diagonal_value() {
        let h = KernelSpec::preset(KernelPreset::Sum);
        assert_eq!(u_statistic(&[1.5; 7], &h).unwrap(), 3.0);
        assert_eq!(u_statistic(&[1.5; 7], &KernelSpec::gini()).unwrap(), 0.0);
    }

    #[test]
    fn single_outlier_pair_count() {
        for b in [2usize, 5, 40] {
            let mut w = vec![0.0; b];
            w[b - 1] = 1.0;
            let u = u_statistic_double_sum(&w, &KernelSpec::gini()).unwrap();
            assert!((u - 2.0 / b as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn too_few_blocks() {
        assert_eq!(u_statistic(&[1.0], &KernelSpec::gini()), Err(Error::TooFewBlocks(1)));
        assert_eq!(
            u_statistic_double_sum(&[], &KernelSpec::preset(KernelPreset::Sum)),
            Err(Error::TooFewBlocks(0))
        );
    }

    #[test]
    fn hoeffding_bernoulli_gini_by_enumeration() {
        let parts = hoeffding(&KernelSpec::gini(), &Distribution::bernoulli(0.5)).unwrap();
        assert_eq!(parts.theta, 0.5);
        assert_eq!(parts.h1(0.0), 0.0);
        assert_eq!(parts.h1(1.0), 0.0);
        assert_eq!(parts.h2(0.0, 1.0), 0.5);
        assert_eq!(parts.h2(0.0, 0.0), -0.5);
    }

    #[test]
    fn hoeffding_linear_kernel_is_degree_one() {
        let dist = Distribution::Discrete {
            values: vec![-2.0, 1.0, 3.0],
            probs: vec![0.5, 0.25, 0.25],
        };
        let parts = hoeffding(&KernelSpec::preset(KernelPreset::Sum), &dist).unwrap();
        assert!(parts.theta.abs() < 1e-15);
        for x in [-1.3, 0.0, 2.5] {
            assert!((parts.h1(x) - x).abs() < 1e-14);
            for y in [-0.7, 4.0] {
                assert!(parts.h2(x, y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn hoeffding_gini_normal_theta() {
        let parts = hoeffding(&KernelSpec::gini(), &Distribution::standard_normal()).unwrap();
        assert!((parts.theta - 2.0 / PI.sqrt()).abs() < 1e-13);
        assert!((parts.theta - 1.128_379_167_1).abs() < 1e-10);
        // E h1(W) = 0 by quadrature
        let mean_h1 = Distribution::standard_normal().expect(&[], |x| parts.h1(x));
        assert!(mean_h1.abs() < 1e-12);
    }

    #[test]
    fn gamma_sq_gini_normal_both_routes() {
        let exact = 1.0 / 3.0 + (2.0 * 3f64.sqrt() - 4.0) / PI;
        for sd in [1.0, 0.5, 3.0] {
            let dist = Distribution::Normal { mean: 0.2, sd };
            let a = gamma_n_squared(&KernelSpec::gini(), &dist).unwrap();
            let b = gamma_sq_projection(&KernelSpec::gini(), &dist).unwrap();
            assert!((a - exact * sd * sd).abs() < 1e-12 * sd * sd, "{a}");
            assert!((b - exact * sd * sd).abs() < 1e-11 * sd * sd, "{b}");
        }
    }

    #[test]
    fn degenerate_kernels() {
        let dist = Distribution::Discrete {
            values: vec![-1.0, 0.0, 2.0],
            probs: vec![0.5, 0.25, 0.25],
        };
        assert!(matches!(
            gamma_n_squared(&KernelSpec::preset(KernelPreset::Product), &dist),
            Err(Error::DegenerateKernel { .. })
        ));
        assert!(matches!(
            gamma_n_squared(&KernelSpec::preset(KernelPreset::Product), &Distribution::standard_normal()),
            Err(Error::DegenerateKernel { .. })
        ));
        assert!(matches!(
            gamma_n_squared(&KernelSpec::gini(), &Distribution::bernoulli(0.5)),
            Err(Error::DegenerateKernel { .. })
        ));
    }

    #[test]
    fn gamma_sq_discrete_matches_triple_enumeration() {
        let values = vec![-1.0, 0.5, 2.0, 4.0];
        let probs = vec![0.1, 0.4, 0.3, 0.2];
        let h = |x: f64, y: f64| (x - y).abs();
        let mut e12 = 0.0;
        let mut e123 = 0.0;
        for (i, a) in values.iter().enumerate() {
            for (j, b) in values.iter().enumerate() {
                e12 += probs[i] * probs[j] * h(*a, *b);
                for (k, c) in values.iter().enumerate() {
                    e123 += probs[i] * probs[j] * probs[k] * h(*a, *b) * h(*b, *c);
                }
            }
        }
        let oracle = e123 - e12 * e12;
        let dist = Distribution::Discrete { values, probs };
        let got = gamma_n_squared(&KernelSpec::gini(), &dist).unwrap();
        assert!((got - oracle).abs() < 1e-14);
    }

    #[test]
    fn standardized_arithmetic() {
        // b = 100, U - c = 0.2, gamma^2 = 0.25 -> 10 * 0.2 / 1 = 2
        let mut w = vec![0.0; 100];
        w[0] = 1.0;
        let h = KernelSpec::gini();
        let u = u_statistic(&w, &h).unwrap();
        let r = standardized_statistic(&w, &h, u - 0.2, CenteringMethod::Supplied, 0.25).unwrap();
        assert!((r.standardized - 2.0).abs() < 1e-12);
        let r = standardized_statistic(&w, &h, u, CenteringMethod::Supplied, 0.25).unwrap();
        assert_eq!((r.standardized, r.p_value), (0.0, 1.0));
        assert!(matches!(
            standardized_statistic(&w, &h, u, CenteringMethod::Supplied, 0.0),
            Err(Error::DegenerateKernel { .. })
        ));
    }

    #[test]
    fn kernel_checks() {
        let pts = [-3.0, -0.5, 0.0, 1.25, 7.0];
        let c = KernelSpec::gini().check_on_samples(&pts);
        assert!(c.symmetric && c.growth_bounded && c.shift_invariant);
        let c = KernelSpec::preset(KernelPreset::Product).check_on_samples(&pts);
        assert!(c.symmetric && !c.growth_bounded && !c.shift_invariant);
    }

    #[test]
    fn shift_invariance_exact_on_integer_grid() {
        let w: Vec<f64> = (0..50).map(|i| ((i * 37) % 23) as f64).collect();
        let shifted: Vec<f64> = w.iter().map(|x| x + 1024.0).collect();
        let h = KernelSpec::gini();
        assert_eq!(u_statistic(&w, &h).unwrap(), u_statistic(&shifted, &h).unwrap());
        assert_eq!(
            u_statistic_double_sum(&w, &h).unwrap(),
            u_statistic_double_sum(&shifted, &h).unwrap()
        );
    }

    proptest! {
        #[test]
        fn fast_path_agrees_with_double_sum(w in prop::collection::vec(-100f64..100.0, 2..300)) {
            let fast = gini_mean_difference(&w).unwrap();
            let slow = u_statistic_double_sum(&w, &KernelSpec::gini()).unwrap();
            prop_assert!((fast - slow).abs() <= 1e-10 * slow.abs().max(1e-300));
        }

        #[test]
        fn double_sum_matches_brute_force(w in prop::collection::vec(-10f64..10.0, 2..60)) {
            let h = KernelSpec::preset(KernelPreset::Product);
            let got = u_statistic(&w, &h).unwrap();
            let want = brute_u(&w, |x, y| x * y);
            prop_assert!((got - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }

        #[test]
        fn shift_invariance(w in prop::collection::vec(-10f64..10.0, 2..80), c in -50f64..50.0) {
            let h = KernelSpec::gini();
            let shifted: Vec<f64> = w.iter().map(|x| x + c).collect();
            let a = u_statistic(&w, &h).unwrap();
            let b = u_statistic(&shifted, &h).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + c.abs()) * 10.0);
        }

        #[test]
        fn permutation_invariance(w in prop::collection::vec(-10f64..10.0, 2..80)) {
            let h = KernelSpec::gini();
            let mut rev = w.clone();
            rev.reverse();
            prop_assert_eq!(u_statistic(&w, &h).unwrap(), u_statistic(&rev, &h).unwrap());
            let hs = KernelSpec::preset(KernelPreset::Sum);
            let a = u_statistic(&w, &hs).unwrap();
            let b = u_statistic(&rev, &hs).unwrap();
            prop_assert!((a - b).abs() <= 1e-13 * (1.0 + a.abs()));
        }
    }
}
