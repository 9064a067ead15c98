//! Limiting quantities of the dependent-case central limit theorem: the
//! long-run variance `sigma^2` of the linearised block statistic, the
//! kernel covariance `gamma^2`, and the centering strategies.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{local_moments, local_statistics, partition, Series};
use crate::error::{Error, Result};
use crate::gfuncs::GSpec;
use crate::numeric::{compensated_sum, mean_stderr, pairwise_sum};
use crate::processes::{Process, ProcessSpec, StreamKey};
use crate::quadrature::NormalQuadrature;
use crate::rng::{role, CounterRng};
use crate::ustat::{gamma_sq_normal_difference, gamma_sq_projection, u_statistic, Distribution, KernelSpec, GAMMA_SQ_TOLERANCE};

/// Default `kappa` of the Z_n-centering rate condition.
pub const DEFAULT_KAPPA: f64 = 0.5;
/// Observations in the moment pre-pass for non-analytic specs.
pub const MOMENT_PREPASS: usize = 1_000_000;

/// How the U-statistic is centred before standardisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenteringMethod {
    /// Simulated `E U_n` with the eta-truncated block statistics.
    TruncatedExpectation,
    /// Simulated `E h(Z_n, Z_n')` for the linearised block sums.
    ZnExpectation,
    /// `E h(sigma N, sigma N')` for difference kernels.
    Gaussian,
    /// The exact `theta_n` of a known array distribution.
    Exact,
    /// A value provided by the caller.
    Supplied,
}

impl CenteringMethod {
    pub fn name(self) -> &'static str {
        match self {
            CenteringMethod::TruncatedExpectation => "truncated-expectation",
            CenteringMethod::ZnExpectation => "zn-expectation",
            CenteringMethod::Gaussian => "gaussian",
            CenteringMethod::Exact => "exact",
            CenteringMethod::Supplied => "supplied",
        }
    }
}

impl fmt::Display for CenteringMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CenteringMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "truncated-expectation" | "truncated" => Ok(CenteringMethod::TruncatedExpectation),
            "zn-expectation" | "zn" => Ok(CenteringMethod::ZnExpectation),
            "gaussian" => Ok(CenteringMethod::Gaussian),
            "exact" => Ok(CenteringMethod::Exact),
            "supplied" => Ok(CenteringMethod::Supplied),
            _ => Err(Error::UnknownName(format!("centering method {s:?}"))),
        }
    }
}

/// Parameters of the normal limit of the standardised U-statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLaw {
    pub sigma_sq: f64,
    pub gamma_sq: f64,
    pub centering_method: CenteringMethod,
    pub centering_value: f64,
    pub centering_stderr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

impl LimitLaw {
    /// Recomputes `gamma^2` from `sigma^2` and the kernel.
    pub fn recompute_gamma_sq(&self, h: &KernelSpec) -> Result<f64> {
        gamma_squared(h, self.sigma_sq.sqrt())
    }
}

/// A Monte Carlo or closed-form quantity with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub replications: usize,
    pub analytic: bool,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
            replications: 0,
            analytic: true,
        }
    }

    fn from_samples(samples: &[f64]) -> Self {
        let (value, stderr) = mean_stderr(samples);
        Self {
            value,
            stderr,
            replications: samples.len(),
            analytic: false,
        }
    }
}

/// Long-run variance estimate; `negative` flags a truncation artifact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub estimate: Estimate,
    pub lag_window: usize,
    pub negative: bool,
}

impl SigmaEstimate {
    /// The estimate, or [`Error::NegativeEstimate`] if it is not positive.
    pub fn positive(&self) -> Result<f64> {
        if self.estimate.value > 0.0 {
            Ok(self.estimate.value)
        } else {
            Err(Error::NegativeEstimate {
                value: self.estimate.value,
            })
        }
    }
}

/// `D_t = sum_k w_k (X_t^k - mu_k)`.
pub fn composite_series(x: &[f64], weights: &[f64], means: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let mut p = 1.0;
            let mut d = 0.0;
            for (w, mu) in weights.iter().zip(means) {
                p *= v;
                d += w * (p - mu);
            }
            d
        })
        .collect()
}

/// Bartlett lag-window estimate `sum_{|t| <= L} (1 - |t|/(L+1)) gamma(t)`
/// of a series centred at its sample mean, with `L = ceil(n^{1/3})` by
/// default.
pub fn bartlett_long_run_variance(d: &[f64], lag_window: Option<usize>) -> Result<f64> {
    let n = d.len();
    if n < 2 {
        return Err(Error::InvalidParameter("long-run variance needs at least two observations".into()));
    }
    let lag = lag_window
        .unwrap_or_else(|| (n as f64).cbrt().ceil() as usize)
        .min(n - 1);
    let mean = compensated_sum(d.iter().copied()) / n as f64;
    let c: Vec<f64> = d.iter().map(|v| v - mean).collect();
    let autocov = |t: usize| compensated_sum(c[t..].iter().zip(&c).map(|(a, b)| a * b)) / n as f64;
    let mut s = autocov(0);
    for t in 1..=lag {
        s += 2.0 * (1.0 - t as f64 / (lag as f64 + 1.0)) * autocov(t);
    }
    Ok(s)
}

/// Data-driven `sigma^2`: the composite series uses the gradient at `v0`
/// and global sample moments, followed by a Bartlett estimate.
pub fn sigma_squared_from_data(series: &Series, g: &GSpec, lag_window: Option<usize>) -> Result<f64> {
    let weights = g.gradient_at_v0()?;
    let x = series.values();
    let n = x.len() as f64;
    let means: Vec<f64> = (1..=weights.len() as i32)
        .map(|k| compensated_sum(x.iter().map(|v| v.powi(k))) / n)
        .collect();
    bartlett_long_run_variance(&composite_series(x, &weights, &means), lag_window)
}

/// Closed-form `sigma^2` for i.i.d. specs of any order and for linear
/// specs with `m <= 2`.
pub fn sigma_squared_analytic(process: &Process, weights: &[f64]) -> Option<f64> {
    let m = weights.len();
    let lags = process.lags();
    let iid = *lags.start() == 0 && *lags.end() == 0 && process.is_linear();
    if iid {
        let mu = |k: usize| process.analytic_moment(k as u32);
        let mut s = 0.0;
        for (i, wi) in weights.iter().enumerate() {
            for (j, wj) in weights.iter().enumerate() {
                s += wi * wj * (mu(i + j + 2)? - mu(i + 1)? * mu(j + 1)?);
            }
        }
        return Some(s);
    }
    if !process.is_linear() || m > 2 {
        return None;
    }
    let inn = process.innovation();
    let (k2, k3, k4) = (inn.cumulant(2), inn.raw_moment(3), inn.cumulant(4));
    let a = |j: i64| process.coefficient(j);
    let (lo, hi) = (*lags.start(), *lags.end());
    let span = hi - lo;
    let w1 = weights[0];
    let w2 = weights.get(1).copied().unwrap_or(0.0);
    let mut s = 0.0;
    for t in -span..=span {
        let sum = |f: &dyn Fn(f64, f64) -> f64| compensated_sum((lo..=hi).map(|j| f(a(j), a(j + t))));
        let r = k2 * sum(&|x, y| x * y);
        let c12 = k3 * sum(&|x, y| x * y * y);
        let c21 = k3 * sum(&|x, y| x * x * y);
        let c22 = 2.0 * r * r + k4 * sum(&|x, y| x * x * y * y);
        s += w1 * w1 * r + w1 * w2 * (c12 + c21) + w2 * w2 * c22;
    }
    Some(s)
}

/// `sigma^2 = sum_t Cov(D_0, D_t)`, in closed form when the spec admits
/// one and otherwise as the truncated autocovariance sum over `|t| <= L`
/// averaged across `replications` independent series.
pub fn sigma_squared(
    spec: &ProcessSpec,
    g: &GSpec,
    lag_window: Option<usize>,
    replications: usize,
) -> Result<SigmaEstimate> {
    let process = spec.compile()?;
    let weights = g.gradient_at_v0()?;
    let span = (process.lags().end() - process.lags().start()) as usize;
    let lag = lag_window.unwrap_or(span.max(1));
    if let Some(v) = sigma_squared_analytic(&process, &weights) {
        return Ok(SigmaEstimate {
            estimate: Estimate::exact(v),
            lag_window: span,
            negative: v < 0.0,
        });
    }
    if replications < 2 {
        return Err(Error::InvalidParameter("sigma^2 simulation needs at least two replications".into()));
    }
    let (means, _) = process.moments(weights.len(), MOMENT_PREPASS);
    let length = (50 * lag).max(10_000);
    let per_rep: Vec<f64> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let x = process.generate_with(process.replication_key(r), 1, length);
            let d = composite_series(&x, &weights, &means);
            let autocov = |t: usize| pairwise_sum(&d[t..].iter().zip(&d).map(|(a, b)| a * b).collect::<Vec<_>>()) / (length - t) as f64;
            autocov(0) + 2.0 * (1..=lag).map(autocov).sum::<f64>()
        })
        .collect();
    let estimate = Estimate::from_samples(&per_rep);
    Ok(SigmaEstimate {
        negative: estimate.value < 0.0,
        estimate,
        lag_window: lag,
    })
}

/// `gamma^2 = Cov(h(sigma N, sigma N'), h(sigma N', sigma N''))` by
/// quadrature: two nested one-dimensional rules for difference kernels,
/// nested projections otherwise.
pub fn gamma_squared(h: &KernelSpec, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let gamma_sq = if h.is_difference() {
        gamma_sq_normal_difference(h, sigma)
    } else {
        gamma_sq_projection(h, &Distribution::Normal { mean: 0.0, sd: sigma })?
    };
    if gamma_sq <= GAMMA_SQ_TOLERANCE {
        return Err(Error::DegenerateKernel { gamma_sq });
    }
    Ok(gamma_sq)
}

/// Unbiased Monte Carlo `gamma^2` from `E[h(A,B) (h(B,C) - h(C,D))]` over
/// independent normal quadruples.
pub fn gamma_squared_monte_carlo(h: &KernelSpec, sigma: f64, samples: usize, seed: u64) -> Estimate {
    const CHUNK: usize = 100_000;
    let chunks = samples.div_ceil(CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks as u64)
        .into_par_iter()
        .map(|c| {
            let mut rng = CounterRng::new(seed, c);
            let count = CHUNK.min(samples - c as usize * CHUNK);
            let mut s = crate::numeric::CompensatedSum::new();
            let mut s2 = crate::numeric::CompensatedSum::new();
            for _ in 0..count {
                let [a, b, cc, d] = [0; 4].map(|_| sigma * rng.normal());
                let y = h.eval(a, b) * (h.eval(b, cc) - h.eval(cc, d));
                s.add(y);
                s2.add(y * y);
            }
            (s.value(), s2.value())
        })
        .collect();
    let n = samples as f64;
    let sum = compensated_sum(sums.iter().map(|p| p.0));
    let sum_sq = compensated_sum(sums.iter().map(|p| p.1));
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean) * n / (n - 1.0);
    Estimate {
        value: mean,
        stderr: (var / n).sqrt(),
        replications: samples,
        analytic: false,
    }
}

/// Inputs for [`centering`].
#[derive(Debug, Clone)]
pub struct CenteringInputs<'a> {
    pub kernel: &'a KernelSpec,
    pub sigma: Option<f64>,
    pub spec: Option<&'a ProcessSpec>,
    pub g: Option<&'a GSpec>,
    pub block_length: usize,
    pub blocks: usize,
    pub replications: usize,
    /// Value used by [`CenteringMethod::Supplied`].
    pub supplied: Option<f64>,
}

/// `E h(sigma N, sigma N')` for a difference kernel.
pub fn gaussian_centering(h: &KernelSpec, sigma: f64) -> Result<f64> {
    if !h.is_difference() {
        return Err(Error::MethodUnavailable(format!(
            "gaussian centering needs a difference kernel, {} is not one",
            h.name()
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let k = h.kernel();
    Ok(NormalQuadrature::default().expect(0.0, sigma * std::f64::consts::SQRT_2, &k.difference_kinks(), |d| {
        k.difference_profile(d).unwrap()
    }))
}

/// `Z_n = l^{-1/2} sum_k w_k sum_{t in block} (X_t^k - mu_k)` for one block.
fn zn_value(process: &Process, key: StreamKey, weights: &[f64], means: &[f64], block_length: usize) -> f64 {
    let x = process.generate_with(key, 1, block_length);
    compensated_sum(composite_series(&x, weights, means)) / (block_length as f64).sqrt()
}

/// Monte Carlo `E h(Z_n, Z_n')` with the two copies on independent streams.
pub fn zn_centering(spec: &ProcessSpec, g: &GSpec, h: &KernelSpec, block_length: usize, replications: usize) -> Result<Estimate> {
    check_replications(replications)?;
    let process = spec.compile()?;
    let weights = g.gradient_at_v0()?;
    let (means, _) = process.moments(weights.len(), MOMENT_PREPASS);
    let seed = spec.seed;
    let samples: Vec<f64> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let z = zn_value(&process, StreamKey::replication(seed, r, role::PRIMARY), &weights, &means, block_length);
            let z2 = zn_value(&process, StreamKey::replication(seed, r, role::SECOND), &weights, &means, block_length);
            h.eval(z, z2)
        })
        .collect();
    Ok(Estimate::from_samples(&samples))
}

/// Monte Carlo `E U_n` over full series of `blocks * block_length`
/// observations with eta-truncated block statistics.
pub fn truncated_centering(
    spec: &ProcessSpec,
    g: &GSpec,
    h: &KernelSpec,
    block_length: usize,
    blocks: usize,
    replications: usize,
) -> Result<Estimate> {
    check_replications(replications)?;
    if blocks < 2 {
        return Err(Error::TooFewBlocks(blocks));
    }
    let process = spec.compile()?;
    let n = block_length * blocks;
    let samples: Result<Vec<f64>> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let series = Series::new(process.generate_with(process.replication_key(r), 1, n))?;
            let scheme = partition(&series, block_length)?;
            let moments = local_moments(&series, &scheme, g.order())?;
            u_statistic(&local_statistics(&moments, g, true)?, h)
        })
        .collect();
    Ok(Estimate::from_samples(&samples?))
}

fn check_replications(replications: usize) -> Result<()> {
    if replications < 2 {
        Err(Error::InvalidParameter("Monte Carlo centering needs at least two replications".into()))
    } else {
        Ok(())
    }
}

/// Centering value by the requested method.
pub fn centering(method: CenteringMethod, inputs: &CenteringInputs<'_>) -> Result<Estimate> {
    let need_spec = || {
        inputs
            .spec
            .ok_or_else(|| Error::MethodUnavailable(format!("{method} centering needs a process spec")))
    };
    let need_g = || {
        inputs
            .g
            .ok_or_else(|| Error::MethodUnavailable(format!("{method} centering needs a g-function")))
    };
    match method {
        CenteringMethod::Gaussian => {
            let sigma = inputs
                .sigma
                .ok_or_else(|| Error::MethodUnavailable("gaussian centering needs sigma".into()))?;
            gaussian_centering(inputs.kernel, sigma).map(Estimate::exact)
        }
        CenteringMethod::ZnExpectation => zn_centering(
            need_spec()?,
            need_g()?,
            inputs.kernel,
            inputs.block_length,
            inputs.replications,
        ),
        CenteringMethod::TruncatedExpectation => truncated_centering(
            need_spec()?,
            need_g()?,
            inputs.kernel,
            inputs.block_length,
            inputs.blocks,
            inputs.replications,
        ),
        CenteringMethod::Supplied | CenteringMethod::Exact => inputs
            .supplied
            .map(Estimate::exact)
            .ok_or_else(|| Error::MethodUnavailable(format!("{method} centering needs a value"))),
    }
}

/// Standardisation is refused when the centering error exceeds a tenth of
/// the statistic's resolution `2 gamma / sqrt(b)`.
pub fn check_centering_noise(stderr: f64, gamma_sq: f64, blocks: usize) -> Result<()> {
    let limit = 0.1 * 2.0 * gamma_sq.sqrt() / (blocks as f64).sqrt();
    if stderr > limit {
        Err(Error::CenteringTooNoisy { stderr, limit, blocks })
    } else {
        Ok(())
    }
}

/// Whether `b / l^{1 - kappa}` stays bounded by one, the rate condition of
/// the Z_n centering.
pub fn zn_rate_ratio(block_length: usize, blocks: usize, kappa: Option<f64>) -> f64 {
    let kappa = kappa.unwrap_or(DEFAULT_KAPPA);
    blocks as f64 / (block_length as f64).powf(1.0 - kappa)
}
