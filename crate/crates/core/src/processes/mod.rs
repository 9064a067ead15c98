//! Seeded Bernoulli-shift generators: i.i.d., linear, Hölder and Hermite
//! transforms of linear processes, Volterra processes, and the
//! non-integrable counterexample.
//!
//! A [`ProcessSpec`] is the serialisable description; [`Process`] is the
//! validated, compiled form. `X_t` depends on `eps_{t-j}` for lags
//! `j in lag_min..=lag_max`. Innovations are addressed by index through
//! [`CounterRng`], so the coupled copy that swaps a single `eps_i` is exact.

mod hermite;
mod innovation;

pub use hermite::{hermite_expand, hermite_values, HermiteExpansion, Transform};
pub use innovation::{counterexample_log_atom, counterexample_probs, Innovation};

use serde::{Deserialize, Serialize};

use crate::blocks::Series;
use crate::error::{Error, Result};
use crate::rng::{replication_stream, role, CounterRng};

/// Default target for the truncated coefficient tail.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-8;
/// Upper limit on the automatically chosen window.
pub const MAX_AUTO_WINDOW: usize = 4096;

/// Filter coefficients `a_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficients {
    /// `a_j = phi^|j|`
    Geometric { phi: f64 },
    /// `a_0 = scale`, `a_j = scale / |j|^exponent`
    PowerLaw { scale: f64, exponent: f64 },
    /// `a_{offset + k} = values[k]`, zero elsewhere.
    Explicit { values: Vec<f64>, offset: i64 },
}

impl Coefficients {
    pub fn at(&self, j: i64) -> f64 {
        match self {
            Coefficients::Geometric { phi } => phi.powi(j.unsigned_abs() as i32),
            Coefficients::PowerLaw { scale, exponent } => {
                if j == 0 {
                    *scale
                } else {
                    scale / (j.unsigned_abs() as f64).powf(*exponent)
                }
            }
            Coefficients::Explicit { values, offset } => {
                let k = j - offset;
                if k >= 0 && (k as usize) < values.len() {
                    values[k as usize]
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Coefficients::Geometric { phi } if !(phi.abs() < 1.0) => Err(Error::InvalidCoefficients(format!(
                "geometric coefficients need |phi| < 1, got {phi}"
            ))),
            Coefficients::PowerLaw { exponent, scale } if !(*exponent > 1.0) || !scale.is_finite() => {
                Err(Error::InvalidCoefficients(format!(
                    "power-law coefficients need exponent > 1 for absolute summability, got {exponent}"
                )))
            }
            Coefficients::Explicit { values, .. } if values.iter().any(|v| !v.is_finite()) => {
                Err(Error::InvalidCoefficients("explicit coefficients must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    /// Bound on `sum_{|j| > window} |a_j|^power` over the admissible lags.
    pub fn tail_bound(&self, window: usize, power: f64, causal: bool) -> f64 {
        let sides = if causal { 1.0 } else { 2.0 };
        let w = window as f64;
        match self {
            Coefficients::Geometric { phi } => {
                let r = phi.abs().powf(power);
                sides * r.powf(w + 1.0) / (1.0 - r)
            }
            Coefficients::PowerLaw { scale, exponent } => {
                let e = exponent * power;
                if e <= 1.0 {
                    f64::INFINITY
                } else {
                    sides * scale.abs().powf(power) * w.max(1.0).powf(1.0 - e) / (e - 1.0)
                }
            }
            Coefficients::Explicit { values, offset } => values
                .iter()
                .enumerate()
                .filter(|(k, _)| {
                    let j = offset + *k as i64;
                    j.unsigned_abs() as usize > window || (causal && j < 0)
                })
                .map(|(_, v)| v.abs().powf(power))
                .sum(),
        }
    }

    /// Smallest window that covers an explicit support.
    fn support_window(&self) -> Option<usize> {
        match self {
            Coefficients::Explicit { values, offset } => Some(
                values
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(k, _)| (offset + k as i64).unsigned_abs() as usize)
                    .max()
                    .unwrap_or(0),
            ),
            _ => None,
        }
    }
}

/// One term `coeff * eps_{t - lag_a} * eps_{t - lag_b}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolterraTerm {
    pub lag_a: i64,
    pub lag_b: i64,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessVariant {
    Iid {
        #[serde(default)]
        innovation: Innovation,
    },
    Linear {
        coeffs: Coefficients,
        #[serde(default)]
        innovation: Innovation,
    },
    /// `phi(sum a_j eps_{t-j})` with `phi` Hölder of the given exponent.
    HoelderLinear {
        transform: Transform,
        exponent: f64,
        coeffs: Coefficients,
        #[serde(default)]
        innovation: Innovation,
    },
    /// `phi(Y_t)` with `Y_t` a standard Gaussian linear process; the
    /// coefficients are renormalised to `sum a_j^2 = 1`.
    GaussianHermite { transform: Transform, coeffs: Coefficients },
    Volterra {
        terms: Vec<VolterraTerm>,
        #[serde(default)]
        innovation: Innovation,
    },
    /// I.i.d. draws from the non-integrable counterexample law.
    Pathological,
}

/// Serialisable process description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub variant: ProcessVariant,
    /// Coefficient truncation window `J`; chosen from the tail bound when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    /// Lags `0..=J` only instead of `-J..=J`.
    #[serde(default)]
    pub causal: bool,
    #[serde(default)]
    pub seed: u64,
}

impl ProcessSpec {
    pub fn new(variant: ProcessVariant) -> Self {
        Self {
            variant,
            window: None,
            causal: false,
            seed: 0,
        }
    }

    pub fn causal(mut self) -> Self {
        self.causal = true;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = Some(window);
        self
    }

    pub fn iid_normal() -> Self {
        Self::new(ProcessVariant::Iid {
            innovation: Innovation::Normal { sd: 1.0 },
        })
    }

    /// Causal `a_j = phi^j` with standard normal innovations.
    pub fn ar1(phi: f64) -> Self {
        Self::new(ProcessVariant::Linear {
            coeffs: Coefficients::Geometric { phi },
            innovation: Innovation::Normal { sd: 1.0 },
        })
        .causal()
    }

    pub fn compile(&self) -> Result<Process> {
        Process::new(self.clone())
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Iid,
    Filtered {
        coeffs: Vec<f64>,
        transform: Option<Transform>,
    },
    Volterra(Vec<VolterraTerm>),
}

/// Compiled, validated process.
#[derive(Debug, Clone)]
pub struct Process {
    spec: ProcessSpec,
    kind: Kind,
    innovation: Innovation,
    lag_min: i64,
    lag_max: i64,
    tail_bound: f64,
}

/// Identifies one innovation stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub stream: u64,
}

impl StreamKey {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn replication(seed: u64, r: u64, which: u64) -> Self {
        Self::new(seed, replication_stream(r, which))
    }

    pub fn rng(&self) -> CounterRng {
        CounterRng::new(self.seed, self.stream)
    }
}

impl Process {
    pub fn new(spec: ProcessSpec) -> Result<Self> {
        let causal = spec.causal;
        let filter = |coeffs: &Coefficients, power: f64| -> Result<(usize, Vec<f64>, f64)> {
            coeffs.validate()?;
            let window = match (spec.window, coeffs.support_window()) {
                (Some(w), _) => w,
                (None, Some(w)) => w,
                (None, None) => (0..=MAX_AUTO_WINDOW)
                    .find(|&w| coeffs.tail_bound(w, power, causal) < DEFAULT_TAIL_TOLERANCE)
                    .unwrap_or(MAX_AUTO_WINDOW),
            };
            let lo = if causal { 0 } else { -(window as i64) };
            let values: Vec<f64> = (lo..=window as i64).map(|j| coeffs.at(j)).collect();
            Ok((window, values, coeffs.tail_bound(window, power, causal)))
        };
        let lag_lo = |window: usize| if causal { 0 } else { -(window as i64) };

        let (kind, innovation, lag_min, lag_max, tail_bound) = match &spec.variant {
            ProcessVariant::Iid { innovation } => (Kind::Iid, innovation.clone(), 0, 0, 0.0),
            ProcessVariant::Pathological => (Kind::Iid, Innovation::Counterexample { max_k: 30 }, 0, 0, 0.0),
            ProcessVariant::Linear { coeffs, innovation } => {
                let (w, values, tail) = filter(coeffs, 1.0)?;
                (
                    Kind::Filtered {
                        coeffs: values,
                        transform: None,
                    },
                    innovation.clone(),
                    lag_lo(w),
                    w as i64,
                    tail,
                )
            }
            ProcessVariant::HoelderLinear {
                transform,
                exponent,
                coeffs,
                innovation,
            } => {
                if !(*exponent > 0.0 && *exponent <= 1.0) {
                    return Err(Error::InvalidCoefficients(format!(
                        "Hölder exponent must lie in (0, 1], got {exponent}"
                    )));
                }
                transform.validate()?;
                if transform.hoelder().is_none() {
                    return Err(Error::InvalidCoefficients(format!(
                        "transform {transform:?} is not globally Hölder"
                    )));
                }
                let (w, values, tail) = filter(coeffs, *exponent)?;
                (
                    Kind::Filtered {
                        coeffs: values,
                        transform: Some(transform.clone()),
                    },
                    innovation.clone(),
                    lag_lo(w),
                    w as i64,
                    tail,
                )
            }
            ProcessVariant::GaussianHermite { transform, coeffs } => {
                transform.validate()?;
                let (w, mut values, tail) = filter(coeffs, 1.0)?;
                let norm = values.iter().map(|a| a * a).sum::<f64>().sqrt();
                if !(norm > 0.0) {
                    return Err(Error::InvalidCoefficients("coefficients are identically zero".into()));
                }
                values.iter_mut().for_each(|a| *a /= norm);
                (
                    Kind::Filtered {
                        coeffs: values,
                        transform: Some(transform.clone()),
                    },
                    Innovation::Normal { sd: 1.0 },
                    lag_lo(w),
                    w as i64,
                    tail / norm,
                )
            }
            ProcessVariant::Volterra { terms, innovation } => {
                if terms.is_empty() {
                    return Err(Error::InvalidCoefficients("Volterra process needs at least one term".into()));
                }
                if let Some(t) = terms.iter().find(|t| t.lag_a == t.lag_b) {
                    return Err(Error::InvalidCoefficients(format!(
                        "Volterra terms need distinct lags, got a diagonal term at lag {}",
                        t.lag_a
                    )));
                }
                if terms.iter().any(|t| !t.coeff.is_finite()) {
                    return Err(Error::InvalidCoefficients("Volterra coefficients must be finite".into()));
                }
                let lo = terms.iter().map(|t| t.lag_a.min(t.lag_b)).min().unwrap();
                let hi = terms.iter().map(|t| t.lag_a.max(t.lag_b)).max().unwrap();
                (Kind::Volterra(terms.clone()), innovation.clone(), lo, hi, 0.0)
            }
        };
        innovation.validate()?;
        Ok(Self {
            spec,
            kind,
            innovation,
            lag_min,
            lag_max,
            tail_bound,
        })
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    pub fn innovation(&self) -> &Innovation {
        &self.innovation
    }

    /// Lags `j` with `X_t` depending on `eps_{t-j}`.
    pub fn lags(&self) -> std::ops::RangeInclusive<i64> {
        self.lag_min..=self.lag_max
    }

    /// Bound on the neglected `sum |a_j|^gamma` beyond the window.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn is_finite_window(&self) -> bool {
        match (&self.spec.variant, &self.kind) {
            (_, Kind::Iid) | (_, Kind::Volterra(_)) => true,
            (ProcessVariant::Linear { coeffs, .. }, _)
            | (ProcessVariant::HoelderLinear { coeffs, .. }, _)
            | (ProcessVariant::GaussianHermite { coeffs, .. }, _) => {
                matches!(coeffs, Coefficients::Explicit { .. }) && self.tail_bound == 0.0
            }
            _ => false,
        }
    }

    /// Truncated filter coefficient `a_j` (zero outside the window or for
    /// non-filtered variants). For i.i.d. processes `a_0 = 1`.
    pub fn coefficient(&self, j: i64) -> f64 {
        match &self.kind {
            Kind::Iid => f64::from(u8::from(j == 0)),
            Kind::Filtered { coeffs, .. } => {
                if j < self.lag_min || j > self.lag_max {
                    0.0
                } else {
                    coeffs[(j - self.lag_min) as usize]
                }
            }
            Kind::Volterra(_) => 0.0,
        }
    }

    /// Whether `X_t = sum a_j eps_{t-j}` without a transform.
    pub fn is_linear(&self) -> bool {
        matches!(&self.kind, Kind::Iid | Kind::Filtered { transform: None, .. })
            || matches!(&self.kind, Kind::Filtered { transform: Some(Transform::Identity), .. })
    }

    pub fn transform(&self) -> Option<&Transform> {
        match &self.kind {
            Kind::Filtered { transform, .. } => transform.as_ref(),
            _ => None,
        }
    }

    /// `X_t` from a buffer `eps` holding `eps_u` at `eps[u - base]`.
    #[inline]
    pub fn value_from_buffer(&self, eps: &[f64], base: i64, t: i64) -> f64 {
        let at = |u: i64| eps[(u - base) as usize];
        match &self.kind {
            Kind::Iid => at(t),
            Kind::Filtered { coeffs, transform } => {
                // eps index runs from t - lag_max upward as j runs down from lag_max
                let start = (t - self.lag_max - base) as usize;
                let window = &eps[start..start + coeffs.len()];
                let y: f64 = coeffs.iter().rev().zip(window).map(|(a, e)| a * e).sum();
                match transform {
                    Some(tr) => tr.apply(y),
                    None => y,
                }
            }
            Kind::Volterra(terms) => terms
                .iter()
                .map(|term| term.coeff * at(t - term.lag_a) * at(t - term.lag_b))
                .sum(),
        }
    }

    /// Innovation index range needed for `X_start ..= X_{start+n-1}`.
    pub fn innovation_range(&self, start: i64, n: usize) -> (i64, usize) {
        let lo = start - self.lag_max;
        let hi = start + n as i64 - 1 - self.lag_min;
        (lo, (hi - lo + 1) as usize)
    }

    pub fn fill_innovations(&self, key: StreamKey, lo: i64, len: usize) -> Vec<f64> {
        let mut rng = key.rng();
        rng.seek(lo);
        (0..len).map(|_| self.innovation.sample(&mut rng)).collect()
    }

    pub fn innovation_at(&self, key: StreamKey, u: i64) -> f64 {
        let mut rng = key.rng();
        rng.seek(u);
        self.innovation.sample(&mut rng)
    }

    /// `X_start ..= X_{start+n-1}` driven by the stream `key`.
    pub fn generate_with(&self, key: StreamKey, start: i64, n: usize) -> Vec<f64> {
        let (lo, len) = self.innovation_range(start, n);
        let eps = self.fill_innovations(key, lo, len);
        self.values(&eps, lo, start, n)
    }

    fn values(&self, eps: &[f64], base: i64, start: i64, n: usize) -> Vec<f64> {
        (0..n as i64).map(|k| self.value_from_buffer(eps, base, start + k)).collect()
    }

    /// Pair `(X, X^{*,i})` over `t = start ..= start+n-1` where the copy
    /// replaces `eps_i` with the independent `eps'_i` from `coupled`.
    pub fn generate_coupled_with(
        &self,
        key: StreamKey,
        coupled: StreamKey,
        start: i64,
        n: usize,
        i: i64,
    ) -> (Vec<f64>, Vec<f64>) {
        let (lo, len) = self.innovation_range(start, n);
        let mut eps = self.fill_innovations(key, lo, len);
        let x = self.values(&eps, lo, start, n);
        if i >= lo && i < lo + len as i64 {
            eps[(i - lo) as usize] = self.innovation_at(coupled, i);
        }
        let x_star = self.values(&eps, lo, start, n);
        (x, x_star)
    }

    /// Stream for replication `r` of this spec's seed.
    pub fn replication_key(&self, r: u64) -> StreamKey {
        StreamKey::replication(self.spec.seed, r, role::PRIMARY)
    }

    /// Independent stream for the coupled innovation of replication `r`.
    pub fn coupled_key(&self, r: u64) -> StreamKey {
        StreamKey::replication(self.spec.seed, r, role::COUPLED)
    }

    /// Closed-form `E X_0^k` where available.
    pub fn analytic_moment(&self, k: u32) -> Option<f64> {
        if k == 0 {
            return Some(1.0);
        }
        match &self.kind {
            Kind::Iid => Some(self.innovation.raw_moment(k)),
            Kind::Filtered { coeffs, transform } => {
                let power_sum = |r: i32| coeffs.iter().map(|a| a.powi(r)).sum::<f64>();
                let linear = |k: u32| -> Option<f64> {
                    let inn = &self.innovation;
                    match k {
                        1 | 3 => Some(0.0),
                        2 => Some(inn.cumulant(2) * power_sum(2)),
                        4 => Some(inn.cumulant(4) * power_sum(4) + 3.0 * (inn.cumulant(2) * power_sum(2)).powi(2)),
                        _ => None,
                    }
                };
                match transform {
                    None | Some(Transform::Identity) => linear(k),
                    Some(tr) => match self.innovation {
                        Innovation::Normal { sd } => Some(tr.gaussian_moment(sd * power_sum(2).sqrt(), k)),
                        _ => None,
                    },
                }
            }
            Kind::Volterra(terms) => match k {
                1 => Some(0.0),
                2 => {
                    // E X^2 = kappa2^2 * sum over unordered lag pairs of (summed coefficient)^2
                    let mut pairs: Vec<((i64, i64), f64)> = Vec::new();
                    for t in terms {
                        let key = (t.lag_a.min(t.lag_b), t.lag_a.max(t.lag_b));
                        match pairs.iter_mut().find(|(k, _)| *k == key) {
                            Some((_, c)) => *c += t.coeff,
                            None => pairs.push((key, t.coeff)),
                        }
                    }
                    let v = self.innovation.variance();
                    Some(v * v * pairs.iter().map(|(_, c)| c * c).sum::<f64>())
                }
                _ => None,
            },
        }
    }

    /// `E X^k, k = 1..=m`, analytically where possible and otherwise from a
    /// pre-pass of `prepass` observations on an auxiliary stream. The flag
    /// is true when every entry is analytic.
    pub fn moments(&self, m: usize, prepass: usize) -> (Vec<f64>, bool) {
        let analytic: Vec<Option<f64>> = (1..=m as u32).map(|k| self.analytic_moment(k)).collect();
        if analytic.iter().all(Option::is_some) {
            return (analytic.into_iter().map(Option::unwrap).collect(), true);
        }
        let key = StreamKey::new(self.spec.seed, replication_stream(u64::MAX / 4, role::AUX));
        let xs = self.generate_with(key, 1, prepass);
        let est: Vec<f64> = (1..=m as i32)
            .map(|k| crate::numeric::compensated_sum(xs.iter().map(|x| x.powi(k))) / prepass as f64)
            .collect();
        (
            analytic.iter().zip(est).map(|(a, e)| a.unwrap_or(e)).collect(),
            false,
        )
    }
}

/// `X_1 ..= X_n` from the spec's seed.
pub fn generate(spec: &ProcessSpec, n: usize) -> Result<Series> {
    if n == 0 {
        return Err(Error::InvalidParameter("series length must be positive".into()));
    }
    let p = spec.compile()?;
    Series::new(p.generate_with(p.replication_key(0), 1, n))
}

/// `(X, X^{*,i})` over `t = 0 ..= n-1`, so the first entry is the `X_0`
/// that enters the dependence coefficient.
pub fn generate_coupled(spec: &ProcessSpec, n: usize, i: i64) -> Result<(Series, Series)> {
    if n == 0 {
        return Err(Error::InvalidParameter("series length must be positive".into()));
    }
    let p = spec.compile()?;
    let (x, y) = p.generate_coupled_with(p.replication_key(0), p.coupled_key(0), 0, n, i);
    Ok((Series::new(x)?, Series::new(y)?))
}

/// Specs covering every process class, used by diagnostics and tests.
pub fn builtin_suite() -> Vec<(String, ProcessSpec)> {
    let geometric = |phi: f64| Coefficients::Geometric { phi };
    vec![
        ("iid".into(), ProcessSpec::iid_normal()),
        ("linear_0.3".into(), ProcessSpec::ar1(0.3)),
        ("linear_0.5".into(), ProcessSpec::ar1(0.5)),
        ("linear_0.9".into(), ProcessSpec::ar1(0.9)),
        (
            "hoelder".into(),
            ProcessSpec::new(ProcessVariant::HoelderLinear {
                transform: Transform::SignedPower { exponent: 0.5 },
                exponent: 0.5,
                coeffs: geometric(0.5),
                innovation: Innovation::Normal { sd: 1.0 },
            })
            .causal(),
        ),
        (
            "hermite".into(),
            ProcessSpec::new(ProcessVariant::GaussianHermite {
                transform: Transform::HermiteSeries { coeffs: vec![1.0, 0.5] },
                coeffs: geometric(0.5),
            })
            .causal(),
        ),
        (
            "volterra".into(),
            ProcessSpec::new(ProcessVariant::Volterra {
                terms: vec![
                    VolterraTerm { lag_a: 0, lag_b: 1, coeff: 1.0 },
                    VolterraTerm { lag_a: 1, lag_b: 3, coeff: 0.5 },
                    VolterraTerm { lag_a: 0, lag_b: 2, coeff: -0.25 },
                ],
                innovation: Innovation::Normal { sd: 1.0 },
            }),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::mean_var;

    #[test]
    fn identity_filter_reproduces_innovations() {
        let spec = ProcessSpec::new(ProcessVariant::Linear {
            coeffs: Coefficients::Explicit { values: vec![1.0], offset: 0 },
            innovation: Innovation::Normal { sd: 1.0 },
        })
        .with_seed(3);
        let iid = ProcessSpec::iid_normal().with_seed(3);
        assert_eq!(generate(&spec, 50).unwrap(), generate(&iid, 50).unwrap());
    }

    #[test]
    fn seed_determinism_and_sensitivity() {
        let spec = ProcessSpec::ar1(0.5).with_seed(7);
        assert_eq!(generate(&spec, 1000).unwrap(), generate(&spec, 1000).unwrap());
        assert_ne!(generate(&spec, 100).unwrap(), generate(&spec.clone().with_seed(8), 100).unwrap());
    }

    #[test]
    fn prefix_consistency() {
        let p = ProcessSpec::ar1(0.9).with_seed(1).compile().unwrap();
        let long = p.generate_with(p.replication_key(0), 1, 500);
        let mid = p.generate_with(p.replication_key(0), 201, 100);
        assert_eq!(&long[200..300], &mid[..]);
    }

    #[test]
    fn default_window_meets_tail_tolerance() {
        let p = ProcessSpec::ar1(0.5).compile().unwrap();
        assert!(p.tail_bound() < DEFAULT_TAIL_TOLERANCE);
        assert_eq!(p.lags(), 0..=27);
        let two_sided = ProcessSpec::new(ProcessVariant::Linear {
            coeffs: Coefficients::Geometric { phi: 0.5 },
            innovation: Innovation::default(),
        })
        .compile()
        .unwrap();
        assert_eq!(*two_sided.lags().start(), -*two_sided.lags().end());
    }

    #[test]
    fn invalid_coefficients() {
        for variant in [
            ProcessVariant::Linear {
                coeffs: Coefficients::Geometric { phi: 1.0 },
                innovation: Innovation::default(),
            },
            ProcessVariant::Linear {
                coeffs: Coefficients::PowerLaw { scale: 1.0, exponent: 1.0 },
                innovation: Innovation::default(),
            },
            ProcessVariant::Volterra {
                terms: vec![VolterraTerm { lag_a: 2, lag_b: 2, coeff: 1.0 }],
                innovation: Innovation::default(),
            },
            ProcessVariant::HoelderLinear {
                transform: Transform::Abs,
                exponent: 1.5,
                coeffs: Coefficients::Geometric { phi: 0.5 },
                innovation: Innovation::default(),
            },
        ] {
            assert!(matches!(
                ProcessSpec::new(variant).compile(),
                Err(Error::InvalidCoefficients(_))
            ));
        }
    }

    #[test]
    fn coupling_identity_for_linear_process() {
        let spec = ProcessSpec::new(ProcessVariant::Linear {
            coeffs: Coefficients::Geometric { phi: 0.6 },
            innovation: Innovation::Normal { sd: 1.3 },
        })
        .with_seed(11);
        let p = spec.compile().unwrap();
        for i in [-5i64, 0, 3, 40] {
            let (x, y) = generate_coupled(&spec, 1, i).unwrap();
            let eps = p.innovation_at(p.replication_key(0), i);
            let eps_prime = p.innovation_at(p.coupled_key(0), i);
            let want = p.coefficient(-i) * (eps - eps_prime);
            assert!((x.values()[0] - y.values()[0] - want).abs() < 1e-12, "i={i}");
        }
    }

    #[test]
    fn coupling_outside_window_is_identity() {
        let spec = ProcessSpec::ar1(0.5).with_seed(2);
        let (x, y) = generate_coupled(&spec, 5, 1000).unwrap();
        assert_eq!(x, y);
        // causal: X_0 does not depend on eps_1
        let (x, y) = generate_coupled(&spec, 1, 1).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn iid_coupling_touches_one_index() {
        let (x, y) = generate_coupled(&ProcessSpec::iid_normal().with_seed(4), 10, 0).unwrap();
        assert_ne!(x.values()[0], y.values()[0]);
        assert_eq!(&x.values()[1..], &y.values()[1..]);
    }

    #[test]
    fn coupling_locality_matches_window() {
        for (_, spec) in builtin_suite() {
            let p = spec.compile().unwrap();
            let i = 7;
            let (x, y) = p.generate_coupled_with(p.replication_key(3), p.coupled_key(3), -60, 160, i);
            for (k, (a, b)) in x.iter().zip(&y).enumerate() {
                let t = -60 + k as i64;
                if a != b {
                    assert!(p.lags().contains(&(t - i)), "t={t} outside window");
                }
            }
        }
    }

    #[test]
    fn hermite_square_process_coefficients() {
        let e = hermite_expand(|x| x * x - 1.0, 8, &[]).unwrap();
        assert!((e.coefficient(2) - 1.0).abs() < 1e-12);
        let p = ProcessSpec::new(ProcessVariant::GaussianHermite {
            transform: Transform::Square,
            coeffs: Coefficients::Geometric { phi: 0.5 },
        })
        .compile()
        .unwrap();
        assert!((p.analytic_moment(1).unwrap() - 1.0).abs() < 1e-12);
        assert!((p.analytic_moment(2).unwrap() - 3.0).abs() < 1e-11);
    }

    #[test]
    fn stationarity_halves_agree() {
        let n = 100_000;
        for (name, spec) in builtin_suite() {
            let x = generate(&spec.with_seed(21), n).unwrap();
            let (a, b) = x.values().split_at(n / 2);
            let (ma, va) = mean_var(a);
            let (mb, vb) = mean_var(b);
            // standard errors inflated by a conservative long-run factor
            let lr = 20.0;
            let se_mean = (lr * (va + vb) / (n as f64 / 2.0)).sqrt();
            assert!((ma - mb).abs() < 4.0 * se_mean, "{name}: means {ma} vs {mb}");
            let fourth = a.iter().map(|v| (v - ma).powi(4)).sum::<f64>() / a.len() as f64;
            let se_var = (lr * 2.0 * (fourth - va * va).max(0.0) / (n as f64 / 2.0)).sqrt();
            assert!((va - vb).abs() < 4.0 * se_var, "{name}: variances {va} vs {vb}");
        }
    }

    #[test]
    fn latent_gaussian_has_unit_variance() {
        let spec = ProcessSpec::new(ProcessVariant::GaussianHermite {
            transform: Transform::Identity,
            coeffs: Coefficients::Geometric { phi: 0.7 },
        })
        .causal()
        .with_seed(5);
        let n = 100_000;
        let y = generate(&spec, n).unwrap();
        let (_, v) = mean_var(y.values());
        // long-run variance of Y_t^2 for AR(1) rho = 0.7: 2 (1 + rho^2) / (1 - rho^2)
        let rho2: f64 = 0.49;
        let lr = 2.0 * (1.0 + rho2) / (1.0 - rho2);
        assert!((v - 1.0).abs() < 4.0 * (lr / n as f64).sqrt(), "{v}");
    }

    #[test]
    fn analytic_moments_match_sampling() {
        for (name, spec) in builtin_suite() {
            let p = spec.with_seed(9).compile().unwrap();
            let x = p.generate_with(p.replication_key(0), 1, 200_000);
            for k in 1..=2u32 {
                if let Some(m) = p.analytic_moment(k) {
                    let vals: Vec<f64> = x.iter().map(|v| v.powi(k as i32)).collect();
                    let (mean, var) = mean_var(&vals);
                    let se = (20.0 * var / vals.len() as f64).sqrt();
                    assert!((mean - m).abs() < 4.0 * se, "{name} k={k}: {mean} vs {m}");
                }
            }
        }
    }

    #[test]
    fn spec_json_round_trip() {
        for (_, spec) in builtin_suite() {
            let json = serde_json::to_string(&spec).unwrap();
            let back: ProcessSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(back, spec);
        }
        let parsed: ProcessSpec = serde_json::from_str(
            r#"{"variant":{"kind":"linear","coeffs":{"kind":"geometric","phi":0.5}},"causal":true,"seed":7}"#,
        )
        .unwrap();
        assert_eq!(parsed, ProcessSpec::ar1(0.5).with_seed(7));
    }
}
