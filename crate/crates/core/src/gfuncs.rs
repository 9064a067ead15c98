//! Moment functions `g`, their gradients, and the smooth truncation `eta`.
//!
//! A [`GSpec`] bundles a [`MomentFunction`] with the population moment
//! vector `v0` and a truncation radius `a`. Construction subtracts `g(v0)`
//! so the centred function vanishes at `v0`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::unit_open;

/// A function of the first `m` raw moments with an analytic gradient.
pub trait MomentFunction: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn order(&self) -> usize;

    /// `None` outside the domain.
    fn value(&self, x: &[f64]) -> Option<f64>;

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>>;

    /// Smallest distance from `x` to the domain boundary when moving along
    /// a single coordinate axis. `None` means the domain is unbounded.
    fn axis_boundary_distance(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GPreset {
    /// `log(x2 - x1^2)`
    LogVariance,
    /// `(x3 - 3 x1 x2 + 2 x1^3) / (x2 - x1^2)^(3/2)`
    Skewness,
    /// `(x4 - 4 x1 x3 + 6 x1^2 x2 - 3 x1^4) / (x2 - x1^2)^2 - 3`
    ExcessKurtosis,
    /// `log(x2) * 1{x2 > 0}`, the non-integrable example.
    LogSecondMoment,
    /// `x1`
    Mean,
}

impl GPreset {
    pub const ALL: [GPreset; 5] = [
        GPreset::LogVariance,
        GPreset::Skewness,
        GPreset::ExcessKurtosis,
        GPreset::LogSecondMoment,
        GPreset::Mean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GPreset::LogVariance => "log_variance",
            GPreset::Skewness => "skewness",
            GPreset::ExcessKurtosis => "excess_kurtosis",
            GPreset::LogSecondMoment => "log_second_moment",
            GPreset::Mean => "mean",
        }
    }

    pub fn order(self) -> usize {
        match self {
            GPreset::LogVariance | GPreset::LogSecondMoment => 2,
            GPreset::Skewness => 3,
            GPreset::ExcessKurtosis => 4,
            GPreset::Mean => 1,
        }
    }

    pub fn function(self) -> Arc<dyn MomentFunction> {
        match self {
            GPreset::Mean => Arc::new(LinearG::new(vec![1.0])),
            other => Arc::new(PresetG(other)),
        }
    }
}

impl std::str::FromStr for GPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GPreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownName(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy)]
struct PresetG(GPreset);

fn central_variance(x: &[f64]) -> f64 {
    x[1] - x[0] * x[0]
}

impl MomentFunction for PresetG {
    fn name(&self) -> String {
        self.0.name().to_string()
    }

    fn order(&self) -> usize {
        self.0.order()
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        match self.0 {
            GPreset::LogSecondMoment => Some(if x[1] > 0.0 { x[1].ln() } else { 0.0 }),
            preset => {
                let s = central_variance(x);
                if !(s > 0.0) {
                    return None;
                }
                Some(match preset {
                    GPreset::LogVariance => s.ln(),
                    GPreset::Skewness => {
                        let num = x[2] - 3.0 * x[0] * x[1] + 2.0 * x[0].powi(3);
                        num / s.powf(1.5)
                    }
                    GPreset::ExcessKurtosis => {
                        let num = x[3] - 4.0 * x[0] * x[2] + 6.0 * x[0] * x[0] * x[1]
                            - 3.0 * x[0].powi(4);
                        num / (s * s) - 3.0
                    }
                    GPreset::LogSecondMoment | GPreset::Mean => unreachable!(),
                })
            }
        }
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        if self.0 == GPreset::LogSecondMoment {
            return Some(vec![0.0, if x[1] > 0.0 { 1.0 / x[1] } else { 0.0 }]);
        }
        let s = central_variance(x);
        if !(s > 0.0) {
            return None;
        }
        // d s / d x1 = -2 x1, d s / d x2 = 1
        let ds = [-2.0 * x[0], 1.0];
        Some(match self.0 {
            GPreset::LogVariance => vec![ds[0] / s, ds[1] / s],
            GPreset::Skewness => {
                let num = x[2] - 3.0 * x[0] * x[1] + 2.0 * x[0].powi(3);
                let dnum = [-3.0 * x[1] + 6.0 * x[0] * x[0], -3.0 * x[0], 1.0];
                let p = s.powf(-1.5);
                let q = -1.5 * num * s.powf(-2.5);
                vec![dnum[0] * p + q * ds[0], dnum[1] * p + q * ds[1], dnum[2] * p]
            }
            GPreset::ExcessKurtosis => {
                let num = x[3] - 4.0 * x[0] * x[2] + 6.0 * x[0] * x[0] * x[1] - 3.0 * x[0].powi(4);
                let dnum = [
                    -4.0 * x[2] + 12.0 * x[0] * x[1] - 12.0 * x[0].powi(3),
                    6.0 * x[0] * x[0],
                    -4.0 * x[0],
                    1.0,
                ];
                let p = 1.0 / (s * s);
                let q = -2.0 * num / (s * s * s);
                vec![
                    dnum[0] * p + q * ds[0],
                    dnum[1] * p + q * ds[1],
                    dnum[2] * p,
                    dnum[3] * p,
                ]
            }
            GPreset::LogSecondMoment | GPreset::Mean => unreachable!(),
        })
    }

    fn axis_boundary_distance(&self, x: &[f64]) -> Option<f64> {
        if self.0 == GPreset::LogSecondMoment {
            return Some(x[1].max(0.0));
        }
        // boundary x2 = x1^2: along x2 the gap is the variance, along x1 it
        // is sqrt(x2) - |x1|
        let s = central_variance(x);
        let along_x1 = x[1].max(0.0).sqrt() - x[0].abs();
        Some(s.min(along_x1).max(0.0))
    }
}

/// `g(x) = c . x`
#[derive(Debug, Clone, PartialEq)]
pub struct LinearG {
    coeffs: Vec<f64>,
}

impl LinearG {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }
}

impl MomentFunction for LinearG {
    fn name(&self) -> String {
        if self.coeffs == [1.0] {
            "mean".into()
        } else {
            format!("linear{:?}", self.coeffs)
        }
    }

    fn order(&self) -> usize {
        self.coeffs.len()
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        Some(self.coeffs.iter().zip(x).map(|(c, v)| c * v).sum())
    }

    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        Some(self.coeffs.clone())
    }
}

/// Radial quintic bump: 1 within distance `a` of `v0`, 0 beyond `2a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaSpec {
    pub v0: Vec<f64>,
    pub a: f64,
}

/// `6s^5 - 15s^4 + 10s^3`, clamped to [0, 1].
fn smoothstep5(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (s * (6.0 * s - 15.0) + 10.0)
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub fn eta(x: &[f64], spec: &EtaSpec) -> f64 {
    if spec.a.is_infinite() {
        return 1.0;
    }
    let r = distance(x, &spec.v0);
    smoothstep5((2.0 * spec.a - r) / spec.a)
}

/// Centred moment function with its truncation data.
#[derive(Clone)]
pub struct GSpec {
    function: Arc<dyn MomentFunction>,
    v0: Vec<f64>,
    a: f64,
    offset: f64,
    v0_estimated: bool,
}

impl fmt::Debug for GSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GSpec")
            .field("g", &self.function.name())
            .field("v0", &self.v0)
            .field("a", &self.a)
            .field("offset", &self.offset)
            .field("v0_estimated", &self.v0_estimated)
            .finish()
    }
}

/// Default radius: half the axis distance from `v0` to the domain boundary,
/// divided by `sqrt(m)`.
pub fn default_radius(function: &dyn MomentFunction, v0: &[f64]) -> f64 {
    match function.axis_boundary_distance(v0) {
        Some(d) => d / (2.0 * (v0.len() as f64).sqrt()),
        None => f64::INFINITY,
    }
}

impl GSpec {
    pub fn new(function: Arc<dyn MomentFunction>, v0: Vec<f64>, a: Option<f64>) -> Result<Self> {
        if v0.len() != function.order() {
            return Err(Error::MomentOrderMismatch {
                expected: function.order(),
                actual: v0.len(),
            });
        }
        if v0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("v0 must be finite, got {v0:?}")));
        }
        let offset = function.value(&v0).ok_or_else(|| {
            Error::OutsideDomain(format!("{} is not defined at v0 = {v0:?}", function.name()))
        })?;
        let a = match a {
            Some(a) if a > 0.0 => a,
            Some(a) => return Err(Error::InvalidParameter(format!("radius a must be positive, got {a}"))),
            None => default_radius(function.as_ref(), &v0),
        };
        if !(a > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "v0 = {v0:?} sits on the domain boundary of {}",
                function.name()
            )));
        }
        Ok(Self {
            function,
            v0,
            a,
            offset,
            v0_estimated: false,
        })
    }

    /// Preset constructor. Presets built on the central variance require
    /// `v2 - v1^2 > 0`.
    pub fn preset(preset: GPreset, v0: Vec<f64>, a: Option<f64>) -> Result<Self> {
        if v0.len() != preset.order() {
            return Err(Error::MomentOrderMismatch {
                expected: preset.order(),
                actual: v0.len(),
            });
        }
        if matches!(
            preset,
            GPreset::LogVariance | GPreset::Skewness | GPreset::ExcessKurtosis
        ) {
            let variance = v0[1] - v0[0] * v0[0];
            if !(variance > 0.0) {
                return Err(Error::DegenerateMoments { variance });
            }
        }
        Self::new(preset.function(), v0, a)
    }

    /// Marks `v0` as a plug-in estimate rather than a known null value.
    pub fn with_estimated_v0(mut self, estimated: bool) -> Self {
        self.v0_estimated = estimated;
        self
    }

    pub fn name(&self) -> String {
        self.function.name()
    }

    pub fn order(&self) -> usize {
        self.function.order()
    }

    pub fn v0(&self) -> &[f64] {
        &self.v0
    }

    pub fn radius(&self) -> f64 {
        self.a
    }

    /// `g(v0)` of the uncentred function.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Always true once constructed; kept for reports.
    pub fn centered(&self) -> bool {
        self.value(&self.v0).map_or(false, |v| v.abs() < 1e-12)
    }

    pub fn v0_estimated(&self) -> bool {
        self.v0_estimated
    }

    pub fn function(&self) -> &Arc<dyn MomentFunction> {
        &self.function
    }

    pub fn eta_spec(&self) -> EtaSpec {
        EtaSpec {
            v0: self.v0.clone(),
            a: self.a,
        }
    }

    pub fn value(&self, x: &[f64]) -> Option<f64> {
        self.function.value(x).map(|v| v - self.offset)
    }

    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.function.gradient(x)
    }

    /// Gradient at `v0`, the weights of the linearised statistic.
    pub fn gradient_at_v0(&self) -> Result<Vec<f64>> {
        self.gradient(&self.v0)
            .ok_or_else(|| Error::OutsideDomain(format!("gradient undefined at v0 = {:?}", self.v0)))
    }

    pub fn eta(&self, x: &[f64]) -> f64 {
        if self.a.is_infinite() {
            return 1.0;
        }
        smoothstep5((2.0 * self.a - distance(x, &self.v0)) / self.a)
    }

    /// `(g * eta)(x)`; zero wherever `eta` vanishes, even outside the domain.
    pub fn truncated_value(&self, x: &[f64]) -> Option<f64> {
        let w = self.eta(x);
        if w == 0.0 {
            Some(0.0)
        } else {
            self.value(x).map(|v| v * w)
        }
    }

    /// Largest difference quotient of `g * eta` over `pairs` random pairs
    /// drawn uniformly from the ball of radius `3a` around `v0`.
    pub fn lipschitz_estimate(&self, pairs: usize, seed: u64) -> Result<f64> {
        let radius = if self.a.is_finite() { 3.0 * self.a } else { 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = self.order();
        let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            loop {
                let p: Vec<f64> = (0..m)
                    .map(|_| (2.0 * unit_open(rng.next_u64()) - 1.0) * radius)
                    .collect();
                if p.iter().map(|c| c * c).sum::<f64>() <= radius * radius {
                    return p.iter().zip(&self.v0).map(|(d, v)| v + d).collect();
                }
            }
        };
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let x = sample(&mut rng);
            let y = sample(&mut rng);
            let (gx, gy) = match (self.truncated_value(&x), self.truncated_value(&y)) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::OutsideDomain(format!(
                        "g undefined inside the truncation support near {x:?} / {y:?}"
                    )))
                }
            };
            let d = distance(&x, &y);
            if d > 0.0 {
                worst = worst.max((gx - gy).abs() / d);
            }
        }
        Ok(worst)
    }
}

/// Maximum componentwise error between the analytic gradient and central
/// finite differences, relative to `max(1, |analytic|)`.
pub fn gradient_check(g: &GSpec, point: &[f64], step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    if point.len() != g.order() {
        return Err(Error::MomentOrderMismatch {
            expected: g.order(),
            actual: point.len(),
        });
    }
    let analytic = g
        .gradient(point)
        .ok_or_else(|| Error::OutsideDomain(format!("gradient undefined at {point:?}")))?;
    let mut worst: f64 = 0.0;
    let mut probe = point.to_vec();
    for k in 0..point.len() {
        probe[k] = point[k] + step;
        let up = g.value(&probe);
        probe[k] = point[k] - step;
        let down = g.value(&probe);
        probe[k] = point[k];
        let (up, down) = match (up, down) {
            (Some(u), Some(d)) => (u, d),
            _ => {
                return Err(Error::OutsideDomain(format!(
                    "finite-difference stencil at {point:?} with step {step} leaves the domain"
                )))
            }
        };
        let fd = (up - down) / (2.0 * step);
        worst = worst.max((fd - analytic[k]).abs() / analytic[k].abs().max(1.0));
    }
    Ok(worst)
}

type Factory = Arc<dyn Fn() -> Arc<dyn MomentFunction> + Send + Sync>;

/// Name-keyed registration point for moment functions, used by the CLI.
#[derive(Clone)]
pub struct GRegistry {
    entries: BTreeMap<String, Factory>,
}

impl Default for GRegistry {
    fn default() -> Self {
        let mut reg = Self {
            entries: BTreeMap::new(),
        };
        for preset in GPreset::ALL {
            reg.register(preset.name(), move || preset.function());
        }
        reg
    }
}

impl GRegistry {
    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn() -> Arc<dyn MomentFunction> + Send + Sync + 'static,
    {
        self.entries.insert(name.to_string(), Arc::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn function(&self, name: &str) -> Result<Arc<dyn MomentFunction>> {
        self.entries
            .get(name)
            .map(|f| f())
            .ok_or_else(|| Error::UnknownName(name.to_string()))
    }

    pub fn build(&self, name: &str, v0: Vec<f64>, a: Option<f64>) -> Result<GSpec> {
        match name.parse::<GPreset>() {
            Ok(preset) if self.entries.contains_key(name) => GSpec::preset(preset, v0, a),
            _ => GSpec::new(self.function(name)?, v0, a),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_variance_vanishes_at_unit_moments() {
        let g = GSpec::preset(GPreset::LogVariance, vec![0.0, 1.0], None).unwrap();
        assert_eq!(g.offset(), 0.0);
        assert_eq!(g.value(&[0.0, 1.0]), Some(0.0));
        assert!(g.centered());
    }

    #[test]
    fn skewness_symmetric_moments() {
        let g = GSpec::preset(GPreset::Skewness, vec![0.0, 1.0, 0.0], None).unwrap();
        assert_eq!(g.offset(), 0.0);
    }

    #[test]
    fn kurtosis_gaussian_moments() {
        let raw = PresetG(GPreset::ExcessKurtosis).value(&[0.0, 1.0, 0.0, 3.0]).unwrap();
        // (3 - 0 + 0 - 0) / 1 = 3 before subtracting the Gaussian value
        assert_eq!(raw + 3.0, 3.0);
        let g = GSpec::preset(GPreset::ExcessKurtosis, vec![0.0, 1.0, 0.0, 3.0], None).unwrap();
        assert_eq!(g.value(&[0.0, 1.0, 0.0, 3.0]), Some(0.0));
    }

    #[test]
    fn centering_applies_to_non_gaussian_v0() {
        // uniform(-1,1): variance 1/3, fourth moment 1/5, kurtosis 9/5
        let v0 = vec![0.0, 1.0 / 3.0, 0.0, 0.2];
        let g = GSpec::preset(GPreset::ExcessKurtosis, v0.clone(), None).unwrap();
        assert!((g.offset() - (1.8 - 3.0)).abs() < 1e-12);
        assert!(g.value(&v0).unwrap().abs() < 1e-12);
        assert!(g.centered());
        let raw = GPreset::ExcessKurtosis.function().gradient(&[0.1, 0.5, 0.05, 0.4]).unwrap();
        assert_eq!(g.gradient(&[0.1, 0.5, 0.05, 0.4]).unwrap(), raw);
    }

    #[test]
    fn degenerate_moments_rejected() {
        assert!(matches!(
            GSpec::preset(GPreset::LogVariance, vec![1.0, 1.0], None),
            Err(Error::DegenerateMoments { .. })
        ));
        assert!(matches!(
            GSpec::preset(GPreset::Skewness, vec![0.0, 1.0], None),
            Err(Error::MomentOrderMismatch { expected: 3, actual: 2 })
        ));
    }

    #[test]
    fn eta_plateaus_and_midpoint() {
        let spec = EtaSpec {
            v0: vec![0.0, 1.0],
            a: 0.5,
        };
        assert_eq!(eta(&[0.0, 1.0], &spec), 1.0);
        assert_eq!(eta(&[1.5, 1.0], &spec), 0.0);
        assert_eq!(eta(&[0.0, 1.0 + 0.75], &spec), 0.5);
        assert_eq!(eta(&[0.5, 1.0], &spec), 1.0);
        assert_eq!(eta(&[1.0, 1.0], &spec), 0.0);
    }

    #[test]
    fn eta_is_monotone_in_radius() {
        let spec = EtaSpec { v0: vec![0.0], a: 1.0 };
        let mut prev = 1.0;
        for k in 0..=300 {
            let r = k as f64 * 0.01;
            let e = eta(&[r], &spec);
            assert!(e <= prev && (0.0..=1.0).contains(&e));
            prev = e;
        }
    }

    #[test]
    fn gradient_check_presets() {
        let g = GSpec::preset(GPreset::LogVariance, vec![0.0, 1.0], None).unwrap();
        assert!(gradient_check(&g, &[0.0, 1.0], 1e-6).unwrap() < 1e-6);
        let g = GSpec::preset(GPreset::Skewness, vec![0.0, 1.0, 0.0], None).unwrap();
        assert!(gradient_check(&g, &[0.1, 1.2, 0.3], 1e-6).unwrap() < 1e-5);
        let g = GSpec::preset(GPreset::ExcessKurtosis, vec![0.0, 1.0, 0.0, 3.0], None).unwrap();
        assert!(gradient_check(&g, &[0.1, 1.2, 0.3, 3.5], 1e-6).unwrap() < 1e-5);
        let g = GSpec::preset(GPreset::LogSecondMoment, vec![0.0, 2.0], None).unwrap();
        assert!(gradient_check(&g, &[0.3, 1.5], 1e-6).unwrap() < 1e-6);
    }

    #[test]
    fn gradient_check_linear_is_exact() {
        let g = GSpec::new(Arc::new(LinearG::new(vec![0.5, -2.0, 3.0])), vec![0.0; 3], None).unwrap();
        assert!(gradient_check(&g, &[0.3, 1.1, -0.7], 1e-3).unwrap() < 1e-10);
    }

    #[test]
    fn gradient_check_near_boundary_fails() {
        let g = GSpec::preset(GPreset::LogVariance, vec![0.0, 1.0], None).unwrap();
        assert!(matches!(
            gradient_check(&g, &[0.0, 1e-8], 1e-6),
            Err(Error::OutsideDomain(_))
        ));
    }

    #[test]
    fn default_radius_matches_axis_rule() {
        let g = GSpec::preset(GPreset::LogVariance, vec![0.0, 1.0], None).unwrap();
        assert!((g.radius() - 1.0 / (2.0 * 2f64.sqrt())).abs() < 1e-15);
        let g = GSpec::new(Arc::new(LinearG::new(vec![1.0])), vec![0.0], None).unwrap();
        assert!(g.radius().is_infinite());
        assert_eq!(g.truncated_value(&[1e9]), Some(1e9));
    }

    #[test]
    fn presets_are_lipschitz_after_truncation() {
        for (preset, v0) in [
            (GPreset::LogVariance, vec![0.0, 1.0]),
            (GPreset::Skewness, vec![0.0, 1.0, 0.0]),
            (GPreset::ExcessKurtosis, vec![0.0, 1.0, 0.0, 3.0]),
        ] {
            let g = GSpec::preset(preset, v0, None).unwrap();
            let l = g.lipschitz_estimate(100_000, 11).unwrap();
            assert!(l.is_finite() && l > 0.0 && l < 1e3, "{preset:?}: {l}");
        }
    }

    #[test]
    fn registry_resolves_presets_and_custom() {
        let mut reg = GRegistry::default();
        assert!(reg.names().any(|n| n == "skewness"));
        reg.register("double_mean", || Arc::new(LinearG::new(vec![2.0])));
        let g = reg.build("double_mean", vec![1.0], None).unwrap();
        assert_eq!(g.value(&[3.0]), Some(4.0));
        assert!(matches!(reg.build("nope", vec![], None), Err(Error::UnknownName(_))));
        assert!(reg.build("log_variance", vec![0.0, 1.0], None).is_ok());
    }
}
