//! Monte Carlo validation of the two central limit theorems, empirical
//! size of the constancy test, and the non-integrability demonstration.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    centering, check_centering_noise, gamma_squared, sigma_squared, CenteringInputs, CenteringMethod, LimitLaw,
};
use crate::blocks::{local_moments, local_statistics, partition, Series};
use crate::dependence::{check_summability, dependence_profile, Verdict, DEFAULT_I_MAX};
use crate::error::{Error, Result};
use crate::gfuncs::{GPreset, GSpec};
use crate::gof::{anderson_darling, ks_distance, normal_cdf_with_variance};
use crate::numeric::{mean_stderr, mean_var, two_sided_p_value};
use crate::processes::{counterexample_log_atom, Innovation, ProcessSpec, ProcessVariant};
use crate::rng::{replication_stream, role, CounterRng};
use crate::ustat::{gamma_n_squared, hoeffding, u_statistic, Distribution, KernelSpec};

/// Nominal levels at which rejection rates are reported.
pub const NOMINAL_LEVELS: [f64; 3] = [0.01, 0.05, 0.10];
/// Smallest replication count for a published report.
pub const MIN_PUBLISHED_REPLICATIONS: usize = 200;
/// `b / l` above which a finite-sample warning is attached.
pub const RATIO_WARNING: f64 = 0.2;
/// Replications of coupled pairs for the summability precondition.
const SUMMABILITY_REPLICATIONS: usize = 1000;

/// Aggregate of one Monte Carlo validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub replications: usize,
    pub seed: u64,
    /// Variance of the normal reference law of `statistics`.
    pub reference_variance: f64,
    pub statistics: Vec<f64>,
    pub ks_distance: f64,
    pub anderson_darling: f64,
    /// Level (formatted) to empirical rejection rate.
    pub rejection_rates: BTreeMap<String, f64>,
    pub mean: f64,
    pub variance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit_law: Option<LimitLaw>,
    pub diagnostics: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl McReport {
    fn from_statistics(statistics: Vec<f64>, reference_variance: f64, seed: u64) -> Self {
        let cdf = normal_cdf_with_variance(reference_variance);
        let (mean, variance) = mean_var(&statistics);
        let mut report = Self {
            replications: statistics.len(),
            seed,
            reference_variance,
            ks_distance: ks_distance(&statistics, &cdf),
            anderson_darling: anderson_darling(&statistics, &cdf),
            rejection_rates: BTreeMap::new(),
            mean,
            variance,
            limit_law: None,
            diagnostics: BTreeMap::new(),
            warnings: Vec::new(),
            statistics,
        };
        for alpha in NOMINAL_LEVELS {
            let rate = report.rejection_rate(alpha);
            report.rejection_rates.insert(format!("{alpha:.2}"), rate);
        }
        if report.replications < MIN_PUBLISHED_REPLICATIONS {
            report.warnings.push(format!(
                "{} replications is below the {MIN_PUBLISHED_REPLICATIONS} needed for a published figure",
                report.replications
            ));
        }
        report
    }

    /// Two-sided p-values against the reference law.
    pub fn p_values(&self) -> Vec<f64> {
        let sd = self.reference_variance.sqrt();
        self.statistics.iter().map(|s| two_sided_p_value(s / sd)).collect()
    }

    /// Fraction of replications with p-value below `alpha`; level one
    /// rejects every replication.
    pub fn rejection_rate(&self, alpha: f64) -> f64 {
        rejection_rate(&self.p_values(), alpha)
    }

    /// One line per replication, header `statistic`.
    pub fn statistics_csv(&self) -> String {
        let mut out = String::from("statistic\n");
        for s in &self.statistics {
            out.push_str(&format!("{s:.16e}\n"));
        }
        out
    }
}

/// Fraction of `p_values` strictly below `alpha` (all of them at `alpha >= 1`).
pub fn rejection_rate(p_values: &[f64], alpha: f64) -> f64 {
    if p_values.is_empty() {
        return 0.0;
    }
    if alpha >= 1.0 {
        return 1.0;
    }
    p_values.iter().filter(|&&p| p < alpha).count() as f64 / p_values.len() as f64
}

fn sample_from(dist: &Distribution, rng: &mut CounterRng) -> f64 {
    match dist {
        Distribution::Normal { mean, sd } => mean + sd * rng.normal(),
        Distribution::Discrete { values, probs } => {
            let u = rng.uniform();
            let mut acc = 0.0;
            for (v, p) in values.iter().zip(probs) {
                acc += p;
                if u < acc {
                    return *v;
                }
            }
            *values.last().unwrap()
        }
        Distribution::Empirical { sample } => {
            let u = rng.uniform();
            sample[((u * sample.len() as f64) as usize).min(sample.len() - 1)]
        }
    }
}

/// Replications of `sqrt(b) (U_n - theta_n) / gamma_n` for a row-wise
/// i.i.d. array from `dist`; the reference law is `N(0, 4)`.
pub fn validate_theorem1(
    dist: &Distribution,
    h: &KernelSpec,
    blocks: usize,
    replications: usize,
    seed: u64,
) -> Result<McReport> {
    if blocks < 2 {
        return Err(Error::TooFewBlocks(blocks));
    }
    let gamma_sq = gamma_n_squared(h, dist)?;
    let theta = hoeffding(h, dist)?.theta;
    let scale = (blocks as f64).sqrt() / gamma_sq.sqrt();
    let stats: Result<Vec<f64>> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = CounterRng::new(seed, replication_stream(r, role::PRIMARY));
            rng.seek(0);
            let w: Vec<f64> = (0..blocks).map(|_| sample_from(dist, &mut rng)).collect();
            Ok(scale * (u_statistic(&w, h)? - theta))
        })
        .collect();
    let mut report = McReport::from_statistics(stats?, 4.0, seed);
    report.diagnostics.insert("theta".into(), theta);
    report.diagnostics.insert("gamma_n_sq".into(), gamma_sq);
    report.diagnostics.insert("blocks".into(), blocks as f64);
    Ok(report)
}

/// Settings of a dependent-case validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Config {
    pub block_length: usize,
    pub blocks: usize,
    pub replications: usize,
    pub centering: CenteringMethod,
    /// Known `sigma^2`; computed from the spec when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_sq: Option<f64>,
    /// Replications for Monte Carlo centerings.
    pub centering_replications: usize,
    /// Replications for a simulated `sigma^2`.
    #[serde(default = "default_sigma_replications")]
    pub sigma_replications: usize,
    /// Use the eta-truncated block statistics.
    #[serde(default = "default_true")]
    pub truncated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Value for [`CenteringMethod::Supplied`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supplied_centering: Option<f64>,
}

fn default_true() -> bool {
    true
}

fn default_sigma_replications() -> usize {
    200
}

impl Theorem2Config {
    pub fn new(block_length: usize, blocks: usize, replications: usize, centering: CenteringMethod) -> Self {
        Self {
            block_length,
            blocks,
            replications,
            centering,
            sigma_sq: None,
            centering_replications: 20_000,
            sigma_replications: default_sigma_replications(),
            truncated: true,
            kappa: None,
            supplied_centering: None,
        }
    }
}

/// Seed of an auxiliary simulation derived from the run seed, so that
/// centering and `sigma^2` draws never share streams with the replications.
fn derived_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Summability of the coefficients of `X^k, k = 1..=m` under the `i^2`
/// weight, where the window is small enough to evaluate.
fn summability_verdict(spec: &ProcessSpec, m: usize) -> Result<(Verdict, f64)> {
    let process = spec.compile()?;
    let lags = process.lags();
    let reach = lags.start().abs().max(lags.end().abs()).min(DEFAULT_I_MAX);
    let profiles: Result<Vec<_>> = (1..=m as u32)
        .map(|k| dependence_profile(spec, k, 2.0, reach, SUMMABILITY_REPLICATIONS, false))
        .collect();
    let report = check_summability(&process, &profiles?, crate::dependence::SummabilityWeight::Square);
    Ok((report.verdict, report.total))
}

/// Replications of `sqrt(b) (U_n - centering) / (2 gamma)` for series
/// generated from `spec`; the reference law is `N(0, 1)`.
pub fn validate_theorem2(spec: &ProcessSpec, g: &GSpec, h: &KernelSpec, config: &Theorem2Config) -> Result<McReport> {
    let (l, b) = (config.block_length, config.blocks);
    if b < 2 {
        return Err(Error::TooFewBlocks(b));
    }
    if l == 0 {
        return Err(Error::InvalidBlockLength(l));
    }
    let mut warnings = Vec::new();
    let ratio = b as f64 / l as f64;
    if ratio > RATIO_WARNING {
        warnings.push(format!("b/l = {ratio:.3} exceeds {RATIO_WARNING}"));
    }
    let (verdict, summability_total) = summability_verdict(spec, g.order())?;
    if verdict == Verdict::Inconclusive {
        warnings.push("summability of the dependence coefficients is inconclusive".into());
    }

    let (sigma_sq, sigma_stderr) = match config.sigma_sq {
        Some(s) => (s, 0.0),
        None => {
            let aux = spec.clone().with_seed(derived_seed(spec.seed, 1));
            let est = sigma_squared(&aux, g, None, config.sigma_replications)?;
            if est.negative {
                warnings.push(format!("sigma^2 estimate {} is negative", est.estimate.value));
            }
            (est.positive()?, est.estimate.stderr)
        }
    };
    let sigma = sigma_sq.sqrt();
    let gamma_sq = gamma_squared(h, sigma)?;

    let centering_spec = spec.clone().with_seed(derived_seed(spec.seed, 2));
    let inputs = CenteringInputs {
        kernel: h,
        sigma: Some(sigma),
        spec: Some(&centering_spec),
        g: Some(g),
        block_length: l,
        blocks: b,
        replications: config.centering_replications,
        supplied: config.supplied_centering,
    };
    let center = centering(config.centering, &inputs)?;
    check_centering_noise(center.stderr, gamma_sq, b)?;

    let process = spec.compile()?;
    let scale = (b as f64).sqrt() / (2.0 * gamma_sq.sqrt());
    let stats: Result<Vec<f64>> = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| {
            let series = Series::new(process.generate_with(process.replication_key(r), 1, l * b))?;
            let scheme = partition(&series, l)?;
            let moments = local_moments(&series, &scheme, g.order())?;
            let w = local_statistics(&moments, g, config.truncated)?;
            Ok(scale * (u_statistic(&w, h)? - center.value))
        })
        .collect();
    let mut report = McReport::from_statistics(stats?, 1.0, spec.seed);
    report.limit_law = Some(LimitLaw {
        sigma_sq,
        gamma_sq,
        centering_method: config.centering,
        centering_value: center.value,
        centering_stderr: center.stderr,
        kappa: (config.centering == CenteringMethod::ZnExpectation)
            .then(|| config.kappa.unwrap_or(crate::asymptotics::DEFAULT_KAPPA)),
    });
    let d = &mut report.diagnostics;
    d.insert("sigma_sq_stderr".into(), sigma_stderr);
    d.insert("summability_partial_sum".into(), summability_total);
    d.insert("block_ratio".into(), ratio);
    report.warnings.extend(warnings);
    Ok(report)
}

/// Empirical size of the dependent-case test at level `alpha`.
pub fn empirical_size(spec: &ProcessSpec, g: &GSpec, h: &KernelSpec, config: &Theorem2Config, alpha: f64) -> Result<f64> {
    Ok(validate_theorem2(spec, g, h, config)?.rejection_rate(alpha))
}

/// Mean of `|W_{n,1}|` over replications for one block length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthEntry {
    pub block_length: usize,
    pub untruncated_mean_abs: f64,
    pub untruncated_stderr: f64,
    pub truncated_mean_abs: f64,
    pub truncated_stderr: f64,
    /// Natural log of a lower bound on the untruncated `E|W_{n,1}|` from
    /// the events where every atom of the block has index at least `K`.
    pub log_expectation_lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub entries: Vec<GrowthEntry>,
    /// Untruncated means increase strictly along the block lengths and
    /// the last exceeds the first fivefold.
    pub untruncated_grows: bool,
    /// Truncated means stay within a factor two of each other.
    pub truncated_stable: bool,
    pub radius: f64,
}

/// `max_K [exp(K) - (K - 1) l ln 2] + ln sqrt(l)`, the log of
/// `sqrt(l) * P(all k >= K) * exp(exp K)` maximised over `K <= max_k`.
fn log_lower_bound(block_length: usize, max_k: u32) -> f64 {
    (1..=max_k)
        .map(|k| -counterexample_log_atom(k) - (k - 1) as f64 * block_length as f64 * std::f64::consts::LN_2)
        .fold(f64::NEG_INFINITY, f64::max)
        + 0.5 * (block_length as f64).ln()
}

/// The non-integrable example: `W_{n,1} = sqrt(l) log x2` over the first
/// block of the pathological process, next to the eta-truncated statistic
/// centred at the population second moment.
pub fn counterexample_growth(
    block_lengths: &[usize],
    replications: usize,
    radius: f64,
    seed: u64,
) -> Result<CounterexampleReport> {
    let max_k = 30;
    let spec = ProcessSpec::new(ProcessVariant::Pathological).with_seed(seed);
    let process = spec.compile()?;
    let v2 = Innovation::Counterexample { max_k }.raw_moment(2);
    let untruncated = GSpec::preset(GPreset::LogSecondMoment, vec![0.0, 1.0], None)?;
    let truncated = GSpec::preset(GPreset::LogSecondMoment, vec![0.0, v2], Some(radius))?;
    let mut entries = Vec::new();
    for &l in block_lengths {
        let pairs: Result<Vec<(f64, f64)>> = (0..replications as u64)
            .into_par_iter()
            .map(|r| {
                let series = Series::new(process.generate_with(process.replication_key(r), 1, l))?;
                let scheme = partition(&series, l)?;
                let moments = local_moments(&series, &scheme, 2)?;
                let raw = local_statistics(&moments, &untruncated, false)?[0];
                let trunc = local_statistics(&moments, &truncated, true)?[0];
                Ok((raw.abs(), trunc.abs()))
            })
            .collect();
        let pairs = pairs?;
        let (um, use_) = mean_stderr(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
        let (tm, tse) = mean_stderr(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
        entries.push(GrowthEntry {
            block_length: l,
            untruncated_mean_abs: um,
            untruncated_stderr: use_,
            truncated_mean_abs: tm,
            truncated_stderr: tse,
            log_expectation_lower_bound: log_lower_bound(l, max_k),
        });
    }
    let untruncated_grows = entries.windows(2).all(|w| w[1].untruncated_mean_abs > w[0].untruncated_mean_abs)
        && entries.last().map(|e| e.untruncated_mean_abs).unwrap_or(0.0)
            > 5.0 * entries.first().map(|e| e.untruncated_mean_abs).unwrap_or(f64::INFINITY);
    let t: Vec<f64> = entries.iter().map(|e| e.truncated_mean_abs).collect();
    let t_max = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let t_min = t.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(CounterexampleReport {
        truncated_stable: t_min > 0.0 && t_max <= 2.0 * t_min,
        untruncated_grows,
        entries,
        radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ustat::KernelPreset;

    #[test]
    fn theorem1_gini_small() {
        let r = validate_theorem1(&Distribution::standard_normal(), &KernelSpec::gini(), 100, 400, 1).unwrap();
        assert!(r.ks_distance < 0.1, "{}", r.ks_distance);
        assert!((r.variance - 4.0).abs() < 1.0);
    }

    #[test]
    fn theorem1_sum_kernel_is_classical_clt() {
        let r = validate_theorem1(
            &Distribution::Normal { mean: 1.0, sd: 2.0 },
            &KernelSpec::preset(KernelPreset::Sum),
            50,
            300,
            2,
        )
        .unwrap();
        assert!(r.ks_distance < 0.1);
    }

    #[test]
    fn theorem1_bernoulli_degenerate() {
        let err = validate_theorem1(&Distribution::bernoulli(0.5), &KernelSpec::gini(), 100, 10, 0).unwrap_err();
        assert!(matches!(err, Error::DegenerateKernel { .. }));
    }

    #[test]
    fn replication_order_does_not_matter() {
        let a = validate_theorem1(&Distribution::standard_normal(), &KernelSpec::gini(), 30, 250, 9).unwrap();
        let b = validate_theorem1(&Distribution::standard_normal(), &KernelSpec::gini(), 30, 250, 9).unwrap();
        assert_eq!(a, b);
        let mut shuffled = a.statistics.clone();
        shuffled.reverse();
        let c = McReport::from_statistics(shuffled, 4.0, 9);
        assert_eq!(c.ks_distance, a.ks_distance);
        assert_eq!(c.rejection_rates, a.rejection_rates);
        assert!((c.mean - a.mean).abs() < 1e-12 && (c.variance - a.variance).abs() < 1e-12);
    }

    #[test]
    fn rejection_rate_edges_and_monotonicity() {
        let r = validate_theorem1(&Distribution::standard_normal(), &KernelSpec::gini(), 40, 300, 4).unwrap();
        assert_eq!(r.rejection_rate(0.0), 0.0);
        assert_eq!(r.rejection_rate(1.0), 1.0);
        let mut last = 0.0;
        for k in 0..=100 {
            let rate = r.rejection_rate(k as f64 / 100.0);
            assert!((0.0..=1.0).contains(&rate) && rate >= last);
            last = rate;
        }
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn theorem2_smoke() {
        let g = GSpec::preset(GPreset::LogVariance, vec![0.0, 1.0], None).unwrap();
        let mut cfg = Theorem2Config::new(100, 10, 200, CenteringMethod::Gaussian);
        cfg.sigma_sq = Some(2.0);
        let r = validate_theorem2(&ProcessSpec::iid_normal().with_seed(3), &g, &KernelSpec::gini(), &cfg).unwrap();
        assert_eq!(r.replications, 200);
        assert!(r.ks_distance < 0.15, "{}", r.ks_distance);
        let law = r.limit_law.unwrap();
        assert!((law.gamma_sq - 2.0 * 0.162_751).abs() < 1e-5);
    }

    #[test]
    fn theorem2_warns_on_large_ratio() {
        let g = GSpec::preset(GPreset::LogVariance, vec![0.0, 1.0], None).unwrap();
        let mut cfg = Theorem2Config::new(20, 10, 50, CenteringMethod::Gaussian);
        cfg.sigma_sq = Some(2.0);
        let r = validate_theorem2(&ProcessSpec::iid_normal(), &g, &KernelSpec::gini(), &cfg).unwrap();
        assert!(r.warnings.iter().any(|w| w.contains("b/l")));
        assert!(r.warnings.iter().any(|w| w.contains("replications")));
    }

    #[test]
    fn noisy_centering_is_refused() {
        let g = GSpec::preset(GPreset::LogVariance, vec![0.0, 1.0], None).unwrap();
        let mut cfg = Theorem2Config::new(50, 10, 10, CenteringMethod::ZnExpectation);
        cfg.sigma_sq = Some(2.0);
        cfg.centering_replications = 10;
        let err = validate_theorem2(&ProcessSpec::iid_normal(), &g, &KernelSpec::gini(), &cfg).unwrap_err();
        assert!(matches!(err, Error::CenteringTooNoisy { .. }));
    }

    #[test]
    fn counterexample_small() {
        let rep = counterexample_growth(&[10, 100, 1000], 100, 1e-3, 1).unwrap();
        assert!(rep.untruncated_grows, "{rep:?}");
        assert!(rep.truncated_stable, "{rep:?}");
        assert!(rep.entries.iter().all(|e| e.log_expectation_lower_bound > 1e12));
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derived_seed(0, 1), derived_seed(0, 2));
        assert_ne!(derived_seed(0, 1), 0);
    }
}
