//! Physical dependence coefficients `delta_{i,p} = ||X_0^k - (X_0^{*,i})^k||_p`,
//! weighted summability checks and the partial-sum moment bound
//! `||sum_{t<=N} (X_t^k - E X^k)||_2 <= sqrt(N) sum_i delta_i`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::MOMENT_PREPASS;
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, mean_stderr};
use crate::processes::{Coefficients, Process, ProcessSpec, ProcessVariant};

/// Default half-width of the lag window of a profile.
pub const DEFAULT_I_MAX: i64 = 256;
/// Smallest replication count accepted for a Monte Carlo coefficient.
pub const MIN_REPLICATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaMode {
    Analytic,
    CouplingMc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub value: f64,
    pub stderr: f64,
    pub mode: DeltaMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaEntry {
    pub i: i64,
    pub delta: f64,
    pub stderr: f64,
}

/// `delta_i` for the `k`-th power over a lag window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceProfile {
    pub p: f64,
    pub power: u32,
    pub mode: DeltaMode,
    pub entries: Vec<DeltaEntry>,
}

impl DependenceProfile {
    pub fn i_max(&self) -> i64 {
        self.entries.iter().map(|e| e.i.abs()).max().unwrap_or(0)
    }

    /// CSV with header `i,delta,stderr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,delta,stderr\n");
        for e in &self.entries {
            writeln!(out, "{},{:.16e},{:.16e}", e.i, e.delta, e.stderr).unwrap();
        }
        out
    }
}

fn check_order(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("norm order p must be at least 1, got {p}")))
    }
}

/// Whether `X_0` depends on `eps_i` at all.
fn in_window(process: &Process, i: i64) -> bool {
    process.lags().contains(&-i)
}

/// Closed form for linear (and i.i.d.) processes and `k = 1`:
/// `delta_{i,p} = |a_{-i}| ||eps - eps'||_p`.
pub fn delta_analytic(process: &Process, power: u32, i: i64, p: f64) -> Option<f64> {
    if power != 1 || !process.is_linear() {
        return None;
    }
    if !in_window(process, i) {
        return Some(0.0);
    }
    Some(process.coefficient(-i).abs() * process.innovation().coupling_norm(p)?)
}

/// Coupled Monte Carlo estimate over `replications` pairs; the standard
/// error of `M^{1/p}` follows from the delta method.
pub fn delta_monte_carlo(process: &Process, power: u32, i: i64, p: f64, replications: usize) -> DeltaEstimate {
    if !in_window(process, i) {
        return DeltaEstimate {
            value: 0.0,
            stderr: 0.0,
            mode: DeltaMode::CouplingMc,
        };
    }
    let samples: Vec<f64> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let (x, y) = process.generate_coupled_with(process.replication_key(r), process.coupled_key(r), 0, 1, i);
            (x[0].powi(power as i32) - y[0].powi(power as i32)).abs().powf(p)
        })
        .collect();
    let (m, se_m) = mean_stderr(&samples);
    let (value, stderr) = if m > 0.0 {
        let value = m.powf(1.0 / p);
        (value, se_m * value / (p * m))
    } else {
        (0.0, 0.0)
    };
    DeltaEstimate {
        value,
        stderr,
        mode: DeltaMode::CouplingMc,
    }
}

/// `delta_{i,p}` of `X^k`, analytic when available and by coupling
/// otherwise.
pub fn delta(spec: &ProcessSpec, power: u32, i: i64, p: f64, replications: usize) -> Result<DeltaEstimate> {
    check_order(p)?;
    let process = spec.compile()?;
    if let Some(value) = delta_analytic(&process, power, i, p) {
        return Ok(DeltaEstimate {
            value,
            stderr: 0.0,
            mode: DeltaMode::Analytic,
        });
    }
    check_replications(replications)?;
    Ok(delta_monte_carlo(&process, power, i, p, replications))
}

fn check_replications(replications: usize) -> Result<()> {
    if replications < MIN_REPLICATIONS {
        Err(Error::InvalidParameter(format!(
            "coupling estimates need at least {MIN_REPLICATIONS} replications, got {replications}"
        )))
    } else {
        Ok(())
    }
}

/// Profile over `|i| <= i_max`. `force_mc` skips the closed form.
pub fn dependence_profile(
    spec: &ProcessSpec,
    power: u32,
    p: f64,
    i_max: i64,
    replications: usize,
    force_mc: bool,
) -> Result<DependenceProfile> {
    check_order(p)?;
    let process = spec.compile()?;
    let analytic = !force_mc && delta_analytic(&process, power, 0, p).is_some();
    if !analytic {
        check_replications(replications)?;
    }
    let entries = (-i_max..=i_max)
        .map(|i| {
            let (delta, stderr) = if analytic {
                (delta_analytic(&process, power, i, p).unwrap(), 0.0)
            } else {
                let e = delta_monte_carlo(&process, power, i, p, replications);
                (e.value, e.stderr)
            };
            DeltaEntry { i, delta, stderr }
        })
        .collect();
    Ok(DependenceProfile {
        p,
        power,
        mode: if analytic { DeltaMode::Analytic } else { DeltaMode::CouplingMc },
        entries,
    })
}

/// Lag weights of the summability conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SummabilityWeight {
    /// `|i|^2`
    Square,
    /// `|i|^{1/2 + 1/(2 kappa)}`
    Kappa { kappa: f64 },
    /// `|i|^{5/2}`
    FiveHalves,
}

impl SummabilityWeight {
    pub fn exponent(&self) -> f64 {
        match *self {
            SummabilityWeight::Square => 2.0,
            SummabilityWeight::Kappa { kappa } => 0.5 + 1.0 / (2.0 * kappa),
            SummabilityWeight::FiveHalves => 2.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    SatisfiedUpToWindow,
    TailBoundCertified,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummabilityReport {
    pub weight_exponent: f64,
    pub i_max: i64,
    /// Weighted partial sum per power `k`, in the order of the profiles.
    pub partial_sums: Vec<f64>,
    pub total: f64,
    /// Bound on the weighted sum beyond the window, when available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_bound: Option<f64>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

/// `sum_{i > i0} i^w r^i`, summed explicitly with a geometric remainder.
fn weighted_geometric_tail(i0: i64, w: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0f64;
    let mut i = i0 + 1;
    loop {
        let term = (i as f64).powf(w) * r.powi(i as i32);
        let ratio = ((i + 1) as f64 / i as f64).powf(w) * r;
        if ratio < 1.0 && term <= 1e-17 * sum.max(f64::MIN_POSITIVE) {
            return sum + term / (1.0 - ratio);
        }
        if ratio < 1.0 && term < 1e-300 {
            return sum;
        }
        sum += term;
        i += 1;
    }
}

/// Bound on `sum_{|i| > i0} |i|^w |a_{-i}|^gamma` for the untruncated
/// coefficients.
fn coefficient_tail(coeffs: &Coefficients, causal: bool, i0: i64, w: f64, gamma: f64) -> f64 {
    let sides = if causal { 1.0 } else { 2.0 };
    match coeffs {
        Coefficients::Geometric { phi } => sides * weighted_geometric_tail(i0, w, phi.abs().powf(gamma)),
        Coefficients::PowerLaw { scale, exponent } => {
            let e = exponent * gamma - w;
            if e <= 1.0 {
                f64::INFINITY
            } else {
                sides * scale.abs().powf(gamma) * (i0.max(1) as f64).powf(1.0 - e) / (e - 1.0)
            }
        }
        Coefficients::Explicit { values, offset } => values
            .iter()
            .enumerate()
            .map(|(k, a)| (offset + k as i64, a))
            .filter(|(j, _)| j.abs() > i0 && !(causal && *j < 0))
            .map(|(j, a)| (j.abs() as f64).powf(w) * a.abs().powf(gamma))
            .sum(),
    }
}

/// `C` with `delta_{i,2}((X^k)) <= C |a_{-i}|^gamma`, and `gamma`, for the
/// classes where such a bound is available in closed form.
fn delta_bound_constant(process: &Process, power: u32) -> Option<(f64, f64)> {
    let spec = process.spec();
    let coupling = |p: f64| process.innovation().coupling_norm(p);
    match (&spec.variant, power) {
        (ProcessVariant::Linear { .. }, 1) | (ProcessVariant::Iid { .. }, 1) => Some((coupling(2.0)?, 1.0)),
        (ProcessVariant::Linear { .. }, k) | (ProcessVariant::Iid { .. }, k) => {
            // x^k - y^k = (x - y) sum_j x^j y^{k-1-j} and Hölder's inequality give
            // ||X^k - X*^k||_2 <= k |a| ||eps - eps'||_{2k} ||X||_{2k}^{k-1}
            let k = f64::from(k);
            let norm = process.analytic_moment(2 * power)?.powf(1.0 / (2.0 * k));
            Some((k * coupling(2.0 * k)? * norm.powf(k - 1.0), 1.0))
        }
        (ProcessVariant::HoelderLinear { transform, exponent, .. }, 1) => {
            let (h_exp, h_const) = transform.hoelder()?;
            if (h_exp - exponent).abs() > 1e-12 {
                return None;
            }
            // ||C |a (eps - eps')|^gamma||_2 = C |a|^gamma ||eps - eps'||_{2 gamma}^gamma
            let p = (2.0 * exponent).max(1.0);
            Some((h_const * coupling(p)?.powf(*exponent), *exponent))
        }
        _ => None,
    }
}

fn coefficients_of(process: &Process) -> Option<&Coefficients> {
    match &process.spec().variant {
        ProcessVariant::Linear { coeffs, .. }
        | ProcessVariant::HoelderLinear { coeffs, .. }
        | ProcessVariant::GaussianHermite { coeffs, .. } => Some(coeffs),
        _ => None,
    }
}

/// Weighted partial sums of one profile per power plus the tail evidence.
pub fn check_summability(
    process: &Process,
    profiles: &[DependenceProfile],
    weight: SummabilityWeight,
) -> SummabilityReport {
    let w = weight.exponent();
    let i_max = profiles.iter().map(DependenceProfile::i_max).min().unwrap_or(0);
    let partial_sums: Vec<f64> = profiles
        .iter()
        .map(|prof| {
            compensated_sum(
                prof.entries
                    .iter()
                    .filter(|e| e.i.abs() <= i_max)
                    .map(|e| (e.i.abs() as f64).powf(w) * e.delta),
            )
        })
        .collect();
    let total = partial_sums.iter().sum();
    let mut notes = Vec::new();

    let lags = process.lags();
    let window_reach = lags.start().abs().max(lags.end().abs());
    let finite = process.is_finite_window();
    let covered = window_reach <= i_max;

    let tail_bound = if finite && covered {
        notes.push("finite coefficient window covered by the profile".into());
        Some(0.0)
    } else {
        let mut bound = Some(0.0);
        for prof in profiles {
            let term = coefficients_of(process)
                .zip(delta_bound_constant(process, prof.power))
                .map(|(coeffs, (c, gamma))| c * coefficient_tail(coeffs, process.spec().causal, i_max.min(window_reach), w, gamma));
            bound = bound.zip(term).map(|(a, b)| a + b);
        }
        if matches!(process.spec().variant, ProcessVariant::Iid { .. } | ProcessVariant::Pathological) {
            bound = Some(0.0);
        }
        bound
    };

    let verdict = match tail_bound {
        Some(t) if t.is_finite() => Verdict::TailBoundCertified,
        Some(_) => {
            notes.push("analytic tail of the weighted series diverges".into());
            Verdict::Inconclusive
        }
        None => {
            let slope = log_log_slope(profiles, w, i_max);
            match slope {
                Some(s) if s < -1.1 => {
                    notes.push(format!("weighted terms decay with log-log slope {s:.3}"));
                    Verdict::SatisfiedUpToWindow
                }
                Some(s) => {
                    notes.push(format!("weighted terms decay too slowly (log-log slope {s:.3})"));
                    Verdict::Inconclusive
                }
                None => {
                    notes.push("weighted terms vanish at the window edge".into());
                    Verdict::SatisfiedUpToWindow
                }
            }
        }
    };
    SummabilityReport {
        weight_exponent: w,
        i_max,
        partial_sums,
        total,
        tail_bound,
        verdict,
        notes,
    }
}

/// Least-squares slope of `log(|i|^w delta_i)` on `log |i|` over the outer
/// half of the window, or `None` when those terms are all zero.
fn log_log_slope(profiles: &[DependenceProfile], w: f64, i_max: i64) -> Option<f64> {
    let mut pts = Vec::new();
    for prof in profiles {
        for e in &prof.entries {
            let a = e.i.abs();
            if a > i_max / 2 && a <= i_max && e.delta > 0.0 {
                pts.push(((a as f64).ln(), w * (a as f64).ln() + e.delta.ln()));
            }
        }
    }
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Outcome of the partial-sum moment bound diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialSumCheck {
    pub n: usize,
    pub power: u32,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    pub holds: bool,
}

/// Monte Carlo `||sum_{t=1}^N (X_t^k - E X^k)||_2` against
/// `sqrt(N) sum_i delta_i((X^k))`; the bound holds if
/// `lhs <= rhs + 3 * combined standard error`.
pub fn partial_sum_bound_check(spec: &ProcessSpec, power: u32, n: usize, replications: usize) -> Result<PartialSumCheck> {
    if n == 0 || power == 0 {
        return Err(Error::InvalidParameter("N and k must be positive".into()));
    }
    check_replications(replications)?;
    let process = spec.compile()?;
    let (moments, _) = process.moments(power as usize, MOMENT_PREPASS);
    let mu = moments[power as usize - 1];
    let squares: Vec<f64> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let x = process.generate_with(process.replication_key(r), 1, n);
            let s = compensated_sum(x.iter().map(|v| v.powi(power as i32) - mu));
            s * s
        })
        .collect();
    let (m, se_m) = mean_stderr(&squares);
    let (lhs, lhs_stderr) = if m > 0.0 { (m.sqrt(), se_m / (2.0 * m.sqrt())) } else { (0.0, 0.0) };

    let mut deltas = Vec::new();
    for j in process.lags() {
        let i = -j;
        deltas.push(match delta_analytic(&process, power, i, 2.0) {
            Some(v) => (v, 0.0),
            None => {
                let e = delta_monte_carlo(&process, power, i, 2.0, replications);
                (e.value, e.stderr)
            }
        });
    }
    let scale = (n as f64).sqrt();
    let rhs = scale * compensated_sum(deltas.iter().map(|d| d.0));
    let rhs_stderr = scale * deltas.iter().map(|d| d.1 * d.1).sum::<f64>().sqrt();
    let slack = 3.0 * (lhs_stderr.powi(2) + rhs_stderr.powi(2)).sqrt();
    Ok(PartialSumCheck {
        n,
        power,
        lhs,
        lhs_stderr,
        rhs,
        rhs_stderr,
        holds: lhs <= rhs + slack,
    })
}
