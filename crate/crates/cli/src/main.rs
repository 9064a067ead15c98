//! `blockstat` command-line front end.
//!
//! Subcommands: `test` runs the constancy test on a CSV series, `simulate`
//! writes a series from a process spec, `validate` runs a Monte Carlo
//! validation, `delta` writes a dependence profile and `report` collects
//! dependence and long-run variance diagnostics for a spec.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blockstat::asymptotics::{
    centering, check_centering_noise, gamma_squared, sigma_squared, sigma_squared_from_data, CenteringInputs,
    CenteringMethod, LimitLaw,
};
use blockstat::dependence::{
    check_summability, dependence_profile, partial_sum_bound_check, SummabilityWeight, DEFAULT_I_MAX,
};
use blockstat::harness::{counterexample_growth, validate_theorem1, validate_theorem2, Theorem2Config};
use blockstat::ustat::{standardized_statistic, KernelPreset};
use blockstat::{
    generate, local_moments, local_statistics, partition, Distribution, GRegistry, GSpec, KernelSpec, ProcessSpec,
    Series,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {detail}")]
    Parse { path: PathBuf, detail: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] blockstat::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(blockstat::Error::DegenerateKernel { .. }) => 2,
            CliError::Core(blockstat::Error::DomainViolation { .. } | blockstat::Error::OutsideDomain(_)) => 3,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "blockstat", version, about = "Block-local moment U-statistics for time series")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "BLOCKSTAT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
enum Command {
    /// Run the constancy test on a single-column CSV series.
    Test(TestArgs),
    /// Simulate a process spec and write the series as CSV.
    Simulate(SimulateArgs),
    /// Monte Carlo validation of a limit theorem.
    Validate(ValidateArgs),
    /// Physical dependence coefficients as CSV.
    Delta(DeltaArgs),
    /// Dependence, summability and long-run variance diagnostics of a spec.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
struct GArgs {
    /// Moment function preset.
    #[arg(long = "g", default_value = "log_variance")]
    g: String,
    /// Population moment vector v0 (comma separated); estimated when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    v0: Option<Vec<f64>>,
    /// Truncation radius a.
    #[arg(long = "a")]
    radius: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct TestArgs {
    /// Input CSV with a single column `x`.
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    g: GArgs,
    #[arg(long, default_value = "gini")]
    kernel: String,
    /// Block length.
    #[arg(long = "l")]
    block_length: usize,
    #[arg(long, default_value = "gaussian")]
    centering: String,
    /// Value for `--centering supplied`.
    #[arg(long)]
    centering_value: Option<f64>,
    /// Null process for simulated centerings.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Known long-run variance; Bartlett estimate from the data otherwise.
    #[arg(long)]
    sigma_sq: Option<f64>,
    /// Bartlett lag window (default ceil(n^(1/3))).
    #[arg(long)]
    lag_window: Option<usize>,
    /// Use the eta-truncated block statistics.
    #[arg(long)]
    truncate: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20_000)]
    replications: usize,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    /// Process spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Theorem {
    /// Row-wise i.i.d. arrays.
    Iid,
    /// Dependent series from a process spec.
    Dependent,
    /// Growth of the untruncated statistic on the pathological process.
    Counterexample,
}

#[derive(Debug, Args, Serialize)]
struct ValidateArgs {
    #[arg(long, value_enum)]
    theorem: Theorem,
    /// Array law for `iid`: `normal`, `normal:MEAN:SD` or `bernoulli:P`.
    #[arg(long, default_value = "normal")]
    array: String,
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    g: GArgs,
    #[arg(long, default_value = "gini")]
    kernel: String,
    #[arg(long = "l", default_value_t = 400)]
    block_length: usize,
    #[arg(long = "b", default_value_t = 40)]
    blocks: usize,
    #[arg(long, default_value_t = 1000)]
    replications: usize,
    #[arg(long, default_value = "gaussian")]
    centering: String,
    #[arg(long, default_value_t = 20_000)]
    centering_replications: usize,
    #[arg(long)]
    sigma_sq: Option<f64>,
    /// Use untruncated block statistics.
    #[arg(long)]
    untruncated: bool,
    /// Block lengths for `counterexample`.
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
    block_lengths: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-replication statistics as CSV.
    #[arg(long)]
    #[serde(skip)]
    stats_csv: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct DeltaArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Power k of the process.
    #[arg(long, default_value_t = 1)]
    k: u32,
    /// Norm order.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = DEFAULT_I_MAX)]
    i_max: i64,
    #[arg(long, default_value_t = 10_000)]
    replications: usize,
    /// Use coupling even where a closed form exists.
    #[arg(long)]
    mc: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ReportArgs {
    #[arg(long)]
    spec: PathBuf,
    #[command(flatten)]
    g: GArgs,
    #[arg(long, default_value_t = 2000)]
    replications: usize,
    /// Partial-sum lengths for the moment bound.
    #[arg(long, value_delimiter = ',', default_value = "100,1000")]
    partial_sums: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: &Command) -> CliResult<()> {
    match command {
        Command::Test(args) => {
            let json = to_json(&Envelope {
                config: command,
                report: run_test(args)?,
            });
            emit(args.out.as_deref(), &json)
        }
        Command::Simulate(args) => {
            let spec = read_spec(&args.spec)?.with_seed(args.seed);
            let series = generate(&spec, args.n)?;
            emit(args.out.as_deref(), &series_csv(&series))
        }
        Command::Validate(args) => run_validate(command, args),
        Command::Delta(args) => {
            let spec = read_spec(&args.spec)?.with_seed(args.seed);
            let profile = dependence_profile(&spec, args.k, args.p, args.i_max, args.replications, args.mc)?;
            emit(args.out.as_deref(), &profile.to_csv())
        }
        Command::Report(args) => {
            let json = to_json(&Envelope {
                config: command,
                report: run_report(args)?,
            });
            emit(args.out.as_deref(), &json)
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config: &'a Command,
    report: T,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn emit(out: Option<&Path>, content: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, content).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => io::stdout().write_all(content.as_bytes()).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn read_spec(path: &Path) -> CliResult<ProcessSpec> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

/// Header `x`, one value per line with 17 significant digits.
fn series_csv(series: &Series) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["x"]).expect("in-memory write");
    for v in series.values() {
        wtr.write_record([format!("{v:.16e}")]).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("ascii output")
}

fn read_series(path: &Path) -> CliResult<Series> {
    let parse_err = |detail: String| CliError::Parse {
        path: path.to_path_buf(),
        detail,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| parse_err(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    if headers.len() != 1 || headers.get(0).map(str::trim) != Some("x") {
        return Err(parse_err(format!("expected a single column with header `x`, found {headers:?}")));
    }
    let mut values = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let field = record.get(0).unwrap_or("").trim();
        let v: f64 = field
            .parse()
            .map_err(|_| parse_err(format!("line {}: cannot parse {field:?} as a number", row + 2)))?;
        values.push(v);
    }
    Ok(Series::new(values)?)
}

fn kernel(name: &str) -> CliResult<KernelSpec> {
    Ok(KernelSpec::preset(name.parse::<KernelPreset>()?))
}

fn centering_method(name: &str) -> CliResult<CenteringMethod> {
    Ok(name.parse()?)
}

/// `g` at the supplied `v0`, or at the global sample moments of `series`.
fn build_g(args: &GArgs, series: Option<&Series>) -> CliResult<GSpec> {
    let registry = GRegistry::default();
    let order = registry.function(&args.g)?.order();
    match (&args.v0, series) {
        (Some(v0), _) => Ok(registry.build(&args.g, v0.clone(), args.radius)?),
        (None, Some(series)) => {
            let x = series.values();
            let v0: Vec<f64> = (1..=order as i32)
                .map(|k| blockstat::numeric::compensated_sum(x.iter().map(|v| v.powi(k))) / x.len() as f64)
                .collect();
            Ok(registry.build(&args.g, v0, args.radius)?.with_estimated_v0(true))
        }
        (None, None) => Err(CliError::Config(format!("--v0 is required for g = {}", args.g))),
    }
}

fn run_test(args: &TestArgs) -> CliResult<blockstat::TestReport> {
    let series = read_series(&args.input)?;
    let h = kernel(&args.kernel)?;
    let method = centering_method(&args.centering)?;
    let scheme = partition(&series, args.block_length)?;
    let g = build_g(&args.g, Some(&series))?;
    let moments = local_moments(&series, &scheme, g.order())?;
    let w = local_statistics(&moments, &g, args.truncate)?;

    let sigma_sq = match args.sigma_sq {
        Some(s) => s,
        None => sigma_squared_from_data(&series, &g, args.lag_window)?,
    };
    if !(sigma_sq > 0.0) {
        return Err(blockstat::Error::NegativeEstimate { value: sigma_sq }.into());
    }
    let gamma_sq = gamma_squared(&h, sigma_sq.sqrt())?;
    let spec = args.spec.as_deref().map(read_spec).transpose()?.map(|s| s.with_seed(args.seed));
    let center = centering(
        method,
        &CenteringInputs {
            kernel: &h,
            sigma: Some(sigma_sq.sqrt()),
            spec: spec.as_ref(),
            g: Some(&g),
            block_length: args.block_length,
            blocks: scheme.block_count,
            replications: args.replications,
            supplied: args.centering_value,
        },
    )?;
    check_centering_noise(center.stderr, gamma_sq, scheme.block_count)?;

    let mut report = standardized_statistic(&w, &h, center.value, method, gamma_sq)?;
    report.limit_law = Some(LimitLaw {
        sigma_sq,
        gamma_sq,
        centering_method: method,
        centering_value: center.value,
        centering_stderr: center.stderr,
        kappa: None,
    });
    let d = &mut report.diagnostics;
    d.insert("n".into(), series.len() as f64);
    d.insert("block_length".into(), args.block_length as f64);
    d.insert("dropped".into(), scheme.dropped as f64);
    d.insert("radius".into(), g.radius());
    d.insert("v0_estimated".into(), f64::from(u8::from(g.v0_estimated())));
    for (k, v) in g.v0().iter().enumerate() {
        d.insert(format!("v0_{}", k + 1), *v);
    }
    Ok(report)
}

fn parse_array(text: &str) -> CliResult<Distribution> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| CliError::Config(format!("--array: cannot parse {s:?} as a number")))
    };
    match parts.as_slice() {
        ["normal"] => Ok(Distribution::standard_normal()),
        ["normal", mean, sd] => Ok(Distribution::Normal {
            mean: num(mean)?,
            sd: num(sd)?,
        }),
        ["bernoulli", p] => Ok(Distribution::bernoulli(num(p)?)),
        _ => Err(CliError::Config(format!(
            "--array must be normal, normal:MEAN:SD or bernoulli:P, got {text:?}"
        ))),
    }
}

fn run_validate(command: &Command, args: &ValidateArgs) -> CliResult<()> {
    let h = kernel(&args.kernel)?;
    let json = match args.theorem {
        Theorem::Counterexample => {
            let radius = args.g.radius.unwrap_or(1e-3);
            let report = counterexample_growth(&args.block_lengths, args.replications, radius, args.seed)?;
            to_json(&Envelope { config: command, report })
        }
        Theorem::Iid | Theorem::Dependent => {
            let report = if let Theorem::Iid = args.theorem {
                validate_theorem1(&parse_array(&args.array)?, &h, args.blocks, args.replications, args.seed)?
            } else {
                let path = args
                    .spec
                    .as_deref()
                    .ok_or_else(|| CliError::Config("--spec is required for the dependent theorem".into()))?;
                let spec = read_spec(path)?.with_seed(args.seed);
                let g = build_g(&args.g, None)?;
                let mut config = Theorem2Config::new(
                    args.block_length,
                    args.blocks,
                    args.replications,
                    centering_method(&args.centering)?,
                );
                config.sigma_sq = args.sigma_sq;
                config.centering_replications = args.centering_replications;
                config.truncated = !args.untruncated;
                validate_theorem2(&spec, &g, &h, &config)?
            };
            if let Some(path) = &args.stats_csv {
                emit(Some(path), &report.statistics_csv())?;
            }
            to_json(&Envelope { config: command, report })
        }
    };
    emit(args.out.as_deref(), &json)
}

#[derive(Serialize)]
struct SpecReport {
    window: (i64, i64),
    tail_bound: f64,
    moments: Vec<f64>,
    moments_analytic: bool,
    summability: Vec<(String, blockstat::dependence::SummabilityReport)>,
    partial_sums: Vec<blockstat::dependence::PartialSumCheck>,
    sigma_sq: Option<blockstat::asymptotics::SigmaEstimate>,
}

fn run_report(args: &ReportArgs) -> CliResult<SpecReport> {
    let spec = read_spec(&args.spec)?.with_seed(args.seed);
    let process = spec.compile()?;
    let g = match &args.g.v0 {
        Some(_) => Some(build_g(&args.g, None)?),
        None => None,
    };
    let m = g.as_ref().map_or(2, GSpec::order);
    let (moments, moments_analytic) = process.moments(m, blockstat::asymptotics::MOMENT_PREPASS);
    let lags = process.lags();
    let reach = lags.start().abs().max(lags.end().abs()).min(DEFAULT_I_MAX);
    let profiles = (1..=m as u32)
        .map(|k| dependence_profile(&spec, k, 2.0, reach, args.replications, false))
        .collect::<Result<Vec<_>, _>>()?;
    let summability = [
        ("i^2", SummabilityWeight::Square),
        ("i^(1/2+1/(2kappa)), kappa=1/2", SummabilityWeight::Kappa { kappa: 0.5 }),
        ("i^(5/2)", SummabilityWeight::FiveHalves),
    ]
    .into_iter()
    .map(|(name, w)| (name.to_string(), check_summability(&process, &profiles, w)))
    .collect();
    let partial_sums = args
        .partial_sums
        .iter()
        .map(|&n| partial_sum_bound_check(&spec, 1, n, args.replications))
        .collect::<Result<Vec<_>, _>>()?;
    let sigma_sq = g
        .as_ref()
        .map(|g| sigma_squared(&spec, g, None, 200))
        .transpose()?;
    Ok(SpecReport {
        window: (*lags.start(), *lags.end()),
        tail_bound: process.tail_bound(),
        moments,
        moments_analytic,
        summability,
        partial_sums,
        sigma_sq,
    })
}

