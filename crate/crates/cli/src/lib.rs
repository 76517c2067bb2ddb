//! `reo` command-line tool.
//!
//! Exit status is 0 on success, 1 for data errors and 2 for configuration
//! or usage errors.

pub mod envelope;

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use reo_core::inference::{
    ab_bootstrap_test, ab_delta_test, ab_partition_test, bootstrap_report, delta_method_report, BootstrapConfig,
    BootstrapVariant, PartitionConfig,
};
use reo_core::ingest::{
    ingest_file, partition_daily, write_log, DatasetSchema, IngestOutcome, LogReader, RandomTrafficPolicy, ReadOptions,
    RejectedRow, GROUPS,
};
use reo_core::metrics::{point_report, FairnessReport, GroupTally, StdDivisor, TrafficSource};
use reo_core::planner::{plan_sizes, PlanBound, PlanRequest};
use reo_core::sampling::replicate_rng;
use reo_core::synthetic::{
    identifiability_pair, mse_study, population_tally, population_utilities, simulate_records, SimulationConfig,
};
use reo_core::Error;

pub use envelope::{MetricBlock, ReportEnvelope, Table};

use envelope::num;

/// Rejected rows quoted in a report; the rest are only counted.
const MAX_QUOTED_REJECTS: usize = 20;

#[derive(Parser, Debug)]
#[command(
    name = "reo",
    version,
    about = "Fairness metrics for recommender systems from random and default traffic"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Delta,
    Partition,
    Bootstrap,
    Bca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Shared,
    PerDay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Uniform,
    PerGroup,
}

fn parse_divisor(s: &str) -> Result<StdDivisor, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Confidence level 1 - δ.
    #[arg(long, global = true, default_value_t = 0.95)]
    pub confidence: f64,
    #[arg(long, global = true, value_enum, default_value_t = Method::Delta)]
    pub method: Method,
    /// Partition folds (control arm, and treatment unless --folds-treatment).
    #[arg(long, global = true, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, global = true)]
    pub folds_treatment: Option<usize>,
    #[arg(long, global = true, default_value_t = 100)]
    pub bootstrap_size: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// K (population) or K-1 (sample).
    #[arg(long, global = true, default_value = "K", value_parser = parse_divisor)]
    pub std_divisor: StdDivisor,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Include full reports with variance diagnostics.
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Penalty and relative utilities of one strategy.
    Estimate(EstimateArgs),
    /// Daily penalty with intervals and a threshold flag.
    Monitor(MonitorArgs),
    /// Difference of fairness metrics between two strategies.
    Abtest(AbtestArgs),
    /// Synthetic logs in the ingest layout.
    Simulate(SimulateArgs),
    /// Mean squared error of the penalty estimator against traffic size.
    MseStudy(MseStudyArgs),
    /// Traffic sizes for a target accuracy.
    Plan(PlanArgs),
    /// Two populations that agree on recommendations but differ in fairness.
    DemoIdentifiability(DemoArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EstimateArgs {
    /// Default traffic, or a log with both traffic sources.
    #[arg(long)]
    pub default_log: PathBuf,
    #[arg(long)]
    pub random_log: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MonitorArgs {
    #[arg(long)]
    pub default_log: PathBuf,
    #[arg(long)]
    pub random_log: Option<PathBuf>,
    /// Penalty above which a day is flagged (1/9 is the 80% rule for two groups).
    #[arg(long, default_value_t = 1.0 / 9.0)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = Policy::Shared)]
    pub random_policy: Policy,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AbtestArgs {
    #[arg(long)]
    pub control_log: PathBuf,
    #[arg(long)]
    pub treatment_log: PathBuf,
    /// Random traffic shared by both arms; random rows in the arm logs are added.
    #[arg(long)]
    pub random_log: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimulateArgs {
    /// Preset 1, 2 or 3; --p/--q override it.
    #[arg(long, default_value_t = 1)]
    pub setting: u8,
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<f64>>,
    /// Weights splitting the negative mass over groups (both traffics).
    #[arg(long, value_delimiter = ',')]
    pub split: Option<Vec<f64>>,
    #[arg(long, default_value_t = 150_000)]
    pub default_rows: u64,
    #[arg(long, default_value_t = 150_000)]
    pub random_rows: u64,
    #[arg(long, default_value_t = 1)]
    pub days: u32,
    #[arg(long, default_value = "2024-01-01")]
    pub start_date: NaiveDate,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MseStudyArgs {
    #[arg(long, default_value_t = 1)]
    pub setting: u8,
    #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000,1000000")]
    pub sizes: Vec<u64>,
    #[arg(long, default_value_t = 50)]
    pub replicates: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PlanArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, value_delimiter = ',')]
    pub pilot_p: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub pilot_q: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub pilot_u: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Bound::Uniform)]
    pub bound: Bound,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Recommended positive pairs per group.
    #[arg(long, default_value_t = 100)]
    pub per_group: u64,
    /// Unrecommended pairs added to group 0.
    #[arg(long, default_value_t = 100)]
    pub m0: u64,
}

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io(PathBuf, io::Error),
    Output(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_config() => 2,
            _ => 1,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Io(..) => "io",
            CliError::Output(_) => "cli.output",
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Output(m) => write!(f, "{m}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command, writing
/// to the process stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut io::stdout().lock(), &mut io::stderr().lock())
}

/// Like [`run`] with explicit output streams.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error[{}]: {e}", e.code());
            e.exit_code()
        }
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Core(Error::InvalidConfig(msg.into()))
}

fn echo<T: Serialize>(common: &Common, args: &T) -> Value {
    serde_json::json!({ "common": common, "command": args })
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> CliResult<()> {
    let c = &cli.common;
    reo_core::stats::check_confidence(c.confidence)?;
    let envelope = match &cli.command {
        Command::Estimate(a) => estimate(c, a)?,
        Command::Monitor(a) => monitor(c, a)?,
        Command::Abtest(a) => abtest(c, a)?,
        Command::Simulate(a) => return simulate(c, a, stdout),
        Command::MseStudy(a) => mse(c, a)?,
        Command::Plan(a) => plan(c, a)?,
        Command::DemoIdentifiability(a) => demo(c, a)?,
    };
    emit(c, &envelope, stdout)
}

fn emit(c: &Common, env: &ReportEnvelope, stdout: &mut dyn Write) -> CliResult<()> {
    let mut bytes = Vec::new();
    match c.format {
        Format::Json => bytes.extend(env.to_json().map_err(|e| CliError::Output(e.to_string()))?.into_bytes()),
        Format::Csv => env.write_csv(&mut bytes).map_err(|e| CliError::Output(e.to_string()))?,
    }
    write_output(c.out.as_deref(), &bytes, stdout)
}

fn write_output(out: Option<&Path>, bytes: &[u8], stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::Io(p.to_path_buf(), e)),
        None => stdout
            .write_all(bytes)
            .map_err(|e| CliError::Io(PathBuf::from("<stdout>"), e)),
    }
}

fn read_opts(source: TrafficSource) -> ReadOptions {
    ReadOptions {
        traffic: Some(source),
        require_date: false,
    }
}

fn note_rejects(env: &mut ReportEnvelope, rejected: &[RejectedRow]) {
    if rejected.is_empty() {
        return;
    }
    env.warnings.push(format!("{} rows rejected", rejected.len()));
    env.warnings
        .extend(rejected.iter().take(MAX_QUOTED_REJECTS).map(|r| r.to_string()));
}

fn ingest_logs(default: &Path, random: Option<&Path>) -> CliResult<IngestOutcome> {
    let schema = DatasetSchema::default();
    let mut out = ingest_file(default, &schema, read_opts(TrafficSource::Default))?;
    if let Some(r) = random {
        out = out.merge(ingest_file(r, &schema, read_opts(TrafficSource::Random))?)?;
    }
    Ok(out)
}

fn method_label(m: Method) -> &'static str {
    match m {
        Method::Delta => "delta",
        Method::Partition => "partition",
        Method::Bootstrap => "bootstrap",
        Method::Bca => "bca",
    }
}

fn bootstrap_config(c: &Common, seed: u64, variant: BootstrapVariant) -> BootstrapConfig {
    BootstrapConfig {
        replicates: c.bootstrap_size,
        confidence: c.confidence,
        variant,
        std_divisor: c.std_divisor,
        seed,
    }
}

fn single_arm_report(c: &Common, t: &GroupTally, seed: u64) -> Result<FairnessReport, Error> {
    match c.method {
        Method::Delta => delta_method_report(t, c.confidence, c.std_divisor),
        Method::Bootstrap => bootstrap_report(t, &bootstrap_config(c, seed, BootstrapVariant::Standard)),
        Method::Bca => bootstrap_report(t, &bootstrap_config(c, seed, BootstrapVariant::Bca)),
        Method::Partition => Err(Error::InvalidConfig(
            "the partition method compares two arms; use it with abtest".into(),
        )),
    }
}

fn new_envelope<T: Serialize>(name: &str, c: &Common, args: &T) -> ReportEnvelope {
    ReportEnvelope::new(name, c.seed, c.std_divisor.label(), echo(c, args))
}

fn details<T: Serialize>(c: &Common, value: &T) -> CliResult<Option<Value>> {
    if !c.verbose {
        return Ok(None);
    }
    serde_json::to_value(value)
        .map(Some)
        .map_err(|e| CliError::Output(e.to_string()))
}

fn estimate(c: &Common, a: &EstimateArgs) -> CliResult<ReportEnvelope> {
    let outcome = ingest_logs(&a.default_log, a.random_log.as_deref())?;
    let report = single_arm_report(c, &outcome.tally, c.seed)?;
    let mut env = new_envelope("estimate", c, a);
    env.add_fairness(&report, method_label(c.method));
    note_rejects(&mut env, &outcome.rejected);
    env.details = details(c, &report)?;
    Ok(env)
}

fn monitor(c: &Common, a: &MonitorArgs) -> CliResult<ReportEnvelope> {
    let schema = DatasetSchema::default();
    let mut readers = vec![LogReader::open(
        &a.default_log,
        &schema,
        ReadOptions {
            traffic: Some(TrafficSource::Default),
            require_date: true,
        },
    )?];
    if let Some(r) = &a.random_log {
        readers.push(LogReader::open(r, &schema, read_opts(TrafficSource::Random))?);
    }
    let policy = match a.random_policy {
        Policy::Shared => RandomTrafficPolicy::Shared,
        Policy::PerDay => RandomTrafficPolicy::PerDay,
    };
    let mut rejected = Vec::new();
    let records = readers.into_iter().flatten().filter_map(|row| match row {
        Ok(r) => Some(r),
        Err(e) => {
            rejected.push(e);
            None
        }
    });
    let days = partition_daily(records, GROUPS, policy)?;
    let mut env = new_envelope("monitor", c, a);
    let columns = [
        "date",
        "penalty",
        "se",
        "ci_low",
        "ci_high",
        "above_threshold",
        "n_rec",
        "n_rand",
        "reason",
    ];
    let mut rows = Vec::with_capacity(days.len());
    let mut full = Vec::new();
    for (i, (day, tallies)) in days.iter().enumerate() {
        let t = tallies.combined()?;
        let date = Value::from(day.format("%Y-%m-%d").to_string());
        match single_arm_report(c, &t, c.seed.wrapping_add(i as u64)) {
            Ok(r) => {
                let p = &r.penalty;
                rows.push(vec![
                    date,
                    num(p.estimate),
                    p.se.map_or(Value::Null, num),
                    p.ci.map_or(Value::Null, |ci| num(ci.low)),
                    p.ci.map_or(Value::Null, |ci| num(ci.high)),
                    Value::from(p.estimate > a.threshold),
                    Value::from(t.n_rec),
                    Value::from(t.n_rand),
                    p.unavailable.clone().map_or(Value::Null, Value::from),
                ]);
                full.push(r);
            }
            Err(e) if e.is_config() => return Err(e.into()),
            Err(e) => {
                let mut row = vec![date];
                row.extend(std::iter::repeat_n(Value::Null, 5));
                row.extend([Value::from(t.n_rec), Value::from(t.n_rand), Value::from(e.to_string())]);
                rows.push(row);
            }
        }
    }
    env.table = Some(Table {
        columns: columns.iter().map(|s| s.to_string()).collect(),
        rows,
    });
    env.warnings.push(reo_core::metrics::STD_CONVENTION_NOTE.to_string());
    note_rejects(&mut env, &rejected);
    env.details = details(c, &full)?;
    Ok(env)
}

fn abtest(c: &Common, a: &AbtestArgs) -> CliResult<ReportEnvelope> {
    let schema = DatasetSchema::default();
    let control = ingest_file(&a.control_log, &schema, read_opts(TrafficSource::Default))?;
    let treatment = ingest_file(&a.treatment_log, &schema, read_opts(TrafficSource::Default))?;
    let mut random = control.tally.merge(&treatment.tally)?;
    let mut rejected = control.rejected.clone();
    rejected.extend(treatment.rejected.iter().cloned());
    if let Some(r) = &a.random_log {
        let r = ingest_file(r, &schema, read_opts(TrafficSource::Random))?;
        random = random.merge(&r.tally)?;
        rejected.extend(r.rejected);
    }
    let (ct, tt) = (&control.tally, &treatment.tally);
    let report = match c.method {
        Method::Delta => ab_delta_test(ct, tt, &random, c.confidence, c.std_divisor)?,
        Method::Partition => ab_partition_test(
            ct,
            tt,
            &random,
            &PartitionConfig {
                folds_control: c.folds,
                folds_treatment: c.folds_treatment.unwrap_or(c.folds),
                confidence: c.confidence,
                std_divisor: c.std_divisor,
                seed: c.seed,
            },
        )?,
        Method::Bootstrap => ab_bootstrap_test(
            ct,
            tt,
            &random,
            &bootstrap_config(c, c.seed, BootstrapVariant::Standard),
        )?,
        Method::Bca => ab_bootstrap_test(ct, tt, &random, &bootstrap_config(c, c.seed, BootstrapVariant::Bca))?,
    };
    let mut env = new_envelope("abtest", c, a);
    env.add_ab(&report, method_label(c.method));
    if !env.warnings.iter().any(|w| w == reo_core::metrics::STD_CONVENTION_NOTE) {
        env.warnings.push(reo_core::metrics::STD_CONVENTION_NOTE.to_string());
    }
    note_rejects(&mut env, &rejected);
    env.details = details(c, &report)?;
    Ok(env)
}

fn simulation_config(
    setting: u8,
    p: Option<&Vec<f64>>,
    q: Option<&Vec<f64>>,
    split: Option<&Vec<f64>>,
) -> CliResult<SimulationConfig> {
    let mut cfg = SimulationConfig::setting(setting)?;
    match (p, q) {
        (Some(p), Some(q)) => {
            cfg.k = p.len();
            cfg.p = p.clone();
            cfg.q = q.clone();
            let even = vec![1.0 / p.len() as f64; p.len()];
            cfg.p_complement_split = split.cloned().unwrap_or_else(|| even.clone());
            cfg.q_complement_split = split.cloned().unwrap_or(even);
        }
        (None, None) => {
            if let Some(s) = split {
                cfg.p_complement_split = s.clone();
                cfg.q_complement_split = s.clone();
            }
        }
        _ => return Err(config_error("--p and --q must be given together")),
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(c: &Common, a: &SimulateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let cfg = simulation_config(a.setting, a.p.as_ref(), a.q.as_ref(), a.split.as_ref())?;
    if cfg.k != GROUPS {
        return Err(config_error(format!(
            "the log layout has one binary sensitive column, so simulate needs K={GROUPS}, got {}",
            cfg.k
        )));
    }
    let mut records = Vec::new();
    for d in 0..a.days {
        let date = a
            .start_date
            .checked_add_days(chrono::Days::new(d as u64))
            .ok_or_else(|| config_error("date range overflows"))?;
        let mut rng = replicate_rng(c.seed, d as u64);
        let day = simulate_records(&cfg, a.random_rows, a.default_rows, &mut rng)?;
        records.extend(day.into_iter().map(|r| r.with_date(date)));
    }
    let mut bytes = Vec::new();
    write_log(&mut bytes, &records, true)?;
    write_output(c.out.as_deref(), &bytes, stdout)
}

fn mse(c: &Common, a: &MseStudyArgs) -> CliResult<ReportEnvelope> {
    let cfg = SimulationConfig::setting(a.setting)?;
    let study = mse_study(&cfg, &a.sizes, a.replicates, c.std_divisor, c.seed)?;
    let mut env = new_envelope("mse-study", c, a);
    env.metrics.push(MetricBlock::point(
        "ground_truth_penalty",
        "config",
        study.ground_truth_penalty,
    ));
    match study.slope {
        Some(s) => env.metrics.push(MetricBlock::point("log_log_slope", "ols", s)),
        None => {
            let mut b = MetricBlock::point("log_log_slope", "ols", f64::NAN);
            b.reason = Some("fewer than two sizes with a positive MSE".into());
            env.metrics.push(b);
        }
    }
    let opt = |x: Option<f64>| x.map_or(Value::Null, num);
    env.table = Some(Table {
        columns: ["n", "mse", "mse_se", "failures"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows: study
            .rows
            .iter()
            .map(|r| vec![Value::from(r.n), opt(r.mse), opt(r.mse_se), Value::from(r.failures)])
            .collect(),
    });
    env.details = details(c, &study)?;
    Ok(env)
}

fn plan(c: &Common, a: &PlanArgs) -> CliResult<ReportEnvelope> {
    let req = PlanRequest {
        k: a.k,
        epsilon: a.epsilon,
        delta: a.delta,
        pilot_p: a.pilot_p.clone(),
        pilot_q: a.pilot_q.clone(),
        pilot_u: a.pilot_u.clone(),
    };
    let bound = match a.bound {
        Bound::Uniform => PlanBound::Uniform,
        Bound::PerGroup => PlanBound::PerGroup,
    };
    let p = plan_sizes(&req, bound)?;
    let mut env = new_envelope("plan", c, a);
    let label = match bound {
        PlanBound::Uniform => "uniform",
        PlanBound::PerGroup => "per_group",
    };
    if let Some(n) = p.n {
        env.metrics.push(MetricBlock::point("n", label, n as f64));
    }
    env.metrics.push(MetricBlock::point("n_rec", label, p.n_rec as f64));
    env.metrics.push(MetricBlock::point("n_rand", label, p.n_rand as f64));
    if p.conservative {
        env.warnings
            .push("missing pilot values replaced by conservative defaults (U = 1, p = q = 0.5)".into());
    }
    env.table = Some(Table {
        columns: ["bound", "n", "n_rec", "n_rand", "conservative"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows: vec![vec![
            Value::from(label),
            p.n.map_or(Value::Null, Value::from),
            Value::from(p.n_rec),
            Value::from(p.n_rand),
            Value::from(p.conservative),
        ]],
    });
    env.details = details(c, &p)?;
    Ok(env)
}

fn demo(c: &Common, a: &DemoArgs) -> CliResult<ReportEnvelope> {
    let mut omega = Vec::new();
    for g in 0..a.k {
        omega.extend((0..a.per_group).map(|_| (true, g)));
    }
    let pair = identifiability_pair(&omega, a.m0, a.k)?;
    let fair = point_report(&population_tally(&pair.fair, a.k)?, c.std_divisor)?;
    let unfair = point_report(&population_tally(&pair.unfair, a.k)?, c.std_divisor)?;
    let scale = match c.std_divisor {
        StdDivisor::Population => 1.0,
        StdDivisor::Sample => (a.k as f64 / (a.k - 1) as f64).sqrt(),
    };
    let mut env = new_envelope("demo-identifiability", c, a);
    env.metrics
        .push(MetricBlock::point("alpha", "construction", pair.alpha));
    env.metrics
        .push(MetricBlock::from_estimate("fair_penalty", "population", &fair.penalty));
    env.metrics.push(MetricBlock::from_estimate(
        "unfair_penalty",
        "population",
        &unfair.penalty,
    ));
    env.metrics.push(MetricBlock::point(
        "unfair_penalty_closed_form",
        "closed_form",
        pair.unfair_penalty * scale,
    ));
    let agree = pair
        .fair
        .iter()
        .filter(|p| p.recommended)
        .eq(pair.unfair.iter().filter(|p| p.recommended));
    if !agree {
        return Err(CliError::Output(
            "constructed populations disagree on recommended rows".into(),
        ));
    }
    let mut rows = Vec::new();
    for (name, pop) in [("fair", &pair.fair), ("unfair", &pair.unfair)] {
        for (g, u) in population_utilities(pop, a.k).into_iter().enumerate() {
            rows.push(vec![Value::from(name), Value::from(g), u.map_or(Value::Null, num)]);
        }
    }
    env.table = Some(Table {
        columns: vec!["population".into(), "group".into(), "utility".into()],
        rows,
    });
    env.warnings.push(reo_core::metrics::STD_CONVENTION_NOTE.to_string());
    env.details = details(c, &pair)?;
    Ok(env)
}
