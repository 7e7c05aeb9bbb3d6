//! Command-line front end: argument parsing, TOML run configuration,
//! result export and the `solve`, `sweep`, `norwegian` and `verify`
//! commands.
//!
//! Flags override values from the configuration file, which override the
//! built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::economics::{
    ContractTemplate, Preferences, ProductionMode, ProductionSpec, DEFAULT_COST_COEFF,
};
use crate::error::ModelError;
use crate::experiments::{
    run_norwegian, run_single_input_sweep, summarize, FleetCalibration, GroupKey, NorwegianGrid,
    SweepError, SweepGrid, SweepRecord, SweepResult,
};
use crate::optimizer::DecisionProblem;
use crate::propositions::{run_suite, VerifyOptions, VerifyReport, VerifyTier};
use crate::stochastics::{sample_shocks, ShockSpec, ShockVariable};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error(transparent)]
    Model(ModelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            _ => EXIT_FAILED,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            // bad parameter values supplied by the user are configuration errors
            ModelError::InvalidParameter { name, reason } => CliError::config(name, reason),
            other => CliError::Model(other),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IndexChoice {
    Theta,
    Omega,
    Both,
}

impl IndexChoice {
    fn variables(self) -> Vec<ShockVariable> {
        match self {
            IndexChoice::Theta => vec![ShockVariable::Theta],
            IndexChoice::Omega => vec![ShockVariable::Omega],
            IndexChoice::Both => vec![ShockVariable::Omega, ShockVariable::Theta],
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "indexfish",
    version,
    about = "Index insurance and input choice for risk-averse fishers"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Shock draws per cell.
    #[arg(long, global = true)]
    pub draws: Option<usize>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Output directory.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one single-input problem and print the optimum.
    Solve(SolveArgs),
    /// Run the single-input parameter sweep.
    Sweep(SweepArgs),
    /// Run the three-input fleet calibrations.
    Norwegian(NorwegianArgs),
    /// Check the sign predictions and report magnitudes.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// Cost coefficient.
    #[arg(long = "c", default_value_t = DEFAULT_COST_COEFF)]
    pub cost: f64,
    /// Absolute risk aversion.
    #[arg(long = "a", default_value_t = 2.0)]
    pub risk_aversion: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma_theta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma_omega: f64,
    /// Fixed coverage (fraction of baseline expected profit); optimized
    /// jointly with the input when omitted.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum, default_value = "omega")]
    pub index: IndexChoice,
    /// Trigger in units of the indexed shock's sigma.
    #[arg(long, default_value_t = 0.0)]
    pub trigger: f64,
    /// Drop extraction risk from production.
    #[arg(long)]
    pub standard: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub index: IndexChoice,
    /// Triggers in sigma units (repeatable).
    #[arg(long)]
    pub trigger: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct NorwegianArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub index: IndexChoice,
    #[arg(long)]
    pub trigger: Vec<f64>,
    /// Fleet name (repeatable); all fleets when omitted.
    #[arg(long)]
    pub fleet: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Reduced grid only.
    #[arg(long)]
    pub quick: bool,
}

/// Run configuration as read from TOML. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub draws: Option<usize>,
    pub jobs: usize,
    pub format: OutputFormat,
    pub output: PathBuf,
    /// Fleet names for `norwegian`; empty means all presets.
    pub fleets: Vec<String>,
    pub sweep: SweepGrid,
    pub norwegian: NorwegianGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            draws: None,
            jobs: std::thread::available_parallelism().map_or(1, usize::from),
            format: OutputFormat::Csv,
            output: PathBuf::from("out"),
            fleets: Vec::new(),
            sweep: SweepGrid::default(),
            norwegian: NorwegianGrid::default(),
        }
    }
}

/// First backtick-quoted word of a parser message, which names the key.
fn offending_key(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let key = offending_key(&message).unwrap_or_else(|| "<file>".into());
            CliError::config(key, message)
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text)
    }

    /// Applies command-line overrides; the seed and draw count propagate to
    /// both grids.
    pub fn apply(&mut self, args: &GlobalArgs) -> Result<(), CliError> {
        if let Some(seed) = args.seed {
            self.seed = Some(seed);
        }
        if let Some(draws) = args.draws {
            self.draws = Some(draws);
        }
        if let Some(jobs) = args.jobs {
            self.jobs = jobs;
        }
        if let Some(format) = args.format {
            self.format = format;
        }
        if let Some(output) = &args.output {
            self.output = output.clone();
        }
        if let Some(seed) = self.seed {
            self.sweep.base_seed = seed;
            self.norwegian.base_seed = seed;
        }
        if let Some(draws) = self.draws {
            self.sweep.draws = draws;
            self.norwegian.draws = draws;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.jobs == 0 {
            return Err(CliError::config("jobs", "must be at least 1"));
        }
        if self.draws == Some(0) {
            return Err(CliError::config("draws", "must be at least 1"));
        }
        for (key, draws) in [
            ("sweep.draws", self.sweep.draws),
            ("norwegian.draws", self.norwegian.draws),
        ] {
            if draws == 0 {
                return Err(CliError::config(key, "must be at least 1"));
            }
        }
        let check = |key: &str, values: &[f64], ok: fn(f64) -> bool, rule: &str| {
            if values.is_empty() {
                return Err(CliError::config(key, "must not be empty"));
            }
            match values.iter().find(|v| !ok(**v)) {
                Some(v) => Err(CliError::config(key, format!("{v} is invalid; {rule}"))),
                None => Ok(()),
            }
        };
        let s = &self.sweep;
        check(
            "sweep.alphas",
            &s.alphas,
            |v| v > 0.0 && v <= 1.0,
            "must lie in (0, 1]",
        )?;
        check("sweep.betas", &s.betas, f64::is_finite, "must be finite")?;
        check(
            "sweep.risk_aversions",
            &s.risk_aversions,
            |v| v > 0.0 && v.is_finite(),
            "must be positive",
        )?;
        check(
            "sweep.sigma_thetas",
            &s.sigma_thetas,
            |v| v >= 0.0 && v.is_finite(),
            "must be >= 0",
        )?;
        check(
            "sweep.sigma_omegas",
            &s.sigma_omegas,
            |v| v >= 0.0 && v.is_finite(),
            "must be >= 0",
        )?;
        check(
            "sweep.triggers",
            &s.triggers,
            f64::is_finite,
            "must be finite",
        )?;
        if !(s.cost_coeff > 0.0 && s.cost_coeff.is_finite()) {
            return Err(CliError::config("sweep.cost_coeff", "must be positive"));
        }
        let n = &self.norwegian;
        check(
            "norwegian.risk_aversions",
            &n.risk_aversions,
            |v| v > 0.0 && v.is_finite(),
            "must be positive",
        )?;
        check(
            "norwegian.sigma_thetas",
            &n.sigma_thetas,
            |v| v >= 0.0 && v.is_finite(),
            "must be >= 0",
        )?;
        check(
            "norwegian.sigma_omegas",
            &n.sigma_omegas,
            |v| v >= 0.0 && v.is_finite(),
            "must be >= 0",
        )?;
        check(
            "norwegian.triggers",
            &n.triggers,
            f64::is_finite,
            "must be finite",
        )?;
        if let Some(costs) = self.norwegian.cost_coeffs {
            check(
                "norwegian.cost_coeffs",
                &costs,
                |v| v > 0.0 && v.is_finite(),
                "must be positive",
            )?;
        }
        for name in &self.fleets {
            if FleetCalibration::by_name(name).is_none() {
                return Err(CliError::config(
                    "fleets",
                    format!("unknown fleet {name:?}"),
                ));
            }
        }
        Ok(())
    }
}

/// Formats like C's `%g` with six significant digits.
pub fn format_g(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        trim(&format!("{:.*}", (5 - exp) as usize, v))
    }
}

fn rounded(v: f64) -> Value {
    if v.is_finite() {
        json!(format_g(v).parse::<f64>().expect("formatted float parses"))
    } else {
        Value::Null
    }
}

/// Column names for a set of records sharing one input layout.
pub fn columns(input_names: &[String]) -> Vec<String> {
    let mut cols: Vec<String> = [
        "fleet",
        "index",
        "alpha",
        "beta",
        "risk_aversion",
        "sigma_theta",
        "sigma_omega",
        "trigger",
        "seed",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let block = |cols: &mut Vec<String>, prefix: &str| {
        cols.extend(input_names.iter().map(|n| format!("{prefix}_{n}")));
    };
    block(&mut cols, "baseline");
    cols.extend(["baseline_profit".into(), "baseline_harvest".into()]);
    block(&mut cols, "insured");
    cols.extend([
        "insured_profit".into(),
        "insured_harvest".into(),
        "gamma_star".into(),
    ]);
    block(&mut cols, "pct_change");
    cols.extend([
        "pct_change_harvest".into(),
        "utility_gain_pct".into(),
        "converged".into(),
    ]);
    cols
}

enum Cell {
    Text(String),
    Num(f64),
    Missing,
    Bool(bool),
    Int(u64),
}

fn row(record: &SweepRecord) -> Vec<Cell> {
    let c = &record.cell;
    let opt = |v: Option<f64>| v.map(Cell::Num).unwrap_or(Cell::Missing);
    let mut out = vec![
        Cell::Text(c.fleet.clone()),
        Cell::Text(c.index.name().to_string()),
        opt(c.alpha),
        opt(c.beta),
        Cell::Num(c.risk_aversion),
        Cell::Num(c.sigma_theta),
        Cell::Num(c.sigma_omega),
        Cell::Num(c.trigger),
        Cell::Int(c.seed),
    ];
    out.extend(record.baseline_inputs.iter().map(|v| Cell::Num(*v)));
    out.extend([
        Cell::Num(record.baseline_profit),
        Cell::Num(record.baseline_harvest),
    ]);
    out.extend(record.insured_inputs.iter().map(|v| Cell::Num(*v)));
    out.extend([
        Cell::Num(record.insured_profit),
        Cell::Num(record.insured_harvest),
        Cell::Num(record.gamma_star),
    ]);
    out.extend(record.pct_change_inputs.iter().map(|v| Cell::Num(*v)));
    out.extend([
        Cell::Num(record.pct_change_harvest),
        Cell::Num(record.utility_gain_pct),
        Cell::Bool(record.converged),
    ]);
    out
}

fn sorted(records: &[SweepRecord]) -> Result<Vec<&SweepRecord>, CliError> {
    let mut rows: Vec<&SweepRecord> = records.iter().collect();
    rows.sort_by(|a, b| a.cell.cmp_key(&b.cell));
    if let Some(first) = rows.first() {
        if rows.iter().any(|r| r.input_names != first.input_names) {
            return Err(CliError::Model(ModelError::invalid(
                "records",
                "cannot export records with different input sets together",
            )));
        }
    }
    Ok(rows)
}

fn record_names(rows: &[&SweepRecord]) -> Vec<String> {
    rows.first()
        .map(|r| r.input_names.clone())
        .unwrap_or_default()
}

/// CSV text in canonical row order.
pub fn render_csv(records: &[SweepRecord]) -> Result<String, CliError> {
    let rows = sorted(records)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(columns(&record_names(&rows)))?;
    for record in rows {
        let fields: Vec<String> = row(record)
            .into_iter()
            .map(|c| match c {
                Cell::Text(s) => s,
                Cell::Num(v) => format_g(v),
                Cell::Missing => String::new(),
                Cell::Bool(b) => b.to_string(),
                Cell::Int(i) => i.to_string(),
            })
            .collect();
        writer.write_record(&fields)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// JSON array of row objects (keys in column order, numbers rounded as in
/// the CSV output).
pub fn render_json(records: &[SweepRecord]) -> Result<String, CliError> {
    let rows = sorted(records)?;
    let cols = columns(&record_names(&rows));
    let array: Vec<Value> = rows
        .into_iter()
        .map(|record| {
            let mut obj = Map::new();
            for (key, cell) in cols.iter().zip(row(record)) {
                let v = match cell {
                    Cell::Text(s) => Value::String(s),
                    Cell::Num(v) => rounded(v),
                    Cell::Missing => Value::Null,
                    Cell::Bool(b) => Value::Bool(b),
                    Cell::Int(i) => json!(i),
                };
                obj.insert(key.clone(), v);
            }
            Value::Object(obj)
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&array)?;
    text.push('\n');
    Ok(text)
}

pub fn export(records: &[SweepRecord], format: OutputFormat, path: &Path) -> Result<(), CliError> {
    let text = match format {
        OutputFormat::Csv => render_csv(records)?,
        OutputFormat::Json => render_json(records)?,
    };
    fs::write(path, text).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    records: usize,
    failed: usize,
    failure_rate: f64,
    outputs: Vec<String>,
    config: &'a RunConfig,
}

fn unpack(r: Result<SweepResult, SweepError>) -> Result<(SweepResult, bool), CliError> {
    match r {
        Ok(r) => Ok((r, true)),
        Err(SweepError::TooManyFailures {
            result,
            failed,
            total,
        }) => {
            log::error!("{failed} of {total} cells failed");
            Ok((*result, false))
        }
        Err(SweepError::Model(e)) => Err(e.into()),
    }
}

fn merge(results: Vec<SweepResult>) -> SweepResult {
    let failed = results.iter().map(|r| r.failed).sum();
    let mut records: Vec<SweepRecord> = results.into_iter().flat_map(|r| r.records).collect();
    records.sort_by(|a, b| a.cell.cmp_key(&b.cell));
    SweepResult { records, failed }
}

fn prepare_output(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_results(
    command: &str,
    config: &RunConfig,
    seed: u64,
    result: &SweepResult,
    extra: Vec<(String, Value)>,
) -> Result<Vec<String>, CliError> {
    let dir = &config.output;
    prepare_output(dir)?;
    let results_name = format!("results.{}", config.format.extension());
    export(&result.records, config.format, &dir.join(&results_name))?;
    let mut outputs = vec![results_name];
    for (name, value) in extra {
        write_json(&dir.join(&name), &value)?;
        outputs.push(name);
    }
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        records: result.records.len(),
        failed: result.failed,
        failure_rate: result.failure_rate(),
        outputs: outputs.clone(),
        config,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(outputs)
}

fn summary_json(records: &[SweepRecord], group_by: &[GroupKey]) -> Result<Value, CliError> {
    Ok(serde_json::to_value(summarize(records, group_by))?)
}

/// Runs the single-input sweep for the requested contract indices.
pub fn sweep(config: &RunConfig, args: &SweepArgs) -> Result<(SweepResult, bool), CliError> {
    let mut all_ok = true;
    let mut results = Vec::new();
    for index in args.index.variables() {
        let mut grid = config.sweep.clone().with_index(index);
        if !args.trigger.is_empty() {
            grid.triggers = args.trigger.clone();
        }
        let (result, ok) = unpack(run_single_input_sweep(&grid))?;
        all_ok &= ok;
        results.push(result);
    }
    Ok((merge(results), all_ok))
}

/// Runs the fleet calibrations for the requested fleets and indices.
pub fn norwegian(
    config: &RunConfig,
    args: &NorwegianArgs,
) -> Result<(SweepResult, bool), CliError> {
    let names = if !args.fleet.is_empty() {
        &args.fleet
    } else {
        &config.fleets
    };
    let fleets: Vec<FleetCalibration> = if names.is_empty() {
        FleetCalibration::presets()
    } else {
        names
            .iter()
            .map(|n| {
                FleetCalibration::by_name(n)
                    .ok_or_else(|| CliError::config("fleet", format!("unknown fleet {n:?}")))
            })
            .collect::<Result<_, _>>()?
    };
    let mut all_ok = true;
    let mut results = Vec::new();
    for fleet in &fleets {
        for index in args.index.variables() {
            let mut grid = config.norwegian.clone().with_index(index);
            if !args.trigger.is_empty() {
                grid.triggers = args.trigger.clone();
            }
            let (result, ok) = unpack(run_norwegian(fleet, &grid))?;
            all_ok &= ok;
            results.push(result);
        }
    }
    Ok((merge(results), all_ok))
}

/// Result of `solve`: the baseline and, when insurable risk exists, the
/// insured optimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOutcome {
    pub baseline_inputs: Vec<f64>,
    pub baseline_profit: f64,
    pub insured_inputs: Option<Vec<f64>>,
    pub insured_profit: Option<f64>,
    pub gamma: Option<f64>,
}

impl SolveOutcome {
    pub fn render(&self) -> String {
        let fmt = |x: &[f64]| {
            if x.len() == 1 {
                format!("{:.4}", x[0])
            } else {
                format!(
                    "[{}]",
                    x.iter()
                        .map(|v| format!("{v:.4}"))
                        .collect::<Vec<_>>()
                        .join(", ")
                )
            }
        };
        let mut out = format!(
            "x*={} profit={:.4}",
            fmt(&self.baseline_inputs),
            self.baseline_profit
        );
        if let (Some(x), Some(p), Some(g)) = (&self.insured_inputs, self.insured_profit, self.gamma)
        {
            out.push_str(&format!(
                "\ninsured: gamma={g:.4} x*={} profit={p:.4}",
                fmt(x)
            ));
        }
        out
    }
}

pub fn solve(config: &RunConfig, args: &SolveArgs) -> Result<SolveOutcome, CliError> {
    let index = match args.index {
        IndexChoice::Theta => ShockVariable::Theta,
        IndexChoice::Omega => ShockVariable::Omega,
        IndexChoice::Both => return Err(CliError::config("index", "solve takes a single index")),
    };
    let mode = if args.standard {
        ProductionMode::Standard
    } else {
        ProductionMode::Risky
    };
    let production = ProductionSpec::single(mode, args.alpha, args.beta, args.cost);
    let shocks = ShockSpec::independent(args.sigma_theta, args.sigma_omega);
    let prefs = Preferences::new(args.risk_aversion)?;
    let draws = config.draws.unwrap_or(config.sweep.draws);
    let seed = config.seed.unwrap_or(config.sweep.base_seed);
    let panel = sample_shocks(&shocks, draws, seed)?;
    let sigma = shocks.sigma(index);
    let template = ContractTemplate::new(index, args.trigger * sigma);
    let problem = DecisionProblem::new(production, shocks, panel, prefs, template)?
        .with_settings(config.sweep.settings)?;
    let base = problem.baseline()?;
    let mut outcome = SolveOutcome {
        baseline_inputs: base.inputs.clone(),
        baseline_profit: base.expected_profit,
        insured_inputs: None,
        insured_profit: None,
        gamma: None,
    };
    if sigma > 0.0 {
        let insured = match args.gamma {
            Some(g) => problem.optimize_inputs(g, base.expected_profit)?,
            None => problem.optimize_inputs_and_coverage_from(&base)?,
        };
        outcome.gamma = Some(insured.gamma_frac);
        outcome.insured_inputs = Some(insured.inputs);
        outcome.insured_profit = Some(insured.expected_profit);
    } else if args.gamma.is_some_and(|g| g != 0.0) {
        return Err(CliError::config(
            "gamma",
            format!("the {index} index has zero variance"),
        ));
    }
    Ok(outcome)
}

pub fn verify(config: &RunConfig, args: &VerifyArgs) -> Result<VerifyReport, CliError> {
    let tier = if args.quick {
        VerifyTier::Quick
    } else {
        VerifyTier::Full
    };
    let options = VerifyOptions {
        draws: config.draws,
        grid: config.sweep.clone(),
        norwegian: config.norwegian.clone(),
        ..VerifyOptions::new(tier, config.seed.unwrap_or(config.sweep.base_seed))
    };
    Ok(run_suite(&options)?)
}

/// Parses nothing; executes an already-parsed command line and returns the
/// process exit code.
pub fn run(cli: Cli) -> Result<u8, CliError> {
    let mut config = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.apply(&cli.global)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()?;
    pool.install(|| execute(&config, &cli.command))
}

fn execute(config: &RunConfig, command: &Command) -> Result<u8, CliError> {
    match command {
        Command::Solve(args) => {
            let outcome = solve(config, args)?;
            println!("{}", outcome.render());
            Ok(EXIT_OK)
        }
        Command::Sweep(args) => {
            let (result, ok) = sweep(config, args)?;
            let extra = vec![(
                "summary.json".to_string(),
                summary_json(&result.records, &[GroupKey::Index, GroupKey::BetaSign])?,
            )];
            let outputs = write_results("sweep", config, config.sweep.base_seed, &result, extra)?;
            println!(
                "{} cells, {} failed; wrote {} to {}",
                result.records.len(),
                result.failed,
                outputs.join(", "),
                config.output.display()
            );
            Ok(if ok { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Norwegian(args) => {
            let (result, ok) = norwegian(config, args)?;
            let extra = vec![(
                "summary.json".to_string(),
                summary_json(&result.records, &[GroupKey::Fleet, GroupKey::Index])?,
            )];
            let outputs = write_results(
                "norwegian",
                config,
                config.norwegian.base_seed,
                &result,
                extra,
            )?;
            println!(
                "{} cells, {} failed; wrote {} to {}",
                result.records.len(),
                result.failed,
                outputs.join(", "),
                config.output.display()
            );
            Ok(if ok { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Verify(args) => {
            let report = verify(config, args)?;
            prepare_output(&config.output)?;
            write_json(&config.output.join("verify_report.json"), &report)?;
            let manifest = Manifest {
                command: "verify",
                version: env!("CARGO_PKG_VERSION"),
                seed: report.seed,
                records: report.total_cells,
                failed: report.failed_cells,
                failure_rate: if report.total_cells == 0 {
                    0.0
                } else {
                    report.failed_cells as f64 / report.total_cells as f64
                },
                outputs: vec!["verify_report.json".into(), "manifest.json".into()],
                config,
            };
            write_json(&config.output.join("manifest.json"), &manifest)?;
            let failures: Vec<_> = report.claims.iter().filter(|c| !c.pass).collect();
            for c in failures.iter().take(20) {
                println!(
                    "FAIL {} observed={} {}",
                    c.claim_id,
                    format_g(c.observed_value),
                    c.context
                );
            }
            for s in &report.soft {
                if let Some(w) = &s.warning {
                    log::warn!("{}: {w}", s.id);
                }
            }
            println!(
                "{}: {} of {} claims passed ({} failed)",
                if report.passed { "PASS" } else { "FAIL" },
                report.claims.len() - failures.len(),
                report.claims.len(),
                failures.len()
            );
            Ok(if report.passed { EXIT_OK } else { EXIT_FAILED })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_format_matches_printf() {
        let cases = [
            (0.75, "0.75"),
            (1.0, "1"),
            (123456.0, "123456"),
            (1234567.0, "1.23457e+06"),
            (0.0001234567, "0.000123457"),
            (0.00001234567, "1.23457e-05"),
            (-2.5, "-2.5"),
            (99.999996, "100"),
            (999999.5, "1e+06"),
            (0.0, "0"),
        ];
        for (v, s) in cases {
            assert_eq!(format_g(v), s, "{v}");
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml("seed = 1\ndrawz = 5\n").unwrap_err();
        assert_eq!(err.exit_code(), EXIT_CONFIG);
        assert!(
            matches!(&err, CliError::Config { key, .. } if key == "drawz"),
            "{err}"
        );
        let err = RunConfig::from_toml("[sweep]\nalphas = [0.5, 1.5]\n").unwrap_err();
        assert!(
            matches!(&err, CliError::Config { key, .. } if key == "sweep.alphas"),
            "{err}"
        );
        let err = RunConfig::from_toml("[sweep]\nbogus = 1\n").unwrap_err();
        assert!(
            matches!(&err, CliError::Config { key, .. } if key == "bogus"),
            "{err}"
        );
    }

    #[test]
    fn fleet_costs_are_configurable() {
        let config =
            RunConfig::from_toml("[norwegian]\ncost_coeffs = [0.25, 0.25, 0.25]\n").unwrap();
        assert_eq!(config.norwegian.cost_coeffs, Some([0.25; 3]));
        let err =
            RunConfig::from_toml("[norwegian]\ncost_coeffs = [0.25, 0.0, 0.25]\n").unwrap_err();
        assert!(
            matches!(&err, CliError::Config { key, .. } if key == "norwegian.cost_coeffs"),
            "{err}"
        );
    }

    #[test]
    fn flags_override_file() {
        let mut config = RunConfig::from_toml("seed = 5\ndraws = 300\n").unwrap();
        config
            .apply(&GlobalArgs {
                seed: Some(9),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(config.sweep.base_seed, 9);
        assert_eq!(config.norwegian.draws, 300);
        assert!(config
            .apply(&GlobalArgs {
                jobs: Some(0),
                ..Default::default()
            })
            .is_err());
    }

    #[test]
    fn deterministic_solve() {
        let cli = Cli::parse_from(["indexfish", "solve", "--alpha", "0.5", "--c", "0.25"]);
        let Command::Solve(args) = cli.command else {
            panic!()
        };
        let outcome = solve(&RunConfig::default(), &args).unwrap();
        assert_eq!(outcome.render(), "x*=1.0000 profit=0.7500");
    }

    #[test]
    fn bad_flag_value_is_config_error() {
        let cli = Cli::parse_from(["indexfish", "solve", "--alpha", "1.5"]);
        let Command::Solve(args) = cli.command else {
            panic!()
        };
        let err = solve(&RunConfig::default(), &args).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_CONFIG, "{err}");
    }
}
