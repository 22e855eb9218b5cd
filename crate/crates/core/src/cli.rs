//! Command-line front end: sample, trace, compare, and sweep.
//!
//! Four subcommands cover the workflow end to end:
//!
//! * `simulate` writes a seeded sample path as a plain text file;
//! * `estimate` streams a path — freshly sampled, or read back from such a
//!   file — through the online estimator and writes the per-event trace;
//! * `compare-oracle` runs a batch of replications and summarizes how the
//!   estimates track the source's exact conditionals;
//! * `sweep` crosses exponent and schedule grids and writes one summary
//!   row per grid point and replication.
//!
//! Every output begins with `#`-prefixed header lines recording the fully
//! resolved configuration, so a file can always be traced back to the
//! invocation that produced it, and rerunning that invocation reproduces
//! the file byte for byte. Settings resolve in precedence order: explicit
//! flags, then an optional `key = value` configuration file, then the
//! header of a path file being read back, then built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::alphabet::{Path, Symbol};
use crate::experiment::{final_decile, run_experiment, run_on_path, Replication, RunOptions};
use crate::params::{EstimatorParams, ParamError};
use crate::process::{Memory, Process, ProcessError, ProcessKind, ProcessSpec};
use crate::schedule::Schedule;

/// Failure modes mapped onto process exit codes: configuration or input
/// problems exit with 1, file-system trouble with 2.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
}

impl From<ProcessError> for CliError {
    fn from(err: ProcessError) -> Self {
        CliError::Validation(err.to_string())
    }
}

impl From<ParamError> for CliError {
    fn from(err: ParamError) -> Self {
        CliError::Validation(err.to_string())
    }
}

impl From<crate::predictor::PredictorError> for CliError {
    fn from(err: crate::predictor::PredictorError) -> Self {
        CliError::Validation(err.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "seqpred",
    version,
    about = "Online prediction for stationary symbol streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded sample path from a configured source
    Simulate(CommonOnly),
    /// Stream a path through the estimator and write the event trace
    Estimate(EstimateArgs),
    /// Summarize estimate-versus-oracle agreement per replication
    CompareOracle(CommonOnly),
    /// Run a grid of exponent and schedule settings
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Default, Args)]
struct CommonArgs {
    /// Source description: `iid:0.5,0.5`, `markov:order=1;kernel=0.9,0.1|0.2,0.8`,
    /// `hmm:transition=0.9,0.1|0.1,0.9;emission=0.95,0.05|0.05,0.95`,
    /// `geometric:0.5`, or a bare kind name combined with --kernel-file
    #[arg(long)]
    process: Option<String>,

    /// Chain order when the kernel comes from --kernel-file
    #[arg(long)]
    order: Option<usize>,

    /// Matrix file: whitespace-separated rows, `#` comments; a blank line
    /// separates the transition block from the emission block for `hmm`
    #[arg(long)]
    kernel_file: Option<PathBuf>,

    /// Width exponent (between 0 and 1)
    #[arg(long)]
    beta: Option<f64>,

    /// Support exponent (between 0 and 1, with 2*beta + gamma < 1)
    #[arg(long)]
    gamma: Option<f64>,

    /// Block-length schedule: `identity`, `log[:delta=..,eps1=..,eps2=..]`,
    /// or `table:l1,l2,...`
    #[arg(long)]
    schedule: Option<String>,

    /// Number of observed symbols per replication
    #[arg(long)]
    horizon: Option<usize>,

    /// Number of replications
    #[arg(long)]
    replications: Option<usize>,

    /// Master seed; replication r of a batch derives its own seed from it
    #[arg(long)]
    seed: Option<u64>,

    /// Plain-text `key = value` configuration file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CommonOnly {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Read the path from a `simulate` output file instead of sampling;
    /// the file fixes the horizon unless --horizon truncates it
    #[arg(long)]
    path_file: Option<PathBuf>,

    /// Restrict estimate columns to these symbols; repeat per symbol
    #[arg(long = "track")]
    track: Vec<Symbol>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Grid values for the width exponent; repeat the flag per value
    #[arg(long = "grid-beta")]
    grid_beta: Vec<f64>,

    /// Grid values for the support exponent; repeat the flag per value
    #[arg(long = "grid-gamma")]
    grid_gamma: Vec<f64>,

    /// Grid values for the schedule; repeat the flag per value
    #[arg(long = "grid-schedule")]
    grid_schedule: Vec<String>,
}

/// Entry point for the binary: parses arguments, dispatches, and maps
/// failures onto exit codes.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(args) => cmd_simulate(&args.common),
        Command::Estimate(args) => cmd_estimate(&args),
        Command::CompareOracle(args) => cmd_compare_oracle(&args.common),
        Command::Sweep(args) => cmd_sweep(&args),
    }
}

// ---------------------------------------------------------------------------
// Configuration resolution

const CONFIG_KEYS: &[&str] = &[
    "process",
    "order",
    "kernel-file",
    "beta",
    "gamma",
    "schedule",
    "horizon",
    "replications",
    "seed",
    "out",
];

const DEFAULT_BETA: f64 = 0.3;
const DEFAULT_GAMMA: f64 = 0.3;
const DEFAULT_HORIZON: usize = 10_000;

/// Settings after merging flags, config file, path-file header, and
/// defaults.
#[derive(Debug, Clone)]
struct Resolved {
    process_text: Option<String>,
    order: Option<usize>,
    kernel_file: Option<PathBuf>,
    beta: f64,
    gamma: f64,
    schedule: Schedule,
    horizon: usize,
    replications: usize,
    seed: u64,
    out: Option<PathBuf>,
}

fn parse_value<T: FromStr>(text: &str, key: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    text.parse()
        .map_err(|e| CliError::Validation(format!("{key}: cannot parse `{text}`: {e}")))
}

fn setting<T: FromStr>(
    flag: Option<T>,
    config: &BTreeMap<String, String>,
    header: Option<&BTreeMap<String, String>>,
    key: &str,
    default: T,
) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    match optional(flag, config, header, key)? {
        Some(v) => Ok(v),
        None => Ok(default),
    }
}

fn optional<T: FromStr>(
    flag: Option<T>,
    config: &BTreeMap<String, String>,
    header: Option<&BTreeMap<String, String>>,
    key: &str,
) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = flag {
        return Ok(Some(v));
    }
    match config
        .get(key)
        .or_else(|| header.and_then(|h| h.get(key)))
    {
        Some(text) => Ok(Some(parse_value(text, key)?)),
        None => Ok(None),
    }
}

fn resolve(
    common: &CommonArgs,
    header: Option<&BTreeMap<String, String>>,
) -> Result<Resolved, CliError> {
    let config = match &common.config {
        Some(path) => {
            let text = read_text(path)?;
            parse_config_file(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        }
        None => BTreeMap::new(),
    };

    let schedule = match optional(common.schedule.clone(), &config, header, "schedule")? {
        Some(text) => parse_schedule(&text).map_err(CliError::Validation)?,
        None => Schedule::Identity,
    };
    let resolved = Resolved {
        process_text: optional(common.process.clone(), &config, header, "process")?,
        order: optional(common.order, &config, header, "order")?,
        kernel_file: optional(common.kernel_file.clone(), &config, header, "kernel-file")?,
        beta: setting(common.beta, &config, header, "beta", DEFAULT_BETA)?,
        gamma: setting(common.gamma, &config, header, "gamma", DEFAULT_GAMMA)?,
        schedule,
        horizon: setting(common.horizon, &config, header, "horizon", DEFAULT_HORIZON)?,
        replications: setting(common.replications, &config, header, "replications", 1)?,
        seed: setting(common.seed, &config, header, "seed", 0)?,
        out: optional(common.out.clone(), &config, header, "out")?,
    };
    if resolved.horizon < 1 {
        return Err(CliError::Validation("horizon must be at least 1".into()));
    }
    if resolved.replications < 1 {
        return Err(CliError::Validation(
            "replications must be at least 1".into(),
        ));
    }
    Ok(resolved)
}

impl Resolved {
    fn params(&self) -> Result<EstimatorParams, CliError> {
        let params = EstimatorParams::new(self.beta, self.gamma, self.schedule.clone());
        params.validate()?;
        Ok(params)
    }

    fn process(&self) -> Result<Process, CliError> {
        let text = self.process_text.as_deref().ok_or_else(|| {
            CliError::Validation(
                "no source given: pass --process or a config/path file that names one".into(),
            )
        })?;
        let kind = if text.contains(':') {
            parse_process_kind(text).map_err(CliError::Validation)?
        } else {
            self.kind_from_file(text)?
        };
        Ok(Process::new(ProcessSpec::new(kind, self.seed))?)
    }

    fn kind_from_file(&self, name: &str) -> Result<ProcessKind, CliError> {
        let path = self.kernel_file.as_ref().ok_or_else(|| {
            CliError::Validation(format!(
                "process `{name}` without an inline body needs --kernel-file"
            ))
        })?;
        let text = read_text(path)?;
        let blocks = parse_matrix_blocks(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let expect_blocks = |n: usize| -> Result<(), CliError> {
            if blocks.len() == n {
                Ok(())
            } else {
                Err(CliError::Validation(format!(
                    "{}: `{name}` needs {n} matrix block(s), found {}",
                    path.display(),
                    blocks.len()
                )))
            }
        };
        match name {
            "iid" => {
                expect_blocks(1)?;
                if blocks[0].len() != 1 {
                    return Err(CliError::Validation(format!(
                        "{}: `iid` takes a single probability row, found {} rows",
                        path.display(),
                        blocks[0].len()
                    )));
                }
                Ok(ProcessKind::Iid {
                    probabilities: blocks[0][0].clone(),
                })
            }
            "markov" => {
                expect_blocks(1)?;
                Ok(ProcessKind::Markov {
                    order: self.order.unwrap_or(1),
                    kernel: blocks[0].clone(),
                })
            }
            "hmm" => {
                expect_blocks(2)?;
                Ok(ProcessKind::HiddenMarkov {
                    transition: blocks[0].clone(),
                    emission: blocks[1].clone(),
                })
            }
            "geometric" => Err(CliError::Validation(
                "geometric takes its parameter inline, e.g. geometric:0.5".into(),
            )),
            other => Err(CliError::Validation(format!(
                "unknown process kind `{other}` (expected iid, markov, hmm, or geometric)"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Text formats

/// Parses a full inline source description like `markov:order=1;kernel=...`.
pub fn parse_process_kind(text: &str) -> Result<ProcessKind, String> {
    let (name, body) = text
        .split_once(':')
        .ok_or_else(|| format!("`{text}` is not a source description"))?;
    match name {
        "iid" => Ok(ProcessKind::Iid {
            probabilities: parse_row(body)?,
        }),
        "geometric" => Ok(ProcessKind::Geometric {
            parameter: body
                .parse()
                .map_err(|_| format!("`{body}` is not a number"))?,
        }),
        "markov" => {
            let fields = parse_fields(body, &["order", "kernel"])?;
            Ok(ProcessKind::Markov {
                order: fields["order"]
                    .parse()
                    .map_err(|_| format!("order: `{}` is not a whole number", fields["order"]))?,
                kernel: parse_matrix(&fields["kernel"])?,
            })
        }
        "hmm" => {
            let fields = parse_fields(body, &["transition", "emission"])?;
            Ok(ProcessKind::HiddenMarkov {
                transition: parse_matrix(&fields["transition"])?,
                emission: parse_matrix(&fields["emission"])?,
            })
        }
        other => Err(format!(
            "unknown process kind `{other}` (expected iid, markov, hmm, or geometric)"
        )),
    }
}

/// Canonical inline form of a source description; `parse_process_kind`
/// reads it back verbatim.
pub fn process_string(kind: &ProcessKind) -> String {
    match kind {
        ProcessKind::Iid { probabilities } => format!("iid:{}", join_row(probabilities)),
        ProcessKind::Markov { order, kernel } => {
            format!("markov:order={order};kernel={}", join_matrix(kernel))
        }
        ProcessKind::HiddenMarkov {
            transition,
            emission,
        } => format!(
            "hmm:transition={};emission={}",
            join_matrix(transition),
            join_matrix(emission)
        ),
        ProcessKind::Geometric { parameter } => format!("geometric:{parameter}"),
    }
}

fn parse_fields(body: &str, keys: &[&str]) -> Result<BTreeMap<String, String>, String> {
    let mut fields = BTreeMap::new();
    for part in body.split(';') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("`{part}` is not a `key=value` field"))?;
        if !keys.contains(&key) {
            return Err(format!(
                "unknown field `{key}` (expected one of: {})",
                keys.join(", ")
            ));
        }
        if fields.insert(key.to_string(), value.to_string()).is_some() {
            return Err(format!("field `{key}` given twice"));
        }
    }
    for key in keys {
        if !fields.contains_key(*key) {
            return Err(format!("missing field `{key}`"));
        }
    }
    Ok(fields)
}

fn parse_row(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse()
                .map_err(|_| format!("`{tok}` is not a number"))
        })
        .collect()
}

fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>, String> {
    text.split('|').map(parse_row).collect()
}

fn join_row(xs: &[f64]) -> String {
    xs.iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn join_matrix(m: &[Vec<f64>]) -> String {
    m.iter()
        .map(|row| join_row(row))
        .collect::<Vec<_>>()
        .join("|")
}

/// Parses a schedule description: `identity`,
/// `log[:delta=..,eps1=..,eps2=..]` (omitted constants keep their
/// defaults), or `table:l1,l2,...`.
pub fn parse_schedule(text: &str) -> Result<Schedule, String> {
    if text == "identity" {
        return Ok(Schedule::Identity);
    }
    if text == "log" {
        return Ok(Schedule::logarithmic_default());
    }
    if let Some(body) = text.strip_prefix("log:") {
        let (mut delta, mut eps1, mut eps2) = (1.0, 0.5, 0.25);
        for part in body.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("`{part}` is not a `key=value` field"))?;
            let value: f64 = value
                .parse()
                .map_err(|_| format!("{key}: `{value}` is not a number"))?;
            match key {
                "delta" => delta = value,
                "eps1" => eps1 = value,
                "eps2" => eps2 = value,
                other => return Err(format!("unknown schedule field `{other}`")),
            }
        }
        return Schedule::logarithmic(delta, eps1, eps2).map_err(|e| e.to_string());
    }
    if let Some(body) = text.strip_prefix("table:") {
        let values = body
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("`{tok}` is not a block length"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        return Schedule::table(values).map_err(|e| e.to_string());
    }
    Err(format!(
        "unrecognized schedule `{text}` (expected identity, log[:delta=..,eps1=..,eps2=..], or table:l1,l2,...)"
    ))
}

/// Canonical text form of a schedule; `parse_schedule` reads it back.
pub fn schedule_string(schedule: &Schedule) -> String {
    match schedule {
        Schedule::Identity => "identity".into(),
        Schedule::Logarithmic { delta, eps1, eps2 } => {
            format!("log:delta={delta},eps1={eps1},eps2={eps2}")
        }
        Schedule::Table { values } => format!(
            "table:{}",
            values
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(",")
        ),
    }
}

/// Parses a plain-text configuration file: one `key = value` per line,
/// `#` comments, blank lines ignored.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`, got `{line}`", lineno + 1))?;
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(format!(
                "line {}: unknown setting `{key}` (expected one of: {})",
                lineno + 1,
                CONFIG_KEYS.join(", ")
            ));
        }
        if map
            .insert(key.to_string(), value.trim().to_string())
            .is_some()
        {
            return Err(format!("line {}: setting `{key}` given twice", lineno + 1));
        }
    }
    Ok(map)
}

/// Parses whitespace-separated matrix rows with `#` comments; one or more
/// blank lines separate consecutive blocks.
pub fn parse_matrix_blocks(text: &str) -> Result<Vec<Vec<Vec<f64>>>, String> {
    let mut blocks = Vec::new();
    let mut current: Vec<Vec<f64>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            if !current.is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| format!("line {}: `{tok}` is not a number", lineno + 1))
            })
            .collect::<Result<Vec<f64>, String>>()?;
        current.push(row);
    }
    if !current.is_empty() {
        blocks.push(current);
    }
    if blocks.is_empty() {
        return Err("no matrix rows found".into());
    }
    Ok(blocks)
}

/// Splits a path file into its `key = value` header and its symbols.
pub fn parse_path_file(text: &str) -> Result<(BTreeMap<String, String>, Vec<Symbol>), String> {
    let mut header = BTreeMap::new();
    let mut symbols = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                header.insert(key.trim().to_string(), value.trim().to_string());
            }
            continue;
        }
        let symbol = line
            .parse()
            .map_err(|_| format!("line {}: expected a symbol, got `{line}`", lineno + 1))?;
        symbols.push(symbol);
    }
    Ok((header, symbols))
}

// ---------------------------------------------------------------------------
// Output plumbing

fn read_text(path: &FsPath) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_output(out: Option<&FsPath>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn header_lines(title: &str, entries: &[(&str, String)]) -> String {
    let mut text = format!("# {title}\n");
    for (key, value) in entries {
        writeln!(text, "# {key} = {value}").unwrap();
    }
    text
}

fn fmt_cell(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Mean and max over the final decile of the per-event errors, as CSV
/// cells (empty when the run produced no oracle comparisons).
fn decile_error_cells(errors: &[f64]) -> (String, String) {
    if errors.is_empty() {
        return (String::new(), String::new());
    }
    let tail = final_decile(errors);
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let max = tail.iter().fold(0.0f64, |acc, &e| acc.max(e));
    (mean.to_string(), max.to_string())
}

// ---------------------------------------------------------------------------
// Commands

fn cmd_simulate(common: &CommonArgs) -> Result<(), CliError> {
    let resolved = resolve(common, None)?;
    let process = resolved.process()?;
    let path = process.generate(resolved.horizon);
    let mut out = header_lines(
        "seqpred path",
        &[
            ("process", process_string(&process.spec().kind)),
            ("seed", resolved.seed.to_string()),
            ("horizon", resolved.horizon.to_string()),
        ],
    );
    for &x in path.as_slice() {
        writeln!(out, "{x}").unwrap();
    }
    write_output(resolved.out.as_deref(), &out)
}

fn cmd_estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let file = match &args.path_file {
        Some(path) => {
            let text = read_text(path)?;
            let (header, symbols) = parse_path_file(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            if symbols.is_empty() {
                return Err(CliError::Validation(format!(
                    "{}: no symbols",
                    path.display()
                )));
            }
            Some((header, symbols))
        }
        None => None,
    };
    let mut resolved = resolve(&args.common, file.as_ref().map(|(h, _)| h))?;

    let path = match file {
        Some((_, mut symbols)) => {
            match args.common.horizon {
                Some(h) if h > symbols.len() => {
                    return Err(CliError::Validation(format!(
                        "path file provides {} symbols but --horizon asks for {h}",
                        symbols.len()
                    )));
                }
                Some(h) => symbols.truncate(h),
                None => {}
            }
            resolved.horizon = symbols.len();
            Path::from_symbols(symbols)
        }
        None => {
            let process = resolved.process()?;
            process.generate(resolved.horizon)
        }
    };

    let process = match resolved.process_text {
        Some(_) => Some(resolved.process()?),
        None if args.path_file.is_some() => None,
        None => {
            return Err(CliError::Validation(
                "no source given: pass --process or a config/path file that names one".into(),
            ))
        }
    };

    // A file may carry symbols the declared source cannot emit; check the
    // whole path up front so the run never trips over an impossible prefix.
    if args.path_file.is_some() {
        if let Some(mut probe) = process.as_ref().and_then(|p| p.tracker().ok()) {
            for (position, &x) in path.iter().enumerate() {
                probe.push(x).map_err(|_| {
                    CliError::Validation(format!(
                        "symbol {x} at position {position} is impossible under the declared source"
                    ))
                })?;
            }
        }
    }

    let params = resolved.params()?;
    let options = RunOptions {
        keep_trace: true,
        tilde_depth: 0,
    };
    let rep = run_on_path(process.as_ref(), &path, &params, 0, resolved.seed, &options)?;
    let rows = rep.trace.as_deref().unwrap_or(&[]);

    let width = rows
        .iter()
        .map(|row| row.estimates.len())
        .max()
        .unwrap_or_else(|| process.as_ref().and_then(|p| p.alphabet_size()).unwrap_or(0));
    let tracked: Vec<usize> = if args.track.is_empty() {
        (0..width).collect()
    } else {
        let tracked: Vec<usize> = args.track.iter().map(|&s| s as usize).collect();
        for &s in &tracked {
            if s >= width {
                return Err(CliError::Validation(format!(
                    "--track {s} is outside the estimate columns (0..{width})"
                )));
            }
        }
        tracked
    };
    let with_oracle = rows.first().is_some_and(|row| row.oracle.is_some());

    let mut columns = vec![
        "replication".to_string(),
        "round".to_string(),
        "time".to_string(),
        "width".to_string(),
    ];
    columns.extend(tracked.iter().map(|s| format!("est{s}")));
    if with_oracle {
        columns.extend(tracked.iter().map(|s| format!("oracle{s}")));
        columns.push("abs_error".to_string());
    }
    columns.push("ratio".to_string());

    let mut entries: Vec<(&str, String)> = Vec::new();
    if let Some(process) = &process {
        entries.push(("process", process_string(&process.spec().kind)));
        entries.push(("seed", resolved.seed.to_string()));
    }
    entries.push(("beta", resolved.beta.to_string()));
    entries.push(("gamma", resolved.gamma.to_string()));
    entries.push(("schedule", schedule_string(&resolved.schedule)));
    entries.push(("horizon", resolved.horizon.to_string()));
    entries.push(("replications", "1".to_string()));
    if !args.track.is_empty() {
        entries.push((
            "track",
            args.track
                .iter()
                .map(Symbol::to_string)
                .collect::<Vec<_>>()
                .join(","),
        ));
    }
    entries.push(("columns", columns.join(",")));

    let mut out = header_lines("seqpred trace", &entries);
    for row in rows {
        let mut cells = vec![
            "0".to_string(),
            row.round.to_string(),
            row.time.to_string(),
            row.width.to_string(),
        ];
        for &s in &tracked {
            cells.push(row.estimates.get(s).copied().unwrap_or(0.0).to_string());
        }
        if with_oracle {
            let oracle = row.oracle.as_deref().unwrap_or(&[]);
            for &s in &tracked {
                cells.push(oracle.get(s).copied().unwrap_or(0.0).to_string());
            }
            cells.push(fmt_cell(row.abs_error));
        }
        cells.push(row.ratio.to_string());
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    write_output(resolved.out.as_deref(), &out)
}

fn cmd_compare_oracle(common: &CommonArgs) -> Result<(), CliError> {
    let resolved = resolve(common, None)?;
    let process = resolved.process()?;
    let params = resolved.params()?;
    let tilde_depth = match &process.spec().kind {
        ProcessKind::Markov { order, .. } => (*order).max(4),
        _ => 4,
    };
    let options = RunOptions {
        keep_trace: false,
        tilde_depth,
    };
    let reps = run_experiment(
        &process,
        &params,
        resolved.horizon,
        resolved.replications,
        &options,
    )?;

    let columns = "replication,seed,rounds,terminal_lambda,terminal_ratio,target_ratio,\
                   kappa_terminal,kappa_stable_decile,memory,err_mean_decile,err_max_decile,\
                   last_jump_round";
    let mut out = header_lines(
        "seqpred oracle comparison",
        &[
            ("process", process_string(&process.spec().kind)),
            ("seed", resolved.seed.to_string()),
            ("beta", resolved.beta.to_string()),
            ("gamma", resolved.gamma.to_string()),
            ("schedule", schedule_string(&resolved.schedule)),
            ("horizon", resolved.horizon.to_string()),
            ("replications", resolved.replications.to_string()),
            ("columns", columns.replace(char::is_whitespace, "")),
        ],
    );
    for rep in &reps {
        let (memory, target_ratio) = oracle_targets(&process, rep);
        let kappa_terminal = rep.kappas.last().copied().unwrap_or(0);
        let kappa_stable = final_decile(&rep.kappas)
            .iter()
            .all(|&k| k == kappa_terminal);
        let (err_mean, err_max) = decile_error_cells(&rep.errors);
        let cells = [
            rep.replication.to_string(),
            rep.seed.to_string(),
            rep.rounds().to_string(),
            rep.lambdas.last().copied().unwrap_or(0).to_string(),
            fmt_cell(rep.terminal_ratio()),
            target_ratio,
            kappa_terminal.to_string(),
            kappa_stable.to_string(),
            memory,
            err_mean,
            err_max,
            rep.last_long_increment_round()
                .map(|r| r.to_string())
                .unwrap_or_default(),
        ];
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    write_output(resolved.out.as_deref(), &out)
}

/// Memory label and `1 / p(reconstructed memory-length context)` for the
/// comparison summary; cells stay empty where the source cannot answer.
fn oracle_targets(process: &Process, rep: &Replication) -> (String, String) {
    match &process.spec().kind {
        ProcessKind::Iid { .. } | ProcessKind::Geometric { .. } => ("0".into(), "1".into()),
        ProcessKind::HiddenMarkov { .. } => match process.true_memory_length(&[]) {
            Ok(Memory::Finite(0)) => ("0".into(), "1".into()),
            _ => ("inf".into(), String::new()),
        },
        ProcessKind::Markov { order, .. } => {
            let context: Option<Vec<Symbol>> = (0..*order)
                .rev()
                .map(|i| rep.reconstructed.get(i).copied().flatten())
                .collect();
            let Some(context) = context else {
                return (String::new(), String::new());
            };
            match process.true_memory_length(&context) {
                Ok(Memory::Finite(k)) => {
                    let suffix = &context[context.len() - k..];
                    let p = process.marginal_block_probability(suffix);
                    if p > 0.0 {
                        (k.to_string(), (1.0 / p).to_string())
                    } else {
                        (k.to_string(), String::new())
                    }
                }
                _ => (String::new(), String::new()),
            }
        }
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let resolved = resolve(&args.common, None)?;
    let process = resolved.process()?;
    let betas = if args.grid_beta.is_empty() {
        vec![resolved.beta]
    } else {
        args.grid_beta.clone()
    };
    let gammas = if args.grid_gamma.is_empty() {
        vec![resolved.gamma]
    } else {
        args.grid_gamma.clone()
    };
    let schedules = if args.grid_schedule.is_empty() {
        vec![resolved.schedule.clone()]
    } else {
        args.grid_schedule
            .iter()
            .map(|text| parse_schedule(text).map_err(CliError::Validation))
            .collect::<Result<Vec<_>, _>>()?
    };

    // Validate the whole grid before running any point of it.
    let mut points = Vec::new();
    for &beta in &betas {
        for &gamma in &gammas {
            for schedule in &schedules {
                let params = EstimatorParams::new(beta, gamma, schedule.clone());
                params.validate().map_err(|e| {
                    CliError::Validation(format!(
                        "grid point beta={beta}, gamma={gamma}, schedule={}: {e}",
                        schedule_string(schedule)
                    ))
                })?;
                points.push((beta, gamma, schedule.clone(), params));
            }
        }
    }

    let join = |xs: &[f64]| {
        xs.iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(",")
    };
    let columns = "beta,gamma,schedule,replication,seed,rounds,terminal_lambda,terminal_ratio,\
                   kappa_terminal,err_mean_decile,err_max_decile";
    let mut out = header_lines(
        "seqpred sweep",
        &[
            ("process", process_string(&process.spec().kind)),
            ("seed", resolved.seed.to_string()),
            ("horizon", resolved.horizon.to_string()),
            ("replications", resolved.replications.to_string()),
            ("grid-beta", join(&betas)),
            ("grid-gamma", join(&gammas)),
            (
                "grid-schedule",
                schedules
                    .iter()
                    .map(schedule_string)
                    .collect::<Vec<_>>()
                    .join(";"),
            ),
            ("columns", columns.replace(char::is_whitespace, "")),
        ],
    );
    let options = RunOptions {
        keep_trace: false,
        tilde_depth: 0,
    };
    for (beta, gamma, schedule, params) in &points {
        let reps = run_experiment(
            &process,
            params,
            resolved.horizon,
            resolved.replications,
            &options,
        )?;
        for rep in &reps {
            let (err_mean, err_max) = decile_error_cells(&rep.errors);
            let cells = [
                beta.to_string(),
                gamma.to_string(),
                schedule_string(schedule),
                rep.replication.to_string(),
                rep.seed.to_string(),
                rep.rounds().to_string(),
                rep.lambdas.last().copied().unwrap_or(0).to_string(),
                fmt_cell(rep.terminal_ratio()),
                rep.kappas.last().copied().unwrap_or(0).to_string(),
                err_mean,
                err_max,
            ];
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
    }
    write_output(resolved.out.as_deref(), &out)
}
