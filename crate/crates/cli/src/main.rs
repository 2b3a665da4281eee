use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use orderstat_core::montecarlo::{estimate_many, Estimate, RunConfig, Statistic};
use orderstat_core::report::{write_csv, BoundReport};
use orderstat_core::thresholds::{threshold, ThresholdKind, ThresholdQuery, ThresholdResult};
use orderstat_core::verify::calibration::Calibration;
use orderstat_core::verify::identities::{byparts_suite, step_identity_check};
use orderstat_core::verify::lemmas::lemma_grid;
use orderstat_core::verify::suite::{run_suite, tally, GridConfig, Suite, SuiteConfig, DEFAULT_SAMPLES};
use orderstat_core::{marginals, Error, ModelConfig};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

/// Thresholds, order-statistic estimates and bound checks for random vectors.
#[derive(Parser, Debug)]
#[command(name = "orderstat", version, about, arg_required_else_help = true)]
struct Cli {
    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute t(k, X) or t*(p, X) for a model file.
    Threshold(ThresholdArgs),
    /// Monte Carlo estimate of statistics of one model.
    Estimate(EstimateArgs),
    /// Run a suite of bound checks over a grid of models.
    Verify(VerifyArgs),
    /// Layer-cake identities: exact step integral and by-parts expectations.
    Identity(IdentityArgs),
    /// Marginal-level lemma grid over the catalog.
    Lemmas(OutArgs),
    /// Sweep the default grid and write calibration windows.
    Calibrate(CalibrateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    T,
    Tstar,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum)]
    kind: Kind,
    /// One or more levels, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    level: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    model: PathBuf,
    /// kmax:K, kmin:K, topk:K or supw:P[:A1,A2,...]; repeatable.
    #[arg(long, required = true)]
    stat: Vec<String>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Append rows to this CSV file (header written when new).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    suite: String,
    /// `default`, `empty` or a grid JSON file.
    #[arg(long, default_value = "default")]
    grid: String,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Calibration file overriding the bundled windows.
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format; csv unless set.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct IdentityArgs {
    /// Random vectors for the exact check.
    #[arg(long, default_value_t = 100)]
    vectors: usize,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 20261018)]
    seed: u64,
    #[arg(long, default_value = "crates/core/calibration.json")]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Run(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Domain(_) | Error::Model(_) | Error::Capability(_) => CliError::Usage(e.to_string()),
            _ => CliError::Run(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(EXIT_USAGE);
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().expect("global pool set once");
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CHECK_FAILED)
        }
    }
}

/// Returns whether every pass-class check held.
fn run(cmd: Command) -> CliResult<bool> {
    match cmd {
        Command::Threshold(a) => cmd_threshold(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Identity(a) => cmd_identity(a),
        Command::Lemmas(a) => {
            let reports = lemma_grid(&marginals::catalog())?;
            emit_reports(&reports, a.out.as_deref(), a.format.unwrap_or(Format::Csv))
        }
        Command::Calibrate(a) => cmd_calibrate(a),
    }
}

fn read_model(path: &Path) -> CliResult<(ModelConfig, String)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let cfg = ModelConfig::from_json(&text)?;
    let canonical = serde_json::to_string(&cfg).expect("model config serializes");
    let hash = Sha256::digest(canonical.as_bytes());
    let hex: String = hash[..8].iter().map(|b| format!("{b:02x}")).collect();
    Ok((cfg, hex))
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn to_json<T: Serialize + ?Sized>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s.into_bytes()
}

#[derive(Serialize)]
struct ThresholdOut {
    kind: ThresholdKind,
    level: f64,
    #[serde(flatten)]
    result: ThresholdResult,
}

fn cmd_threshold(a: ThresholdArgs) -> CliResult<bool> {
    let (cfg, _) = read_model(&a.model)?;
    let model = cfg.build()?;
    let marginals = model.marginals()?;
    let kind = match a.kind {
        Kind::T => ThresholdKind::T,
        Kind::Tstar => ThresholdKind::TStar,
    };
    let mut rows = Vec::new();
    for &level in &a.level {
        let result = threshold(&ThresholdQuery { marginals: marginals.clone(), level, kind })?;
        rows.push(ThresholdOut { kind, level, result });
    }
    let bytes = if rows.len() == 1 { to_json(&rows[0]) } else { to_json(&rows) };
    write_out(a.out.as_deref(), &bytes)?;
    Ok(true)
}

#[derive(Serialize)]
struct EstimateOut<'a> {
    model: String,
    model_hash: &'a str,
    stream: u64,
    #[serde(flatten)]
    estimate: &'a Estimate,
}

const ESTIMATE_HEADER: [&str; 10] =
    ["stat", "model", "model_hash", "mean", "stderr", "ci_lo", "ci_hi", "count", "seed", "stream"];

fn estimate_record(e: &Estimate, label: &str, hash: &str, stream: u64) -> [String; 10] {
    [
        e.stat_id.clone(),
        label.to_string(),
        hash.to_string(),
        e.mean.to_string(),
        e.stderr.to_string(),
        e.ci95.0.to_string(),
        e.ci95.1.to_string(),
        e.count.to_string(),
        e.seed.to_string(),
        stream.to_string(),
    ]
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Run(e.to_string())
}

fn cmd_estimate(a: EstimateArgs) -> CliResult<bool> {
    let (cfg, hash) = read_model(&a.model)?;
    let model = cfg.build()?;
    let stats = a.stat.iter().map(|s| s.parse::<Statistic>()).collect::<Result<Vec<_>, _>>()?;
    let run = RunConfig::new(a.samples, a.seed).stream(a.stream);
    let est = estimate_many(&model, &stats, &run)?;
    let label = model.label();

    if let Some(path) = &a.csv {
        let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let file = fs::OpenOptions::new().create(true).append(true).open(path)?;
        let mut w = csv::Writer::from_writer(file);
        if fresh {
            w.write_record(ESTIMATE_HEADER).map_err(csv_err)?;
        }
        for e in &est {
            w.write_record(estimate_record(e, &label, &hash, a.stream)).map_err(csv_err)?;
        }
        w.flush()?;
    }

    let bytes = match a.out.format.unwrap_or_default() {
        Format::Json => {
            let rows: Vec<_> = est
                .iter()
                .map(|e| EstimateOut { model: label.clone(), model_hash: &hash, stream: a.stream, estimate: e })
                .collect();
            if rows.len() == 1 { to_json(&rows[0]) } else { to_json(&rows) }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(ESTIMATE_HEADER).map_err(csv_err)?;
            for e in &est {
                w.write_record(estimate_record(e, &label, &hash, a.stream)).map_err(csv_err)?;
            }
            w.into_inner().map_err(|e| CliError::Run(e.to_string()))?
        }
    };
    write_out(a.out.out.as_deref(), &bytes)?;
    Ok(true)
}

fn emit_reports(reports: &[BoundReport], out: Option<&Path>, format: Format) -> CliResult<bool> {
    let bytes = match format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_csv(&mut buf, reports)?;
            buf
        }
        Format::Json => to_json(reports),
    };
    write_out(out, &bytes)?;
    let counts: Vec<String> = tally(reports).iter().map(|(v, c)| format!("{} {c}", v.as_str())).collect();
    eprintln!("{} reports: {}", reports.len(), counts.join(", "));
    let failed: Vec<&BoundReport> = reports.iter().filter(|r| r.failed()).collect();
    for r in &failed {
        eprintln!("FAIL {} {} n={} k={:?} lhs={} rhs={}", r.theorem_id, r.model, r.n, r.k, r.lhs, r.rhs);
    }
    Ok(failed.is_empty())
}

fn load_grid(spec: &str) -> CliResult<GridConfig> {
    match spec {
        "default" => Ok(GridConfig::default_grid()),
        "empty" => Ok(GridConfig::default()),
        path => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{path}: {e}")))?;
            Ok(GridConfig::from_json(&text)?)
        }
    }
}

fn cmd_verify(a: VerifyArgs) -> CliResult<bool> {
    let suite: Suite = a.suite.parse()?;
    let grid = load_grid(&a.grid)?;
    let mut cfg = SuiteConfig::new(suite, grid, a.samples, a.seed);
    if let Some(path) = &a.calibration {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        cfg.calibration = Calibration::from_json(&text)?;
    }
    let reports = run_suite(&cfg)?;
    emit_reports(&reports, a.out.as_deref(), a.format.unwrap_or(Format::Csv))
}

fn cmd_identity(a: IdentityArgs) -> CliResult<bool> {
    let mut reports = vec![step_identity_check(a.vectors, a.seed)?];
    reports.extend(byparts_suite(a.samples, a.seed)?);
    emit_reports(&reports, a.out.out.as_deref(), a.out.format.unwrap_or(Format::Csv))
}

fn cmd_calibrate(a: CalibrateArgs) -> CliResult<bool> {
    let mut cfg = SuiteConfig::new(Suite::All, GridConfig::default_grid(), a.samples, a.seed);
    cfg.calibration = Calibration::empty();
    let reports = run_suite(&cfg)?;
    let cal = Calibration::from_sweep(&reports, a.seed, a.samples);
    fs::write(&a.out, cal.to_json())?;
    for (id, w) in &cal.windows {
        eprintln!("{id}: [{}, {}]", w.floor, w.cap);
    }
    Ok(true)
}
