use std::fs::File;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rulematrix::experiments::{self, induce_prepared, prepare, DEFAULT_TEST_FRACTION};
use rulematrix::io::{self, LoadOptions, MissingPolicy};
use rulematrix::service::{self, parse_instance, ProbeResponse, ServiceConfig, SessionSnapshot};
use rulematrix::teacher::TeacherSpec;
use rulematrix::{Error, Result};
use rulematrix_core::induce::{sampling_rate_sweep, ExplanationBundle, InduceConfig};
use rulematrix_core::metrics::probe;
use serde_json::Value;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "rulematrix", version, about = "Explain classifiers with surrogate rule lists", arg_required_else_help = true)]
struct Cli {
    /// Directory holding `<name>.csv` + `<name>.schema.json` pairs.
    #[arg(long, env = "RULEMATRIX_DATA_DIR", default_value = "data", global = true)]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Induce a rule list for a teacher and write the explanation bundle.
    Induce(InduceArgs),
    /// Fidelity and list length across sampling rates, as CSV.
    Sweep(SweepArgs),
    /// Mean test fidelity and list length over seeds, one row per dataset.
    Evaluate(EvaluateArgs),
    /// Compare teacher and rule list on one instance.
    Probe(ProbeArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Print a bundle (or the bundle of a saved session) as JSON or text.
    Export(ExportArgs),
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long, default_value_t = DEFAULT_TEST_FRACTION)]
    test_fraction: f64,
    #[arg(long, value_enum, default_value_t = MissingPolicy::Reject)]
    missing: MissingPolicy,
    /// Seconds to wait for an external oracle reply.
    #[arg(long, default_value_t = 60)]
    oracle_timeout: u64,
}

#[derive(Args)]
struct LearnerArgs {
    #[arg(long, default_value_t = 50_000)]
    iterations: usize,
    #[arg(long, default_value_t = 3)]
    chains: usize,
    /// Prior expected number of rules.
    #[arg(long, default_value_t = 20.0)]
    lambda: f64,
    /// Prior expected clauses per rule.
    #[arg(long, default_value_t = 2.0)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long)]
    max_length: Option<usize>,
    #[arg(long, default_value_t = 0.02)]
    min_support: f64,
    #[arg(long, default_value_t = 3)]
    max_cardinality: usize,
    #[arg(long, default_value_t = 5000)]
    max_candidates: usize,
}

impl LearnerArgs {
    fn config(&self, sampling_rate: f64, seed: u64) -> InduceConfig {
        let mut c = InduceConfig { sampling_rate, seed, ..InduceConfig::default() };
        c.mcmc.iterations = self.iterations;
        c.mcmc.chains = self.chains;
        c.priors.lambda = self.lambda;
        c.priors.eta = self.eta;
        c.priors.alpha = self.alpha;
        c.priors.max_length = self.max_length;
        c.miner.min_support = self.min_support;
        c.miner.max_cardinality = self.max_cardinality;
        c.miner.max_candidates = self.max_candidates;
        c
    }
}

#[derive(Args)]
struct InduceArgs {
    #[arg(long)]
    data: String,
    #[arg(long, default_value = "mlp:20,20")]
    teacher: String,
    #[arg(long, default_value_t = 4.0)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    learner: LearnerArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value = "pima")]
    data: String,
    #[arg(long, default_value = "mlp:20,20")]
    teacher: String,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2,4,8")]
    rates: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Seed of the first repeat; repeat r uses seed + r.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    learner: LearnerArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, value_delimiter = ',', default_value = "breast_cancer,iris,pima")]
    data: Vec<String>,
    #[arg(long, default_value = "mlp:50")]
    teacher: String,
    #[arg(long, default_value_t = 4.0)]
    rate: f64,
    /// Number of runs; run s uses seed s for the split, the teacher and induction.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = DEFAULT_TEST_FRACTION)]
    test_fraction: f64,
    #[arg(long, default_value_t = 60)]
    oracle_timeout: u64,
    /// Print JSON rows instead of text.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    learner: LearnerArgs,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Comma-separated feature values; category labels are accepted.
    #[arg(long, allow_hyphen_values = true)]
    instance: String,
    #[arg(long, default_value_t = 60)]
    oracle_timeout: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Session snapshot directory [default: <data-dir>/sessions].
    #[arg(long)]
    state_dir: Option<PathBuf>,
    /// Keep sessions in memory only.
    #[arg(long, conflicts_with = "state_dir")]
    no_persist: bool,
    /// Static files served at `/`.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 60)]
    oracle_timeout: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Json,
    Text,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, required_unless_present = "session", conflicts_with = "session")]
    bundle: Option<PathBuf>,
    /// A session snapshot written by `serve`.
    #[arg(long)]
    session: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ExportFormat::Json)]
    format: ExportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{}", e.render());
                    ExitCode::from(1)
                }
            };
        }
    };
    let default_level = if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default_level)))
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let dir = cli.data_dir.as_path();
    match cli.command {
        Command::Induce(a) => induce_cmd(dir, a),
        Command::Sweep(a) => sweep_cmd(dir, a),
        Command::Evaluate(a) => evaluate_cmd(dir, a),
        Command::Probe(a) => probe_cmd(dir, a),
        Command::Serve(a) => serve_cmd(dir, a),
        Command::Export(a) => export_cmd(a),
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(Error::BadConfig(format!("sampling rate must be positive, got {rate}")))
    }
}

fn induce_cmd(dir: &Path, a: InduceArgs) -> Result<()> {
    check_rate(a.rate)?;
    let spec: TeacherSpec = a.teacher.parse()?;
    let table = io::load_dataset(dir, &a.data, LoadOptions { missing: a.split.missing })?;
    let timeout = Duration::from_secs(a.split.oracle_timeout);
    let prepared = prepare(&table, &spec, a.split.split_seed, a.split.test_fraction, timeout)?;
    let config = a.learner.config(a.rate, a.seed);
    let bundle = induce_prepared(&prepared, &a.data, &spec, a.split.split_seed, a.split.test_fraction, &config)?;
    for w in &bundle.warnings {
        tracing::warn!(?w, "induction warning");
    }
    io::write_json(&a.out, &bundle)?;
    eprintln!(
        "{} rules, fidelity train {:.3} test {}, written to {}",
        bundle.rule_list.len(),
        bundle.overall.fidelity_train,
        bundle.overall.fidelity_test.map_or("-".into(), |f| format!("{f:.3}")),
        a.out.display()
    );
    Ok(())
}

fn sweep_cmd(dir: &Path, a: SweepArgs) -> Result<()> {
    for &r in &a.rates {
        check_rate(r)?;
    }
    let spec: TeacherSpec = a.teacher.parse()?;
    let table = io::load_dataset(dir, &a.data, LoadOptions { missing: a.split.missing })?;
    let prepared = prepare(&table, &spec, a.split.split_seed, a.split.test_fraction, Duration::from_secs(a.split.oracle_timeout))?;
    let base = a.learner.config(1.0, a.seed);
    let rows = sampling_rate_sweep(&prepared.train, Some(&prepared.test), &*prepared.teacher, &a.rates, a.repeats, &base)?;
    let sink: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(File::create(path).map_err(|e| Error::io(path, e))?),
        None => Box::new(std::io::stdout()),
    };
    let mut writer = csv::Writer::from_writer(sink);
    for row in &rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(|e| Error::io("<sweep csv>", e))?;
    Ok(())
}

fn evaluate_cmd(dir: &Path, a: EvaluateArgs) -> Result<()> {
    check_rate(a.rate)?;
    let spec: TeacherSpec = a.teacher.parse()?;
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let base = a.learner.config(a.rate, 0);
    for name in &a.data {
        let table = io::load_dataset(dir, name, LoadOptions::default())?;
        let row = experiments::evaluate(&table, name, &spec, &seeds, a.test_fraction, &base, Duration::from_secs(a.oracle_timeout))?;
        if a.json {
            println!("{}", serde_json::to_string(&row)?);
        } else {
            println!("{}", row.table_line());
        }
    }
    Ok(())
}

fn parse_cells(text: &str) -> Vec<Value> {
    text.split(',')
        .map(str::trim)
        .map(|cell| match cell.parse::<f64>() {
            Ok(v) => serde_json::json!(v),
            Err(_) => Value::from(cell),
        })
        .collect()
}

fn probe_cmd(dir: &Path, a: ProbeArgs) -> Result<()> {
    let bundle: ExplanationBundle = io::read_json(&a.bundle)?;
    let origin = bundle
        .dataset
        .as_ref()
        .ok_or_else(|| Error::BadConfig("bundle does not record its dataset; cannot rebuild the teacher".into()))?;
    let spec: TeacherSpec = bundle.teacher.description.parse()?;
    let table = io::load_dataset(dir, &origin.name, LoadOptions::default())?;
    let prepared = prepare(&table, &spec, origin.split_seed, origin.test_fraction, Duration::from_secs(a.oracle_timeout))?;
    let schema = &bundle.schema;
    let x = parse_instance(schema, &parse_cells(&a.instance))?;
    let result = probe(&bundle.rule_list, &*prepared.teacher, schema, &x)?;
    if a.json {
        println!("{}", serde_json::to_string(&ProbeResponse::new(&bundle.rule_list, schema, result))?);
        return Ok(());
    }
    let labels = &schema.label.categories;
    let rule = &bundle.rule_list.rules[result.fired_rule];
    println!("teacher:   {} (p = {:.3})", labels[result.teacher_class], result.teacher_proba[result.teacher_class]);
    println!("rule list: {}", labels[result.rule_class]);
    println!("fired rule {}: {} THEN {}", result.fired_rule, rule.describe(schema), labels[rule.class()]);
    Ok(())
}

fn serve_cmd(dir: &Path, a: ServeArgs) -> Result<()> {
    let mut config = ServiceConfig::new(dir);
    if a.no_persist {
        config.state_dir = None;
    } else if let Some(state) = a.state_dir {
        config.state_dir = Some(state);
    }
    config.ui_dir = a.ui_dir;
    config.oracle_timeout = Duration::from_secs(a.oracle_timeout);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("<runtime>", e))?;
    runtime.block_on(service::serve(config, a.addr))
}

fn export_cmd(a: ExportArgs) -> Result<()> {
    let bundle = match (&a.bundle, &a.session) {
        (Some(path), _) => io::read_json::<ExplanationBundle>(path)?,
        (None, Some(path)) => {
            let snap: SessionSnapshot = io::read_json(path)?;
            snap.bundle.ok_or_else(|| Error::BadConfig(format!("session {} has no bundle yet", snap.id)))?
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    let text = match a.format {
        ExportFormat::Json => serde_json::to_string_pretty(&bundle)? + "\n",
        ExportFormat::Text => render_text(&bundle),
    };
    match &a.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn render_text(bundle: &ExplanationBundle) -> String {
    let schema = &bundle.schema;
    let labels = &schema.label.categories;
    let mut out = String::new();
    for (i, (rule, m)) in bundle.rule_list.rules.iter().zip(&bundle.per_rule).enumerate() {
        let lead = if i == 0 || rule.is_default() { "" } else { "ELSE " };
        out += &format!(
            "{lead}{} THEN {} ({:.2})  support {}  fidelity {:.3}\n",
            rule.describe(schema),
            labels[rule.class()],
            rule.confidence(),
            m.support_count,
            m.rule_fidelity
        );
    }
    out += &format!("overall fidelity: train {:.4}", bundle.overall.fidelity_train);
    if let Some(f) = bundle.overall.fidelity_test {
        out += &format!(", test {f:.4}");
    }
    out.push('\n');
    out
}
