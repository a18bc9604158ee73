mod config;
mod ops;
mod output;

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fluctlab::{Error, Result};

use config::{parse_boundary, parse_majorant, parse_sequence, parse_window, ExperimentConfig, KernelSpec};
use output::{append_record, inputs_hash, to_json_pretty, unix_ms, Output, ResultRecord};

#[derive(Parser)]
#[command(name = "fluctlab", version, about = "Fluctuation theory of random walks killed at a boundary")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact killed dynamic programme: survival, pmf, rational, local
    Exact(OpArgs),
    /// Closed-form oracles: reflection, hitting, tail
    Oracle(OpArgs),
    /// Power-series identities: wh, spitzer, factorisation, rho, renewal
    Series(OpArgs),
    /// Harmonic and superharmonic functions: w, v, vh, inequalities
    Harmonic(OpArgs),
    /// Monte Carlo for independent non-identical steps: tg, conditioned, lindeberg, divergence, tail
    Simulate(OpArgs),
    /// Markov chains with position-dependent kernels: validate, w, v, survival, doob
    Chain(OpArgs),
    /// Data for figures: tail-ratio, cdf-overlay, lindeberg
    Plotdata(OpArgs),
    /// Run the acceptance criteria
    Verify(VerifyArgs),
    /// Run an experiment described by a TOML file
    Run(RunArgs),
}

#[derive(Clone, Copy, Default, PartialEq, ValueEnum)]
enum Format {
    #[default]
    Auto,
    Csv,
    Json,
}

#[derive(Args, Default)]
struct OutputArgs {
    /// stdout format: auto prints the main table as CSV when there is one
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    /// also write the main table to this CSV file
    #[arg(long)]
    csv: Option<PathBuf>,
    /// also write the JSON record to this file
    #[arg(long)]
    json: Option<PathBuf>,
    /// append the JSON record to this JSON-lines store
    #[arg(long)]
    store: Option<PathBuf>,
    /// save the experiment as TOML, replayable with `fluctlab run --config`
    #[arg(long)]
    save_config: Option<PathBuf>,
}

#[derive(Args)]
struct OpArgs {
    op: String,
    /// step law: built-in (ssrw, uniform3, leftskew, sym2, drift) or atoms "-1:1/2,1:1/2"
    #[arg(long)]
    law: Option<String>,
    /// chain kernel: region-switched, region-switched-var2, or a built-in law name (i.i.d. steps)
    #[arg(long)]
    kernel: Option<String>,
    /// step sequence: iid, counterexample, spiked:AT,SCALE
    #[arg(long = "seq")]
    seq: Option<String>,
    /// const:V, power:SCALE,EXP,OFFSET or table:g1,g2,...
    #[arg(long)]
    boundary: Option<String>,
    /// bounded:M, log-pareto:Y0, inverse-square
    #[arg(long)]
    majorant: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    x: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    y: Option<i64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<u64>>,
    #[arg(long)]
    trials: Option<u64>,
    /// truncation order of power series
    #[arg(long, visible_alias = "N")]
    order: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    u: Option<Vec<f64>>,
    #[arg(long)]
    x_max: Option<i64>,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// full or clip
    #[arg(long)]
    window: Option<String>,
    /// horizon for harmonic-function estimates
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// write the raw trial batch here (simulate tg)
    #[arg(long)]
    batch: Option<PathBuf>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// criterion ids, or "all"
    #[arg(default_value = "all")]
    which: Vec<String>,
    #[arg(long, default_value = "quick")]
    level: String,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    out: OutputArgs,
}

impl OpArgs {
    fn into_config(self, group: &str) -> Result<(ExperimentConfig, OutputArgs)> {
        let mut c = ExperimentConfig::new(&format!("{group}.{}", self.op));
        c.seed = self.seed;
        c.law = self.law.map(|s| s.parse()).transpose()?;
        c.kernel = self.kernel.map(KernelSpec::Named);
        c.sequence = self.seq.as_deref().map(parse_sequence).transpose()?;
        c.boundary = self.boundary.as_deref().map(parse_boundary).transpose()?;
        c.majorant = self.majorant.as_deref().map(parse_majorant).transpose()?;
        let p = &mut c.params;
        p.x = self.x;
        p.y = self.y;
        p.n = self.n;
        p.ns = self.ns;
        p.trials = self.trials;
        p.order = self.order;
        p.u = self.u;
        p.x_max = self.x_max;
        p.eps = self.eps;
        p.window = self.window.as_deref().map(parse_window).transpose()?;
        p.horizon = self.horizon;
        c.output.batch = self.batch;
        Ok((c, self.out))
    }
}

fn parse_ids(which: &[String]) -> Result<Vec<u8>> {
    if which.iter().any(|w| w == "all") {
        return Ok(Vec::new());
    }
    which
        .iter()
        .flat_map(|w| w.split(','))
        .map(|t| t.trim().parse::<u8>().map_err(|_| Error::InvalidArgument(format!("bad criterion id '{t}'"))))
        .collect()
}

fn build(cmd: Command) -> Result<(ExperimentConfig, OutputArgs)> {
    let (group, args) = match cmd {
        Command::Exact(a) => ("exact", a),
        Command::Oracle(a) => ("oracle", a),
        Command::Series(a) => ("series", a),
        Command::Harmonic(a) => ("harmonic", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Chain(a) => ("chain", a),
        Command::Plotdata(a) => ("plotdata", a),
        Command::Verify(v) => {
            let mut c = ExperimentConfig::new("verify");
            c.seed = v.seed;
            c.params.level = Some(v.level);
            let ids = parse_ids(&v.which)?;
            c.params.criteria = (!ids.is_empty()).then_some(ids);
            return Ok((c, v.out));
        }
        Command::Run(r) => return Ok((ExperimentConfig::load(&r.config)?, r.out)),
    };
    if !ops::OPERATIONS.contains(&format!("{group}.{}", args.op).as_str()) {
        let known: Vec<&str> = ops::OPERATIONS.iter().filter_map(|o| o.strip_prefix(group)?.strip_prefix('.')).collect();
        return Err(Error::InvalidArgument(format!("unknown {group} operation '{}' (one of: {})", args.op, known.join(", "))));
    }
    args.into_config(group)
}

fn io_err(e: io::Error) -> Error {
    Error::InvalidArgument(format!("i/o: {e}"))
}

fn emit(cfg: &ExperimentConfig, out: &OutputArgs, started: u128, result: Output) -> Result<()> {
    let csv_path = out.csv.as_ref().or(cfg.output.csv.as_ref());
    let json_path = out.json.as_ref().or(cfg.output.json.as_ref());
    let store = out.store.as_ref().or(cfg.output.store.as_ref());

    if let (Some(path), Some(t)) = (csv_path, result.main()) {
        t.write_csv(io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?)).map_err(io_err)?;
    }
    let record = ResultRecord {
        experiment: cfg.operation.clone(),
        started_unix_ms: started,
        finished_unix_ms: unix_ms(),
        inputs_hash: inputs_hash(cfg),
        config: cfg.clone(),
        outputs: result,
    };
    if let Some(path) = json_path {
        std::fs::write(path, to_json_pretty(&record)).map_err(io_err)?;
    }
    if let Some(path) = store {
        append_record(path, &record).map_err(io_err)?;
    }

    let stdout = io::stdout();
    let mut w = stdout.lock();
    let res = match (out.format, &record.outputs.report, record.outputs.main()) {
        // the verification report is deterministic, unlike the timestamped record
        (Format::Auto | Format::Json, Some(report), _) => w.write_all(to_json_pretty(report).as_bytes()),
        (Format::Auto | Format::Csv, None, Some(t)) => t.write_csv(&mut w),
        (Format::Csv, _, _) => record.outputs.tables.get("summary").map_or(Ok(()), |t| t.write_csv(&mut w)),
        _ => w.write_all(to_json_pretty(&record).as_bytes()),
    };
    // a closed pipe (e.g. `| head`) is not an error worth reporting
    match res {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(io_err(e)),
        _ => Ok(()),
    }
}

fn run(cmd: Command) -> Result<ExitCode> {
    let started = unix_ms();
    let (cfg, out) = build(cmd)?;
    if let Some(path) = &out.save_config {
        std::fs::write(path, cfg.to_toml()?).map_err(io_err)?;
    }
    let result = ops::run(&cfg)?;
    for note in &result.notes {
        eprintln!("note: {note}");
    }
    let failed = cfg.operation == "verify" && result.passed == Some(false);
    emit(&cfg, &out, started, result)?;
    // a failed verification is a certificate failure
    Ok(if failed { ExitCode::from(3) } else { ExitCode::SUCCESS })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(t) = std::env::var("FLUCTLAB_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
