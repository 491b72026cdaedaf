use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use adaptest_core::data::{boston_raw_schema, load_csv, prepare_boston};
use adaptest_core::rng::derive_seed;
use adaptest_core::{
    estimate_basis, power_experiment, run_test, Dataset, Error, ExperimentSpec, ModelFamily, SdrConfig,
    Schema, TestConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Adaptive-to-model lack-of-fit tests for partially parametric single-index models.
#[derive(Debug, Parser)]
#[command(name = "adaptest", version, about)]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, env = "ADAPTEST_THREADS", global = true)]
    threads: Option<usize>,

    /// Increase log verbosity.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test a parametric mean function against general alternatives.
    Test(TestArgs),
    /// Estimate the structural dimension and basis directions.
    Dim(DimArgs),
    /// Run a size/power experiment described by a TOML file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Prepare {
    /// log(MEDV) on the standardized covariates except CRIM and CHAS, W = CRIM.
    Boston,
}

impl Prepare {
    fn name(self) -> &'static str {
        match self {
            Prepare::Boston => "boston",
        }
    }
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,

    /// Response column.
    #[arg(long)]
    y: Option<String>,

    /// Index covariate columns, comma-separated.
    #[arg(long, value_delimiter = ',')]
    x: Vec<String>,

    /// Nonparametric covariate columns, comma-separated.
    #[arg(long, value_delimiter = ',')]
    w: Vec<String>,

    /// Apply a built-in preparation instead of --y/--x/--w.
    #[arg(long, value_enum)]
    prepare: Option<Prepare>,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Null mean function: linear, linear+w, linear+sinw or linear+cosw, optionally with +const.
    #[arg(long, default_value = "linear")]
    family: String,

    /// Monte Carlo replicates.
    #[arg(long, default_value_t = 2000)]
    mc_reps: usize,

    /// Ridge constant for the dimension estimate; defaults to log(n)/n.
    #[arg(long)]
    cn: Option<f64>,

    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// RNG seed; generated and printed when omitted.
    #[arg(long)]
    seed: Option<u64>,

    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Args)]
struct DimArgs {
    #[command(flatten)]
    data: DataArgs,

    #[arg(long)]
    cn: Option<f64>,

    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Experiment specification (TOML).
    #[arg(long)]
    spec: PathBuf,

    /// Overrides the seed in the specification.
    #[arg(long)]
    seed: Option<u64>,

    /// Overrides the output path in the specification.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Also write `case,n,a,rejection_rate` rows for plotting.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(PathBuf, io::Error),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(..) => 3,
            CliError::Core(e) => match e {
                Error::Io { .. } => 3,
                Error::Csv(_)
                | Error::UnknownColumn(_)
                | Error::InvalidData(_)
                | Error::Dimension(_)
                | Error::ConstantResponse
                | Error::NonFinite(_) => 4,
                Error::SingularCovariance { .. }
                | Error::NoUsableCells
                | Error::EmptySlice(_)
                | Error::SingularScore(_)
                | Error::GradientMismatch { .. } => 5,
                Error::UnknownFamily(_) | Error::UnknownCase(_) | Error::Config(_) => 2,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Io(p, e) => write!(f, "cannot write {}: {e}", p.display()),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let nanos = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0);
        let seed = derive_seed(&[nanos, std::process::id() as u64]);
        eprintln!("seed = {seed}");
        seed
    })
}

fn load(args: &DataArgs) -> CliResult<Dataset> {
    let report = match args.prepare {
        Some(Prepare::Boston) => {
            if args.y.is_some() || !args.x.is_empty() || !args.w.is_empty() {
                return Err(CliError::Usage("--prepare boston sets the columns; drop --y/--x/--w".into()));
            }
            let raw = load_csv(&args.data, &boston_raw_schema())?;
            return Ok(prepare_boston(&raw.dataset)?);
        }
        None => {
            let y = args
                .y
                .clone()
                .ok_or_else(|| CliError::Usage("--y is required without --prepare".into()))?;
            if args.x.is_empty() {
                return Err(CliError::Usage("--x needs at least one column".into()));
            }
            let schema = Schema { y, x: args.x.clone(), w: args.w.clone() };
            load_csv(&args.data, &schema)?
        }
    };
    if report.dropped_rows > 0 {
        eprintln!("{} row(s) dropped", report.dropped_rows);
    }
    Ok(report.dataset)
}

fn emit(out: Option<&Path>, body: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, body).map_err(|e| CliError::Io(path.to_path_buf(), e)),
        None => io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Io(PathBuf::from("<stdout>"), e)),
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ")
}

fn cmd_test(args: TestArgs) -> CliResult<()> {
    if args.format == Format::Csv {
        return Err(CliError::Usage("test reports are text or json".into()));
    }
    let ds = load(&args.data)?;
    let family = ModelFamily::from_name(&args.family, ds.p1(), ds.p2())?;
    let cfg = TestConfig {
        mc_reps: args.mc_reps,
        ridge: args.cn,
        seed: resolve_seed(args.seed),
        alpha: args.alpha,
        init: None,
    };
    let report = run_test(&ds, &family, &cfg)?;
    let mut record = report.record();
    record.config.data = Some(args.data.data.display().to_string());
    record.config.prepare = args.data.prepare.map(|p| p.name().to_string());
    for w in &record.warnings {
        log::warn!("{w}");
    }
    let body = match args.format {
        Format::Json => record.to_json() + "\n",
        _ => record.to_text(),
    };
    emit(args.out.as_deref(), &body)?;
    if args.out.is_some() {
        let decision = if record.reject { "reject" } else { "do not reject" };
        println!("T_n = {}", record.t_n);
        println!("p_hat = {}", record.p_hat);
        println!("q_hat = {}", record.q_hat);
        println!("eigenvalues = {}", fmt_list(&record.eigenvalues));
        println!("decision = {decision} H0 at alpha = {}", record.config.alpha);
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct DimRecord {
    n: usize,
    p1: usize,
    p2: usize,
    q_hat: usize,
    ridge: f64,
    eigenvalues: Vec<f64>,
    ratios: Vec<f64>,
    b_columns: Vec<Vec<f64>>,
    y: String,
    x: Vec<String>,
    w: Vec<String>,
    data: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    prepare: Option<String>,
}

fn cmd_dim(args: DimArgs) -> CliResult<()> {
    if args.format == Format::Csv {
        return Err(CliError::Usage("dimension reports are text or json".into()));
    }
    let ds = load(&args.data)?;
    let basis = estimate_basis(&ds, &SdrConfig { ridge: args.cn })?;
    let names = ds.names();
    let rec = DimRecord {
        n: ds.n(),
        p1: ds.p1(),
        p2: ds.p2(),
        q_hat: basis.q_hat,
        ridge: basis.ridge,
        eigenvalues: basis.eigenvalues.iter().copied().collect(),
        ratios: basis.ratios.clone(),
        b_columns: basis.b.column_iter().map(|c| c.iter().copied().collect()).collect(),
        y: names.y.clone(),
        x: names.x.clone(),
        w: names.w.clone(),
        data: args.data.data.display().to_string(),
        prepare: args.data.prepare.map(|p| p.name().to_string()),
    };
    let body = match args.format {
        Format::Json => serde_json::to_string_pretty(&rec).expect("serializes") + "\n",
        _ => {
            let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
            let mut s = format!("q_hat = {}\nridge = {}\n", rec.q_hat, rec.ridge);
            s += &format!("eigenvalues = {}\nratios = {}\n", join(&rec.eigenvalues), join(&rec.ratios));
            for (k, c) in rec.b_columns.iter().enumerate() {
                s += &format!("b_column_{} = {}\n", k + 1, join(c));
            }
            s += &format!("n = {}\np1 = {}\np2 = {}\n", rec.n, rec.p1, rec.p2);
            s += &format!("y = {}\nx = {}\nw = {}\ndata = {}\n", rec.y, rec.x.join(","), rec.w.join(","), rec.data);
            if let Some(p) = &rec.prepare {
                s += &format!("prepare = {p}\n");
            }
            s
        }
    };
    emit(args.out.as_deref(), &body)
}

fn cmd_simulate(args: SimulateArgs) -> CliResult<()> {
    if args.format == Format::Json {
        return Err(CliError::Usage("simulation tables are csv or text".into()));
    }
    let spec = ExperimentSpec::load(&args.spec)?;
    let seed = resolve_seed(args.seed.or(spec.seed));
    let grid = spec.grid();
    log::info!("{} grid points, {} replicates in total", grid.len(), grid.iter().map(|g| g.reps).sum::<usize>());
    let table = power_experiment(&grid, spec.mc_reps, spec.alpha, seed)?;
    for (row, d) in table.rows.iter().zip(&table.diagnostics) {
        if d.failures > 0 || d.nonconverged > 0 {
            eprintln!(
                "{} n={} a={}: {} failed, {} not converged",
                row.case, row.n, row.a, d.failures, d.nonconverged
            );
        }
    }
    let body = match args.format {
        Format::Text => table.to_text(),
        _ => table.to_csv()?,
    };
    let out = args.out.or_else(|| spec.output.map(PathBuf::from));
    emit(out.as_deref(), &body)?;
    if out.is_some() {
        print!("{}", table.to_text());
    }
    if let Some(path) = args.curve {
        emit(Some(&path), &table.power_curve_csv()?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))?;
    }
    match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Dim(a) => cmd_dim(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
