//! `satrep`: command-line driver for the satellite repeater simulator.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use satrep_core::config::{parse_config, ConfigError, OutputFormat, RunConfig};
use satrep_core::output::{self, Manifest};
use satrep_core::sweep::{run_orbit, run_single, run_sweep, OrbitSummary, PointResult, SweepOptions};
use satrep_core::RowStatus;

#[derive(Parser)]
#[command(name = "satrep", version, about = "Monte Carlo simulation of satellite quantum repeater chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check a config, then print its canonical form.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate the base point only.
    Run(RunArgs),
    /// Simulate every point of the sweep grid.
    Sweep(RunArgs),
    /// Simulate each sweep point over a grid of orbit phases and integrate per pass.
    Orbit(RunArgs),
    /// Recompute key rates from record dumps without simulating.
    Report {
        /// Record files with columns time,p1,p2,p3,p4.
        #[arg(required = true)]
        records: Vec<PathBuf>,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML or JSON config; defaults throughout when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Delivered pairs per point, overriding the config.
    #[arg(long)]
    samples_override: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
            Format::Both => OutputFormat::Both,
        }
    }
}

/// Failure categories, mapped onto exit codes.
#[derive(Debug)]
enum Failure {
    Config(String),
    Io(String),
    Simulation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
            Failure::Simulation(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Io(m) | Failure::Simulation(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn io_failure(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn load(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut config = match &args.config {
        Some(p) => parse_config(p)?.0,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(d) = &args.out {
        config.output.dir = d.clone();
    }
    if let Some(f) = args.format {
        config.output.format = f.into();
    }
    if args.samples_override == Some(0) {
        return Err(Failure::Config("--samples-override must be at least 1".into()));
    }
    Ok(config)
}

fn write_outputs(
    command: &str,
    config: &RunConfig,
    results: &[PointResult],
    orbit: Option<&[OrbitSummary]>,
    started: Instant,
) -> Result<Vec<PathBuf>, Failure> {
    let dir = &config.output.dir;
    let rows: Vec<_> = results.iter().map(|r| r.row.clone()).collect();
    let mut files = Vec::new();
    if config.output.format.csv() {
        let p = dir.join("results.csv");
        output::with_file(&p, |f| output::write_results_csv(f, &rows)).map_err(io_failure(&p))?;
        files.push(p);
    }
    if config.output.format.json() {
        let p = dir.join("results.json");
        output::with_file(&p, |f| output::write_results_json(f, &rows)).map_err(io_failure(&p))?;
        files.push(p);
    }
    if let Some(s) = orbit {
        let p = dir.join("orbit_summary.csv");
        output::with_file(&p, |f| output::write_orbit_csv(f, s)).map_err(io_failure(&p))?;
        files.push(p);
    }
    for r in results {
        if let Some(recs) = &r.records {
            let p = dir.join("records").join(format!("point_{:05}.csv", r.row.index));
            output::with_file(&p, |f| output::write_records_csv(f, recs)).map_err(io_failure(&p))?;
            files.push(p);
        }
    }
    let mut m = Manifest::new(command, config);
    m.rows = rows.len();
    m.failed_rows = rows.iter().filter(|r| r.status == RowStatus::Error).count();
    m.point_wall_time_s = results.iter().map(|r| r.wall_time_s).collect();
    m.files = files.clone();
    m.wall_time_s = started.elapsed().as_secs_f64();
    let p = dir.join("manifest.json");
    m.write(&p).map_err(io_failure(&p))?;
    files.push(p);
    Ok(files)
}

fn simulate(command: &str, args: &RunArgs) -> Result<(), Failure> {
    let started = Instant::now();
    let config = load(args)?;
    let opts = SweepOptions {
        workers: args.workers,
        samples_override: args.samples_override,
        keep_records: config.run.dump_records,
    };
    let (results, orbit) = match command {
        "run" => (vec![run_single(&config, &opts)], None),
        "sweep" => (run_sweep(&config, &opts), None),
        _ => {
            let (r, s) = run_orbit(&config, &opts);
            (r, Some(s))
        }
    };
    let files = write_outputs(command, &config, &results, orbit.as_deref(), started)?;
    for f in &files {
        log::info!("wrote {}", f.display());
    }
    let failed: Vec<_> = results.iter().filter(|r| r.row.status == RowStatus::Error).collect();
    for r in &failed {
        log::error!("point {}: {}", r.row.index, r.row.message);
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Simulation(format!("{} of {} points failed", failed.len(), results.len())))
    }
}

fn report(records: &[PathBuf], out: Option<&Path>) -> Result<(), Failure> {
    let mut rows = Vec::new();
    for path in records {
        let file = std::fs::File::open(path).map_err(io_failure(path))?;
        let recs = output::read_records_csv(file).map_err(io_failure(path))?;
        let row = output::report(&path.display().to_string(), &recs)
            .map_err(|e| Failure::Simulation(format!("{}: {e}", path.display())))?;
        rows.push(row);
    }
    match out {
        Some(p) => output::with_file(p, |f| output::write_report_csv(f, &rows)).map_err(io_failure(p)),
        None => output::write_report_csv(std::io::stdout().lock(), &rows).map_err(|e| Failure::Io(e.to_string())),
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { config } => {
            // unset-default warnings are logged by the parser
            let (c, _) = parse_config(&config)?;
            println!("{}", c.to_json());
            eprintln!("config ok, sha256 {}", c.hash());
            Ok(())
        }
        Command::Run(a) => simulate("run", &a),
        Command::Sweep(a) => simulate("sweep", &a),
        Command::Orbit(a) => simulate("orbit", &a),
        Command::Report { records, out } => report(&records, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
