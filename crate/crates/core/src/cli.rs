//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 no consistent model.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::io::{emit_report, identify_record, parse_csv, simulate_record, write_csv, RunConfig, SimulationSpec};
use crate::spectral::{amplitude_spectrum, default_grid_step, default_omega_max};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NO_MODEL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "apfid",
    version,
    about = "Identify linear ODE channel models from one noisy record"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Identify every configured channel and write a JSON report.
    Identify(IdentifyArgs),
    /// Write the amplitude spectrum of one column as `omega,amplitude` rows.
    Spectrum(SpectrumArgs),
    /// Simulate a rig described in JSON and write telemetry CSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct IdentifyArgs {
    /// Telemetry CSV (overrides `data` in the config).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Run configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Report destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Channels identified concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Frequency resolution override (rad/s).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    max_order: Option<usize>,
    #[arg(long)]
    fit_tolerance: Option<f64>,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[arg(long)]
    data: PathBuf,
    /// Column to analyze.
    #[arg(long)]
    column: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Upper scan limit (rad/s); just below the sampling limit by default.
    #[arg(long)]
    omega_max: Option<f64>,
    /// Grid step (rad/s); a quarter of the record resolution by default.
    #[arg(long)]
    grid_step: Option<f64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Simulation spec JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Identify(args) => run_identify(args),
        Command::Spectrum(args) => run_spectrum(args),
        Command::Simulate(args) => run_simulate(args),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("apfid: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::NoConsistentModel { .. } => EXIT_NO_MODEL,
        _ => EXIT_DATA,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| Error::Io {
            path: p.to_owned(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_identify(args: IdentifyArgs) -> Result<()> {
    let mut config = RunConfig::from_json(&read(&args.config)?)?;
    if let Some(d) = args.delta {
        config.identify.delta = Some(d);
    }
    if let Some(m) = args.max_order {
        config.identify.max_order = m;
    }
    if let Some(t) = args.fit_tolerance {
        config.identify.fit_tolerance = t;
    }
    if args.data.is_some() {
        config.data = args.data;
    }
    if args.out.is_some() {
        config.out = args.out;
    }
    config.identify.validate()?;
    let data = config
        .data
        .clone()
        .ok_or_else(|| crate::error::invalid("no telemetry file given (--data or config `data`)"))?;
    let record = parse_csv(&read(&data)?)?;
    let results = identify_record(&record, &config, args.jobs)?;
    for r in &results {
        log::info!("{} -> {}: order {} astatism {}", r.input, r.output, r.order, r.astatism);
    }
    write_or_print(config.out.as_deref(), &emit_report(&results, &config)?)
}

fn run_spectrum(args: SpectrumArgs) -> Result<()> {
    let record = parse_csv(&read(&args.data)?)?;
    let x = record.column(&args.column)?;
    let spectrum = amplitude_spectrum(
        x,
        args.omega_max.unwrap_or_else(|| default_omega_max(x)),
        args.grid_step.unwrap_or_else(|| default_grid_step(x)),
    )?;
    let mut text = String::from("omega,amplitude\n");
    for (w, a) in spectrum.omegas().iter().zip(spectrum.amplitudes()) {
        text.push_str(&format!("{w:.16e},{a:.16e}\n"));
    }
    write_or_print(args.out.as_deref(), &text)
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let spec = SimulationSpec::from_json(&read(&args.config)?)?;
    let record = simulate_record(&spec)?;
    write_or_print(args.out.as_deref(), &write_csv(&record))
}
