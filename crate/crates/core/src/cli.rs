//! Command-line entry point: `run`, `sweep`, `verify` and `schedule-dump`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 verification failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::config::{preset, RunConfig};
use crate::error::{Error, Result};
use crate::error_bounds::error_report;
use crate::lindblad::run_schedule_with;
use crate::observables::SimulationResult;
use crate::verify::{run_checks, Builders};
use crate::StateVector;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

/// Environment variable read for the sweep worker count.
pub const WORKERS_ENV: &str = "DAQS_WORKERS";

pub const RUN_COLUMNS: [&str; 8] = [
    "t_sim",
    "g_t",
    "fidelity",
    "n_photon_trotter",
    "n_photon_ideal",
    "survival",
    "leakage",
    "trace_error",
];

pub const SWEEP_COLUMNS: [&str; 9] = [
    "axis",
    "value",
    "final_fidelity",
    "measured_error",
    "metric",
    "bound",
    "leading_term_norm",
    "infidelity",
    "operator_distance",
];

const CONFIG_PREFIX: &str = "# config: ";

#[derive(Parser, Debug)]
#[command(
    name = "daqs",
    version,
    about = "Digital-analog simulation of Dicke models under Lindblad noise"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Source {
    /// TOML (or .json) configuration; overlays the preset when both are given.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named preset: dicke-dsc-fidelity, dicke-usc-photons, pulsed-dsc-fidelity.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate one configuration and write the time series as CSV.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Omit the timestamp so that identical inputs give identical bytes.
        #[arg(long)]
        reproducible: bool,
    },
    /// Repeat a run over the values of one parameter.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        reproducible: bool,
        /// Worker threads (defaults to DAQS_WORKERS, then the number of cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the invariant suite.
    Verify {
        /// Restrict to one module (hilbert, hamiltonians, trotter, lindblad, error_bounds, observables).
        #[arg(long)]
        filter: Option<String>,
    },
    /// Print the gate schedule of a configuration.
    ScheduleDump {
        #[command(flatten)]
        source: Source,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    #[value(name = "n_trotter")]
    NTrotter,
    #[value(name = "N")]
    NQubits,
    #[value(name = "coupling")]
    Coupling,
}

impl SweepAxis {
    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::NTrotter => "n_trotter",
            SweepAxis::NQubits => "n_qubits",
            SweepAxis::Coupling => "coupling",
        }
    }
}

pub fn load_source(source: &Source) -> Result<RunConfig> {
    match (&source.preset, &source.config) {
        (Some(p), Some(c)) => preset(p)?.overlay_file(c),
        (Some(p), None) => preset(p),
        (None, Some(c)) => RunConfig::load(c),
        (None, None) => Err(Error::Config("give --config or --preset".into())),
    }
}

/// Simulate a configuration from the qubit ground state and the vacuum.
pub fn simulate(cfg: &RunConfig) -> Result<SimulationResult> {
    let r = cfg.resolve()?;
    let schedule = r.schedule()?;
    run_schedule_with(
        &schedule,
        &StateVector::ground(r.space),
        &r.noise,
        &r.integrator,
        &r.options,
    )
}

fn timestamp() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("# generated_unix: {secs}\n")
}

fn header(kind: &str, cfg: &RunConfig, reproducible: bool) -> String {
    let mut s = format!("# daqs {} {kind}\n", env!("CARGO_PKG_VERSION"));
    if !reproducible {
        s.push_str(&timestamp());
    }
    for line in cfg.to_toml().lines().filter(|l| !l.trim().is_empty()) {
        s.push_str(CONFIG_PREFIX);
        s.push_str(line);
        s.push('\n');
    }
    s
}

fn csv_body(columns: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// CSV text of a run: commented header with the full configuration, then
/// one row per recorded time.
pub fn render_run(
    cfg: &RunConfig,
    result: &SimulationResult,
    reproducible: bool,
) -> Result<String> {
    let rows = (0..result.len()).map(|k| {
        let tp = result.time_grid[k];
        [
            tp.t_sim,
            tp.g_t,
            result.fidelity[k],
            result.photon_number_trotter[k],
            result.photon_number_ideal[k],
            result.survival[k],
            result.leakage[k],
            result.trace_error[k],
        ]
        .iter()
        .map(|x| x.to_string())
        .collect()
    });
    Ok(header("run", cfg, reproducible) + &csv_body(&RUN_COLUMNS, rows)?)
}

/// Recover the configuration embedded in a CSV written by this tool.
pub fn embedded_config(csv_text: &str) -> Result<RunConfig> {
    let toml: String = csv_text
        .lines()
        .filter_map(|l| l.strip_prefix(CONFIG_PREFIX))
        .fold(String::new(), |acc, l| acc + l + "\n");
    if toml.is_empty() {
        return Err(Error::Config("no embedded configuration found".into()));
    }
    RunConfig::from_toml_str(&toml)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub final_fidelity: f64,
    pub measured_error: f64,
    pub metric: String,
    pub bound: f64,
    pub leading_term_norm: f64,
    pub infidelity: f64,
    pub operator_distance: f64,
}

fn sweep_point(base: &RunConfig, axis: SweepAxis, value: &str) -> Result<SweepRow> {
    let cfg = base.with_key(axis.key(), value)?;
    let r = cfg.resolve()?;
    let schedule = r.schedule()?;
    let psi0 = StateVector::ground(r.space);
    let sim = run_schedule_with(&schedule, &psi0, &r.noise, &r.integrator, &r.options)?;
    let rep = error_report(&schedule, &psi0)?;
    Ok(SweepRow {
        value: value.to_string(),
        final_fidelity: sim.final_fidelity(),
        measured_error: rep.measured_error,
        metric: rep.metric,
        bound: rep.cauchy_schwarz_bound,
        leading_term_norm: rep.leading_term_norm,
        infidelity: rep.infidelity,
        operator_distance: rep.operator_distance,
    })
}

pub fn worker_count(explicit: Option<usize>) -> Result<usize> {
    if let Some(k) = explicit {
        return if k == 0 {
            Err(Error::Config("--workers must be at least 1".into()))
        } else {
            Ok(k)
        };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(k),
            _ => Err(Error::Config(format!(
                "{WORKERS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)),
    }
}

/// Run every sweep point on a pool of `workers` threads. Rows come back in
/// the order of `values` regardless of scheduling.
pub fn sweep(
    base: &RunConfig,
    axis: SweepAxis,
    values: &[String],
    workers: usize,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    // validate every point before spending time on any of them
    for v in values {
        base.with_key(axis.key(), v)?.resolve()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        values
            .par_iter()
            .map(|v| sweep_point(base, axis, v))
            .collect()
    })
}

pub fn render_sweep(
    base: &RunConfig,
    axis: SweepAxis,
    rows: &[SweepRow],
    reproducible: bool,
) -> Result<String> {
    let body = rows.iter().map(|r| {
        vec![
            axis.key().to_string(),
            r.value.clone(),
            r.final_fidelity.to_string(),
            r.measured_error.to_string(),
            r.metric.clone(),
            r.bound.to_string(),
            r.leading_term_norm.to_string(),
            r.infidelity.to_string(),
            r.operator_distance.to_string(),
        ]
    });
    Ok(header("sweep", base, reproducible) + &csv_body(&SWEEP_COLUMNS, body)?)
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    if e.is_config_error() || matches!(e, Error::Io(_)) {
        EXIT_CONFIG
    } else {
        EXIT_NUMERIC
    }
}

fn output_path(flag: Option<PathBuf>, cfg: &RunConfig) -> Option<PathBuf> {
    flag.or_else(|| cfg.output.as_ref().map(PathBuf::from))
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Run {
            source,
            output,
            reproducible,
        } => {
            let cfg = load_source(&source)?;
            let result = simulate(&cfg)?;
            emit(
                &render_run(&cfg, &result, reproducible)?,
                output_path(output, &cfg).as_deref(),
            )?;
            Ok(EXIT_OK)
        }
        Command::Sweep {
            source,
            axis,
            values,
            output,
            reproducible,
            workers,
        } => {
            let cfg = load_source(&source)?;
            let rows = sweep(&cfg, axis, &values, worker_count(workers)?)?;
            emit(
                &render_sweep(&cfg, axis, &rows, reproducible)?,
                output_path(output, &cfg).as_deref(),
            )?;
            Ok(EXIT_OK)
        }
        Command::Verify { filter } => {
            let checks = run_checks(filter.as_deref(), &Builders::default())?;
            let failed = checks.iter().filter(|c| !c.passed()).count();
            for c in &checks {
                println!("{c}");
            }
            println!("{} checks, {failed} failed", checks.len());
            Ok(if failed == 0 { EXIT_OK } else { EXIT_VERIFY })
        }
        Command::ScheduleDump { source } => {
            let schedule = load_source(&source)?.resolve()?.schedule()?;
            emit(&schedule.dump(), None)?;
            Ok(EXIT_OK)
        }
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
