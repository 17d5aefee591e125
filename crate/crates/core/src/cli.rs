//! The `ergodlab` command-line runner.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or config error,
//! 3 resource limit.

use std::ffi::OsString;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{ExperimentConfig, Format};
use crate::demos;
use crate::diagnostics::{
    birkhoff_report, box_discrepancy, checkpoint_sizes, default_starts, deviation_report, eigen_scan, format_real,
    star_discrepancy_1d, DiagnosticReport, Observable, ReportRow, DEFAULT_START_COUNT, MAX_BOX_DIM,
    MAX_DISCREPANCY_POINTS,
};
use crate::error::{Error, Result};
use crate::flows::{orbit, torus_orbit, FlowSpec, Point};
use crate::joinings::{minimality_curve, ProbeTarget, MAX_PROBE_DIM};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ergodlab", version, about = "Exact orbit kernels and ergodic diagnostics")]
pub struct Cli {
    /// Experiment config (JSON)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output file (default: stdout)
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for data-parallel sweeps
    #[arg(long, global = true, env = "ERGODLAB_THREADS", value_name = "K")]
    threads: Option<usize>,
    /// Sample length, overriding the config
    #[arg(long = "n", global = true, value_name = "N")]
    n: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the orbit `T^0 x, …, T^{N-1} x`
    Orbit,
    /// Compute a diagnostic statistic along orbits
    Diag {
        #[arg(value_enum)]
        statistic: DiagKind,
    },
    /// Run a named verification and print PASS/FAIL per identity
    Demo {
        #[arg(value_enum)]
        name: DemoName,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DiagKind {
    Birkhoff,
    Deviation,
    Discrepancy,
    Eigenscan,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DemoName {
    FurSeq,
    Coboundary,
    Conjugacy,
    Theta,
    JoiningAnzai,
    JoiningM,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ResourceLimit(_) => EXIT_RESOURCE,
        _ => EXIT_USAGE,
    }
}

/// Runs the CLI on the given arguments and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let started = Instant::now();
    let result = match cli.threads {
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Config(e.to_string()))
            .and_then(|pool| pool.install(|| dispatch(&cli))),
        None => dispatch(&cli),
    };
    match result {
        Ok(code) => {
            eprintln!("ergodlab: finished in {:.3} s", started.elapsed().as_secs_f64());
            code
        }
        Err(e) => {
            eprintln!("ergodlab: error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => match cli.command {
            Command::Demo { .. } => ExperimentConfig::default(),
            _ => return Err(Error::Config("--config is required".into())),
        },
    };
    let out = cli.out.clone().or_else(|| cfg.output.clone());
    let format = cli.format.or(cfg.format).unwrap_or_default();
    match cli.command {
        Command::Orbit => cmd_orbit(&cfg, cli.n, out.as_deref(), format),
        Command::Diag { statistic } => {
            let report = cmd_diag(&cfg, statistic, cli.n)?;
            emit_report(&report, out.as_deref(), format)?;
            Ok(EXIT_OK)
        }
        Command::Demo { name } => cmd_demo(&cfg, name, cli.n, out.as_deref(), format),
    }
}

fn open_output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            std::fs::File::create(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_report(report: &DiagnosticReport, out: Option<&Path>, format: Format) -> Result<()> {
    let mut w = open_output(out)?;
    match format {
        Format::Csv => report.write_csv(&mut w)?,
        Format::Json => report.write_json(&mut w)?,
    }
    w.flush()?;
    Ok(())
}

fn cmd_orbit(cfg: &ExperimentConfig, n_flag: Option<u64>, out: Option<&Path>, format: Format) -> Result<i32> {
    let spec = cfg.flow()?;
    let n = cfg.n_or(n_flag, 10)?;
    let start = cfg.start_for(spec);
    let points = orbit(spec, start, n)?;
    let mut w = open_output(out)?;
    match format {
        Format::Csv => {
            let mut header = vec!["n".to_string()];
            header.extend((0..spec.dim()).map(|j| format!("x{j}")));
            let mut csv = csv::Writer::from_writer(&mut w);
            let io = |e: csv::Error| Error::Io(e.to_string());
            csv.write_record(&header).map_err(io)?;
            for (k, p) in points.enumerate() {
                let mut row = vec![k.to_string()];
                row.extend(p.to_reals().into_iter().map(format_real));
                csv.write_record(&row).map_err(io)?;
            }
            csv.flush()?;
        }
        Format::Json => {
            writeln!(w, "{{\"flow_digest\":\"{}\",\"N\":{n},\"points\":[", spec.digest())?;
            for (k, p) in points.enumerate() {
                let sep = if k + 1 < n as usize { "," } else { "" };
                writeln!(w, "{{\"n\":{k},\"point\":{}}}{sep}", serde_json::to_string(&p)?)?;
            }
            writeln!(w, "]}}")?;
        }
    }
    w.flush()?;
    Ok(EXIT_OK)
}

fn checkpoints(cfg: &ExperimentConfig, n: u64) -> Result<Vec<u64>> {
    let fractions = cfg.checkpoints.clone().unwrap_or_else(|| vec![0.25, 0.5]);
    checkpoint_sizes(n, &fractions)
}

fn default_observable(spec: &FlowSpec) -> Observable {
    match spec {
        FlowSpec::Heisenberg(p) => Observable::Theta { tol: p.theta_tol },
        _ => Observable::coordinate(spec.dim(), 0),
    }
}

fn cmd_diag(cfg: &ExperimentConfig, kind: DiagKind, n_flag: Option<u64>) -> Result<DiagnosticReport> {
    let spec = cfg.flow()?;
    let n = cfg.n_or(n_flag, 10_000)?;
    let obs = cfg.observable.clone().unwrap_or_else(|| default_observable(spec));
    match kind {
        DiagKind::Birkhoff => birkhoff_report(spec, cfg.start_for(spec), &obs, &checkpoints(cfg, n)?),
        DiagKind::Deviation => {
            let starts: Vec<Point> = match &cfg.starts {
                Some(s) => s.iter().cloned().map(Point::Torus).collect(),
                None if matches!(spec, FlowSpec::Heisenberg(_)) => {
                    return Err(Error::Config("nilmanifold deviation needs explicit `starts`".into()))
                }
                None => default_starts(spec.dim(), DEFAULT_START_COUNT).into_iter().map(Point::Torus).collect(),
            };
            deviation_report(spec, &starts, &obs, &checkpoints(cfg, n)?)
        }
        DiagKind::Discrepancy => discrepancy(cfg, spec, n),
        DiagKind::Eigenscan => {
            let thetas = cfg.thetas.as_ref().ok_or_else(|| Error::Config("missing `thetas` or `theta_grid`".into()))?;
            eigen_scan(spec, cfg.start_for(spec), &obs, thetas, n, cfg.threshold.unwrap_or(0.5))
        }
    }
}

fn discrepancy(cfg: &ExperimentConfig, spec: &FlowSpec, n: u64) -> Result<DiagnosticReport> {
    let start = cfg
        .start_for(spec)
        .into_torus()
        .ok_or_else(|| Error::Unsupported("discrepancy of a nilmanifold orbit".into()))?;
    let dim = spec.dim();
    let grid = cfg.grid.unwrap_or(10);
    let mut report = DiagnosticReport::new(spec.digest(), "orbit", n);
    if dim == 1 {
        if n as usize > MAX_DISCREPANCY_POINTS {
            return Err(Error::ResourceLimit(format!("N = {n} exceeds {MAX_DISCREPANCY_POINTS} for star discrepancy")));
        }
        let pts: Vec<_> = torus_orbit(spec, start.clone(), n)?.map(|p| p[0]).collect();
        report.push(ReportRow::real("star_discrepancy", n, star_discrepancy_1d(&pts)?, ""));
    }
    if dim <= MAX_BOX_DIM {
        let d = box_discrepancy(torus_orbit(spec, start.clone(), n)?, grid)?;
        report.push(ReportRow::real("box_discrepancy", n, d, format!("grid={grid}")));
    }
    if dim <= MAX_PROBE_DIM {
        let cps = checkpoints(cfg, n)?;
        let curve = minimality_curve(ProbeTarget::Flow(spec, start), &cps, grid)?;
        for (c, f) in cps.iter().zip(curve) {
            report.push(ReportRow::real("visited_fraction", *c, f, format!("grid={grid}")));
        }
    }
    if report.rows.is_empty() {
        return Err(Error::ResourceLimit(format!("dimension {dim} exceeds every probe")));
    }
    Ok(report)
}

fn cmd_demo(cfg: &ExperimentConfig, name: DemoName, n_flag: Option<u64>, out: Option<&Path>, format: Format) -> Result<i32> {
    let seed = cfg.seed.unwrap_or(0);
    let lac = cfg.lacunary.clone().unwrap_or_else(demos::default_lacunary);
    let points = cfg.points.unwrap_or(1000);
    let outcome = match name {
        DemoName::FurSeq => demos::fur_seq(cfg.level.unwrap_or(3))?,
        DemoName::Coboundary => demos::coboundary(&lac, cfg.n_or(n_flag, 10_000)?, seed)?,
        DemoName::Conjugacy => demos::conjugacy(&lac, points, cfg.n_or(n_flag, 1000)?, seed)?,
        DemoName::Theta => {
            let nil = cfg.nil.clone().unwrap_or_else(demos::default_nil);
            demos::theta(&nil, points, cfg.n_or(n_flag, 10_000)?, seed)?
        }
        DemoName::JoiningAnzai => {
            let alpha = cfg.alpha.unwrap_or_else(demos::default_beta);
            let beta = cfg.beta.unwrap_or_else(|| crate::Frac::from_decimal(demos::GOLDEN_FRAC).unwrap());
            demos::joining_anzai(alpha, beta, cfg.n_or(n_flag, 100_000)?)?
        }
        DemoName::JoiningM => {
            let alpha = cfg.alpha.unwrap_or_else(|| lac.alpha());
            demos::joining_m(&lac, alpha, cfg.n_or(n_flag, 10_000)?)?
        }
    };
    if out.is_some() {
        emit_report(&outcome.report, out, format)?;
    }
    let stdout = io::stdout();
    let mut w = stdout.lock();
    for note in &outcome.notes {
        writeln!(w, "{note}")?;
    }
    for c in &outcome.checks {
        writeln!(w, "{}", c.line())?;
    }
    Ok(if outcome.passed() { EXIT_OK } else { EXIT_FAIL })
}
