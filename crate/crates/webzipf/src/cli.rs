//! The `webzipf` command line.
//!
//! Exit codes: 0 success, 2 I/O failure, 3 empty or invalid input (including
//! bad arguments), 4 numerical failure. Every error is reported as one line
//! on standard error: `webzipf: error: <category>: <message>`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use webzipf_core::fit::WindowError;
use webzipf_core::synth::SynthError;
use webzipf_core::{
    decade_windows, fit, sample_requests, scan_windows, straighten, summary, to_rank_distribution, trickle_down,
    FitError, FitWindow, GeneratorSpec, LogFormat, ModelKind, ResidualSpace,
};

use crate::io::ingest_files;
use crate::report::{fit_report, scan_table, straightened_text, summary_text};
use crate::tsv::{read_distribution, write_distribution, DistFile, TsvError};

#[derive(Debug, Parser)]
#[command(name = "webzipf", version, about = "Website popularity rank distributions and Zipf-law fits")]
#[command(propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tally successful GET requests per website into a rank distribution.
    Ingest {
        /// Log files; names ending in `.gz` are decompressed.
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        /// `squid` (native access.log) or `clf` (common log format).
        #[arg(long, default_value = "squid")]
        format: LogFormat,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Parser threads (default: available cores).
        #[arg(short = 'j', long)]
        threads: Option<usize>,
    },
    /// Fit a Zipf-family law over a rank window.
    Fit {
        /// Rank-distribution TSV, or `-` for standard input.
        dist: PathBuf,
        /// `zipf`, `zm` (Zipf-Mandelbrot) or `modified`.
        #[arg(long, default_value = "modified")]
        model: ModelKind,
        /// Inclusive rank window `rmin:rmax` (default: all ranks).
        #[arg(long)]
        window: Option<FitWindow>,
        /// `linear` or `log`.
        #[arg(long, default_value = "linear")]
        residuals: ResidualSpace,
    },
    /// Fit the same law over several windows.
    Scan {
        dist: PathBuf,
        #[arg(long, default_value = "modified")]
        model: ModelKind,
        /// `rmin:rmax[,rmin:rmax...]`, or `auto` for decades 1:10, 10:100, ...
        #[arg(long, default_value = "auto")]
        window: String,
        #[arg(long, default_value = "linear")]
        residuals: ResidualSpace,
    },
    /// Sample a synthetic distribution from a truncated Zipf-Mandelbrot law.
    Gen {
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        c: f64,
        #[arg(long, default_value = "100000", value_parser = parse_count)]
        sites: u64,
        #[arg(long, default_value = "1000000", value_parser = parse_count)]
        requests: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Remove the N most popular sites, as a child cache holding them would.
    Trickle {
        dist: PathBuf,
        #[arg(short = 'n', value_parser = parse_count)]
        n: u64,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Emit `r+c  f_r-a` columns for log-log plotting.
    Straighten {
        dist: PathBuf,
        #[arg(long = "a", default_value_t = 0.0, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        c: f64,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Totals, the most popular sites and the rank where counts fall below 100.
    Summary {
        dist: PathBuf,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
}

/// Accepts plain integers and integral floats such as `1e6`.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < u64::MAX as f64 => Ok(x as u64),
        _ => Err(format!("`{s}` is not a non-negative integer")),
    }
}

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 2,
            CliError::Input(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    fn line(&self) -> String {
        let (category, msg) = match self {
            CliError::Io(m) => ("io", m),
            CliError::Input(m) => ("input", m),
            CliError::Numerical(m) => ("numerical", m),
        };
        format!("webzipf: error: {category}: {}", msg.replace(['\n', '\r'], " "))
    }
}

impl From<TsvError> for CliError {
    fn from(e: TsvError) -> Self {
        match e {
            TsvError::Io(e) => CliError::Io(e.to_string()),
            e => CliError::Input(e.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::EmptyWindow(_) => CliError::Input(e.to_string()),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidParameter(_) => CliError::Input(e.to_string()),
            SynthError::TrickleTooLarge { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let msg = if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                "missing subcommand (see --help)".to_string()
            } else {
                let text = e.to_string();
                let first = text.lines().next().unwrap_or_default();
                first.strip_prefix("error: ").unwrap_or(first).to_string()
            };
            let err = CliError::Input(format!("usage: {msg}"));
            eprintln!("{}", err.line());
            return err.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest { logs, format, out, threads } => {
            let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let ingest = ingest_files(&logs, format, threads).map_err(|e| CliError::Io(e.to_string()))?;
            let (counts, stats) = ingest.into_parts();
            eprintln!("{stats}");
            if stats.rejected_malformed > 0 {
                eprintln!("webzipf: warning: {} malformed lines skipped", stats.rejected_malformed);
            }
            let dist = to_rank_distribution(&counts).map_err(|_| CliError::Input("no accepted requests".into()))?;
            let source = format!("ingest format={}", format_name(format));
            emit(out.as_deref(), |w| write_distribution(w, &dist, &source))
        }
        Command::Fit { dist, model, window, residuals } => {
            let DistFile { dist, .. } = load(&dist)?;
            let window = window.unwrap_or_else(|| FitWindow::full(&dist));
            let result = fit(&dist, model, window, residuals)?;
            print!("{}", fit_report(&result, dist.unique_sites()));
            if result.converged {
                Ok(())
            } else {
                Err(CliError::Numerical(format!("fit did not converge in {} iterations", result.iterations)))
            }
        }
        Command::Scan { dist, model, window, residuals } => {
            let DistFile { dist, .. } = load(&dist)?;
            let windows = parse_windows(&window, dist.max_rank())?;
            print!("{}", scan_table(&scan_windows(&dist, model, &windows, residuals)));
            Ok(())
        }
        Command::Gen { alpha, c, sites, requests, seed, out } => {
            let n_sites = usize::try_from(sites).map_err(|_| CliError::Input("too many sites".into()))?;
            let spec = GeneratorSpec { alpha, c, n_sites, n_requests: requests, seed };
            let counts = sample_requests(&spec)?;
            let dist = to_rank_distribution(&counts).map_err(|e| CliError::Input(e.to_string()))?;
            let source = format!("synthetic alpha={alpha} c={c} seed={seed}");
            emit(out.as_deref(), |w| write_distribution(w, &dist, &source))
        }
        Command::Trickle { dist, n, out } => {
            let DistFile { dist, source } = load(&dist)?;
            let (cut, report) = trickle_down(&dist, n)?;
            eprintln!(
                "n_removed={} removed_fraction={}",
                report.n_removed,
                crate::tsv::format_g17(report.removed_fraction)
            );
            let source = format!("trickle n={n}; {source}");
            emit(out.as_deref(), |w| write_distribution(w, &cut, &source))
        }
        Command::Straighten { dist, a, c, out } => {
            let DistFile { dist, .. } = load(&dist)?;
            let text = straightened_text(&straighten(&dist, a, c));
            emit(out.as_deref(), |w| w.write_all(text.as_bytes()).and_then(|()| w.flush()))
        }
        Command::Summary { dist, top } => {
            let DistFile { dist, .. } = load(&dist)?;
            print!("{}", summary_text(&summary(&dist, top)));
            Ok(())
        }
    }
}

fn format_name(format: LogFormat) -> &'static str {
    match format {
        LogFormat::SquidNative => "squid",
        LogFormat::CommonLog => "clf",
    }
}

fn parse_windows(spec: &str, max_rank: u64) -> Result<Vec<FitWindow>, CliError> {
    let windows = if spec == "auto" {
        decade_windows(max_rank)
    } else {
        spec.split(',')
            .map(|w| w.trim().parse())
            .collect::<Result<Vec<_>, WindowError>>()
            .map_err(|e| CliError::Input(format!("window list `{spec}`: {e}")))?
    };
    if windows.is_empty() {
        return Err(CliError::Input(format!("window list `{spec}` yields no windows")));
    }
    Ok(windows)
}

fn load(path: &Path) -> Result<DistFile, CliError> {
    if path.as_os_str() == "-" {
        return Ok(read_distribution(io::stdin().lock())?);
    }
    let file = File::open(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    read_distribution(BufReader::new(file)).map_err(|e| match e {
        TsvError::Io(e) => CliError::Io(format!("cannot read {}: {e}", path.display())),
        e => CliError::Input(format!("{}: {e}", path.display())),
    })
}

fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let file =
                File::create(path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
            write(&mut BufWriter::new(file)).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            let stdout = io::stdout();
            write(&mut BufWriter::new(stdout.lock())).map_err(|e| CliError::Io(format!("cannot write output: {e}")))
        }
    }
}
