//! Command-line experiment pipeline: phantom, projection, noise, exponent
//! maps, reconstruction, metrics and run-log comparison.

pub mod commands;
pub mod compare;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use varlp::Error;

pub use config::ExperimentConfig;

pub const EXIT_FILE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "varlp", version, about = "Variable exponent Lebesgue space reconstruction pipeline")]
#[command(after_help = "Config keys can be overridden with --section.key=value after the command.")]
pub struct Cli {
    /// Single-threaded operator application.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the test phantom to io.phantom.
    Phantom { config: PathBuf },
    /// Forward-project io.phantom into io.clean_sinogram.
    Project { config: PathBuf },
    /// Corrupt io.clean_sinogram into io.sinogram.
    Noise { config: PathBuf },
    /// Pilot reconstruction and exponent maps io.p_map / io.q_map.
    Maps { config: PathBuf },
    /// Run the configured solver on io.sinogram.
    Reconstruct { config: PathBuf },
    /// Quality of io.reconstruction against io.phantom.
    Metrics { config: PathBuf },
    /// Rank run logs by best PSNR.
    Compare {
        #[arg(required = true, num_args = 2..)]
        runlogs: Vec<PathBuf>,
        /// Summary CSV; printed to stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Parse { .. } => EXIT_FILE,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

pub type Overrides = Vec<(String, String)>;

/// Splits `--section.key=value` and `--section.key value` overrides from the
/// arguments clap should see.
pub fn split_overrides(args: Vec<OsString>) -> Result<(Vec<OsString>, Overrides), String> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let name = arg.to_str().and_then(|s| s.strip_prefix("--")).filter(|s| {
            let key = s.split('=').next().unwrap_or("");
            key.contains('.') && !key.starts_with('.')
        });
        let Some(name) = name else {
            rest.push(arg);
            continue;
        };
        match name.split_once('=') {
            Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
            None => {
                let v = it.next().and_then(|v| v.into_string().ok()).ok_or(format!("--{name} needs a value"))?;
                overrides.push((name.to_string(), v));
            }
        }
    }
    Ok((rest, overrides))
}

fn thread_count(deterministic: bool) -> Result<Option<usize>, Error> {
    if deterministic {
        return Ok(Some(1));
    }
    match std::env::var("VARLP_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                let avail = std::thread::available_parallelism().map_or(n, |a| a.get());
                Ok(Some(n.min(avail)))
            }
            _ => Err(Error::ConfigInvalid(format!("VARLP_THREADS = {v:?} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

fn dispatch(cli: Cli, overrides: &[(String, String)]) -> Result<String, Error> {
    let load = |path: &PathBuf| -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::load(path)?;
        cfg.apply_overrides(overrides)?;
        Ok(cfg)
    };
    let threads = thread_count(cli.deterministic)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::ConfigInvalid(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Phantom { config } => commands::cmd_phantom(&load(config)?),
        Command::Project { config } => commands::cmd_project(&load(config)?),
        Command::Noise { config } => commands::cmd_noise(&load(config)?),
        Command::Maps { config } => commands::cmd_maps(&load(config)?),
        Command::Reconstruct { config } => commands::cmd_reconstruct(&load(config)?),
        Command::Metrics { config } => commands::cmd_metrics(&load(config)?),
        Command::Compare { runlogs, output } => {
            if !overrides.is_empty() {
                return Err(Error::ConfigInvalid("compare takes no config overrides".into()));
            }
            compare::cmd_compare(runlogs, output.as_deref())
        }
    })
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn main_with_args(args: Vec<OsString>) -> i32 {
    let (args, overrides) = match split_overrides(args) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match dispatch(cli, &overrides) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn overrides_are_split_off() {
        let (rest, ov) =
            split_overrides(os(&["varlp", "reconstruct", "a.ini", "--solver.epochs=40", "--io.runlog", "x.csv", "--deterministic"]))
                .unwrap();
        assert_eq!(rest, os(&["varlp", "reconstruct", "a.ini", "--deterministic"]));
        assert_eq!(ov, vec![("solver.epochs".into(), "40".into()), ("io.runlog".into(), "x.csv".into())]);
        assert!(split_overrides(os(&["varlp", "--solver.epochs"])).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::ConfigInvalid("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::NonFinite { index: 0 }), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::Overflow { index: 0 }), EXIT_NUMERICAL);
        let io = Error::Io { path: "a".into(), source: std::io::Error::other("x") };
        assert_eq!(exit_code(&io), EXIT_FILE);
        assert_eq!(exit_code(&Error::MismatchedLogs("x".into())), EXIT_CONFIG);
    }
}
