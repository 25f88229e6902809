//! # forge (runner)
//!
//! Reads an experiment configuration, runs it on a fixed-size thread pool and
//! writes `report.json` (one JSON line per run) plus `.csv` and `.dat`
//! tables to the output directory.
//!
//! Exit codes: 0 on success, 1 on configuration or other errors, 2 when a
//! size cap was exceeded.

pub mod config;
pub mod runner;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;
use serde_json::Value;

pub use config::{parse_config, ConfigError, ConfigErrors, Experiment, ExperimentConfig};
pub use runner::{run_experiment, Outcome, Table};

/// Version of the `report.json` record layout.
pub const REPORT_SCHEMA: u32 = 1;

pub const ENV_OUTPUT_DIR: &str = "FORGE_OUTPUT_DIR";
pub const ENV_WORKERS: &str = "FORGE_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigErrors),
    #[error(transparent)]
    Framework(#[from] forge_core::Error),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad value for {name}: {value}")]
    Env { name: &'static str, value: String },
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Framework(e) if e.is_cap() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRecord {
    pub schema: u32,
    pub experiment: Experiment,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub started: String,
    pub finished: String,
    /// `ok`, `cap-exceeded` or `error`.
    pub status: &'static str,
    pub error: Option<String>,
    /// Deterministic in the configuration and seed.
    pub result: Value,
}

/// Canonical bytes of a payload; this is what determinism is judged on.
pub fn payload_bytes(payload: &Value) -> String {
    serde_json::to_string(payload).expect("payloads serialize")
}

/// Runs `cfg` on a dedicated pool of `workers` threads.
pub fn run_with_workers(cfg: &ExperimentConfig, workers: usize) -> Result<Outcome, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    Ok(pool.install(|| run_experiment(cfg))?)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), RunError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| RunError::Write { path, source })
}

/// Runs the experiment and writes every artifact. The report line is written
/// even when the experiment fails, with the error in place of a result.
pub fn execute(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    workers: usize,
) -> Result<ReportRecord, RunError> {
    fs::create_dir_all(out_dir).map_err(|source| RunError::Write {
        path: out_dir.into(),
        source,
    })?;
    let started = chrono::Utc::now().to_rfc3339();
    let outcome = run_with_workers(cfg, workers);
    let finished = chrono::Utc::now().to_rfc3339();
    let (status, error, result) = match &outcome {
        Ok(o) => ("ok", None, o.payload.clone()),
        Err(RunError::Framework(e)) if e.is_cap() => {
            ("cap-exceeded", Some(e.to_string()), Value::Null)
        }
        Err(e) => ("error", Some(e.to_string()), Value::Null),
    };
    let record = ReportRecord {
        schema: REPORT_SCHEMA,
        experiment: cfg.experiment,
        version: env!("CARGO_PKG_VERSION"),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        workers,
        started,
        finished,
        status,
        error,
        result,
    };
    let path = out_dir.join("report.json");
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|source| RunError::Write {
            path: path.clone(),
            source,
        })?;
    let line = serde_json::to_string(&record).expect("records serialize") + "\n";
    file.write_all(line.as_bytes())
        .map_err(|source| RunError::Write { path, source })?;
    let outcome = outcome?;
    for t in &outcome.tables {
        write_file(out_dir, &format!("{}.csv", t.name), &t.to_csv())?;
        write_file(out_dir, &format!("{}.dat", t.name), &t.to_dat())?;
    }
    for (name, contents) in &outcome.files {
        write_file(out_dir, name, contents)?;
    }
    Ok(record)
}

#[derive(Debug, Parser)]
#[command(name = "forge", version, about = "Run a forge experiment described by a TOML file", after_help = config::DEFAULTS_HELP)]
pub struct Cli {
    /// Experiment configuration (TOML).
    pub config: PathBuf,
    /// Worker threads [default: FORGE_WORKERS, else available parallelism].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory [default: FORGE_OUTPUT_DIR, else the config's output_dir].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Resolves flags over environment over configuration.
pub fn resolve(
    cli: &Cli,
    cfg: &ExperimentConfig,
    env: impl Fn(&str) -> Option<String>,
) -> Result<(PathBuf, usize), RunError> {
    let out = cli
        .out
        .clone()
        .or_else(|| env(ENV_OUTPUT_DIR).map(PathBuf::from))
        .unwrap_or_else(|| cfg.output_dir.clone());
    let workers = match (cli.workers, env(ENV_WORKERS)) {
        (Some(w), _) => w,
        (None, Some(v)) => v.trim().parse().map_err(|_| RunError::Env {
            name: ENV_WORKERS,
            value: v.clone(),
        })?,
        (None, None) => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    if workers == 0 {
        return Err(RunError::Env {
            name: ENV_WORKERS,
            value: "0".into(),
        });
    }
    Ok((out, workers))
}

fn run_cli(cli: &Cli) -> Result<ReportRecord, RunError> {
    let text = fs::read_to_string(&cli.config).map_err(|source| RunError::Read {
        path: cli.config.clone(),
        source,
    })?;
    let cfg = parse_config(&text)?;
    let (out, workers) = resolve(cli, &cfg, |k| std::env::var(k).ok())?;
    execute(&cfg, &out, workers)
}

/// Entry point; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run_cli(&cli) {
        Ok(record) => {
            println!("{} ok ({})", record.experiment, record.config_hash);
            0
        }
        Err(e) => {
            eprintln!("{}: {e}", cli.config.display());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        parse_config(text).unwrap()
    }

    #[test]
    fn flags_beat_environment_beat_config() {
        let c = cfg("experiment = \"simulate\"\noutput_dir = \"from-config\"\n[protocol]\nname = \"xor_coin\"\n");
        let none = |_: &str| None;
        let env = |k: &str| match k {
            ENV_OUTPUT_DIR => Some("from-env".to_string()),
            ENV_WORKERS => Some("3".to_string()),
            _ => None,
        };
        let bare = Cli {
            config: "x".into(),
            workers: None,
            out: None,
        };
        assert_eq!(
            resolve(&bare, &c, none).unwrap().0,
            PathBuf::from("from-config")
        );
        assert_eq!(
            resolve(&bare, &c, env).unwrap(),
            (PathBuf::from("from-env"), 3)
        );
        let flags = Cli {
            config: "x".into(),
            workers: Some(5),
            out: Some("from-flag".into()),
        };
        assert_eq!(
            resolve(&flags, &c, env).unwrap(),
            (PathBuf::from("from-flag"), 5)
        );
        let bad = |k: &str| (k == ENV_WORKERS).then(|| "many".to_string());
        assert!(matches!(resolve(&bare, &c, bad), Err(RunError::Env { .. })));
    }

    #[test]
    fn cap_errors_exit_with_two() {
        let e = RunError::Framework(forge_core::Error::cap("x", 10.0, 1));
        assert_eq!(e.exit_code(), 2);
        let e = RunError::Framework(forge_core::Error::EmptyFamily);
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn tables_render_both_formats() {
        let t = Table {
            name: "t".into(),
            columns: vec!["a".into(), "b".into()],
            rows: vec![vec!["1".into(), "2".into()]],
        };
        assert_eq!(t.to_csv(), "a,b\n1,2\n");
        assert_eq!(t.to_dat(), "# a b\n1 2\n");
    }
}
