mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use sprinkle::acceptance::DEFAULT_SEED;
use sprinkle::harness::Runner;

use config::ExperimentConfig;
use run::{json_bytes, RunOutput, StreamRecord};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("resource limit exceeded: {0}")]
    Limit(String),
    #[error(transparent)]
    Core(#[from] sprinkle::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Run(String),
}

#[derive(Parser, Debug)]
#[command(name = "sprinkle", version, about = "Seeded Hammersley-process, last-passage and random-walk experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct Flags {
    /// JSON experiment config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<u32>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; defaults to the config's `out` or `./out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    Simulate(Flags),
    Decouple(Flags),
    DecoupleExp(Flags),
    Exitpoint(Flags),
    Detect(Flags),
    RwreSpeed(Flags),
    ExplppChecks(Flags),
    PoissonBound(Flags),
    Schedule(Flags),
    /// Runs the whole acceptance suite.
    Selftest(Flags),
}

impl Command {
    fn parts(&self) -> (&'static str, &Flags) {
        match self {
            Self::Simulate(f) => ("simulate", f),
            Self::Decouple(f) => ("decouple", f),
            Self::DecoupleExp(f) => ("decouple-exp", f),
            Self::Exitpoint(f) => ("exitpoint", f),
            Self::Detect(f) => ("detect", f),
            Self::RwreSpeed(f) => ("rwre-speed", f),
            Self::ExplppChecks(f) => ("explpp-checks", f),
            Self::PoissonBound(f) => ("poisson-bound", f),
            Self::Schedule(f) => ("schedule", f),
            Self::Selftest(f) => ("selftest", f),
        }
    }
}

#[derive(Serialize)]
struct OutputRecord {
    file: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    command: &'a str,
    seed: u64,
    workers: usize,
    config_sha256: Option<String>,
    config: serde_json::Value,
    pass: bool,
    summary: &'a str,
    wall_seconds: f64,
    streams: &'a [StreamRecord],
    outputs: Vec<OutputRecord>,
}

fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read_config(path: &Path) -> Result<(String, Vec<u8>), CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Config(e.to_string()))?;
    Ok((text, bytes))
}

fn write_outputs(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<(), CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    for (name, bytes) in files {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(io(&p))?;
    }
    Ok(())
}

fn execute(cmd: &Command) -> Result<bool, CliError> {
    let started = Instant::now();
    let (kind, flags) = cmd.parts();
    let runner = match flags.workers {
        Some(0) => return Err(CliError::Config("--workers must be at least 1".into())),
        Some(w) => Runner::new(w)?,
        None => Runner::with_available_parallelism()?,
    };

    let (out, seed, config_sha, config_json) = if kind == "selftest" {
        if flags.config.is_some() || flags.reps.is_some() {
            return Err(CliError::Config("selftest takes no --config or --reps".into()));
        }
        (flags.out.clone(), flags.seed.unwrap_or(DEFAULT_SEED), None, serde_json::Value::Null)
    } else {
        let (mut cfg, sha) = match &flags.config {
            Some(path) => {
                let (text, bytes) = read_config(path)?;
                (ExperimentConfig::parse(&text)?, Some(hex_sha256(&bytes)))
            }
            None => (ExperimentConfig::default_for(kind).expect("every subcommand has a default"), None),
        };
        if cfg.kind() != kind {
            return Err(CliError::Config(format!("config kind {} does not match subcommand {kind}", cfg.kind())));
        }
        if let Some(r) = flags.reps {
            cfg.set_reps(r)?;
        }
        cfg.check_limits()?;
        let out = flags.out.clone().or_else(|| cfg.out().cloned());
        let seed = flags.seed.or(cfg.seed()).unwrap_or(DEFAULT_SEED);
        let json = serde_json::to_value(&cfg).map_err(|e| CliError::Run(e.to_string()))?;
        (out, seed, sha, json)
    };
    let out = out.unwrap_or_else(|| PathBuf::from("out"));

    let (output, extra): (RunOutput, Vec<(String, Vec<u8>)>) = if kind == "selftest" {
        let (output, report, timings) = run::selftest(&runner, seed)?;
        for c in &report.criteria {
            println!("criterion {:>2} {} {}: {}", c.id, if c.pass { "PASS" } else { "FAIL" }, c.name, c.summary);
        }
        (output, vec![("timings.json".into(), json_bytes(&timings)?)])
    } else {
        let cfg: ExperimentConfig = serde_json::from_value(config_json.clone()).map_err(|e| CliError::Run(e.to_string()))?;
        (run::run(&cfg, &runner, seed)?, vec![])
    };

    let mut files = output.files.clone();
    files.extend(extra);
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        command: kind,
        seed,
        workers: runner.workers(),
        config_sha256: config_sha,
        config: config_json,
        pass: output.pass,
        summary: &output.summary,
        wall_seconds: started.elapsed().as_secs_f64(),
        streams: &output.streams,
        outputs: files
            .iter()
            .map(|(name, b)| OutputRecord { file: name.clone(), bytes: b.len(), sha256: hex_sha256(b) })
            .collect(),
    };
    files.push(("manifest.json".into(), json_bytes(&manifest)?));
    write_outputs(&out, &files)?;
    println!("{kind}: {} ({})", output.summary, if output.pass { "pass" } else { "FAIL" });
    Ok(output.pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
