use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grazing_spectral::config::{Command, RunConfig};
use grazing_spectral::experiments;

#[derive(Parser)]
#[command(name = "grazing", version, about = "Spectral collision operators in the grazing limit")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Tabulate Boltzmann collision modes
    Modes(Common),
    /// Tabulate FPL or approximate split-kernel fields
    FplModes(Common),
    /// Compare exact, approximate and FPL modes along the ε ladder
    GrazingStudy(Common),
    /// Integrate the spectral equation and record moments and distance to equilibrium
    Relax(Common),
    /// Time the direct and fast evaluators
    Bench(Common),
    /// Run the invariant checks
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Mode cache directory
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Modes per axis are 2N+1
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated ε list
    #[arg(long)]
    eps: Option<String>,
    /// direct, fast or both
    #[arg(long)]
    evaluator: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Extra key=value overrides
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn build_config(c: &Common) -> grazing_spectral::error::Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let mut pairs: Vec<(String, String)> = Vec::new();
    if let Some(v) = &c.out {
        pairs.push(("out".into(), v.display().to_string()));
    }
    if let Some(v) = &c.cache {
        pairs.push(("cache".into(), v.display().to_string()));
    }
    if let Some(v) = c.n {
        pairs.push(("n".into(), v.to_string()));
    }
    if let Some(v) = &c.eps {
        pairs.push(("eps".into(), v.clone()));
    }
    if let Some(v) = &c.evaluator {
        pairs.push(("evaluator".into(), v.clone()));
    }
    if let Some(v) = c.seed {
        pairs.push(("seed".into(), v.to_string()));
    }
    for s in &c.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| grazing_spectral::error::Error::Config(format!("expected KEY=VALUE, got {s}")))?;
        pairs.push((k.trim().into(), v.trim().into()));
    }
    for (k, v) in pairs {
        cfg.set(&k, &v)?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (command, common) = match &cli.command {
        Sub::Modes(c) => (Command::Modes, c),
        Sub::FplModes(c) => (Command::FplModes, c),
        Sub::GrazingStudy(c) => (Command::GrazingStudy, c),
        Sub::Relax(c) => (Command::Relax, c),
        Sub::Bench(c) => (Command::Bench, c),
        Sub::Validate(c) => (Command::Validate, c),
    };
    let result = build_config(common).and_then(|cfg| experiments::run(command, &cfg));
    match result {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for f in &outcome.files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::from(outcome.exit_code.clamp(0, 255) as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
