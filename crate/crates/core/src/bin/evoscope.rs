use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use evoscope::cli::{exit_code_for, reproduce_paper, run_command, Command, EXIT_USAGE};
use evoscope::config::{parse_config, parse_seed, AnalysisConfig, FamilyKind};
use evoscope::Error;

/// Nonuniform exponential behavior of evolution families.
#[derive(Parser)]
#[command(name = "evoscope", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Configuration file (`key = value` lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Catalog family, overrides `family.kind`
    #[arg(long, global = true)]
    family: Option<String>,
    /// Exponent to analyze, repeatable
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha: Vec<f64>,
    /// RNG seed, decimal or 0x-prefixed hex
    #[arg(long, global = true)]
    seed: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Lyapunov, Bohl and admissible exponents with the stability classification
    Exponents,
    /// Admissibility and strictness of each alpha
    Admissible,
    /// The functional phi and the admissible norm of a seeded bump
    Phi,
    /// Weight envelope W_alpha
    Weight,
    /// Evolution semigroup contract checks
    Semigroup,
    /// Norm estimate of the generator's inverse
    Resolvent,
    /// Stability certificate from the inverse's norm
    Certify,
    /// Norm equivalence of C(U, alpha) and C(U, -nu)
    Quasineg,
    /// Check every known fact of the catalog
    ReproducePaper,
}

impl Cmd {
    fn command(self) -> Command {
        match self {
            Cmd::Exponents => Command::Exponents,
            Cmd::Admissible => Command::Admissible,
            Cmd::Phi => Command::Phi,
            Cmd::Weight => Command::Weight,
            Cmd::Semigroup => Command::Semigroup,
            Cmd::Resolvent => Command::Resolvent,
            Cmd::Certify => Command::Certify,
            Cmd::Quasineg => Command::Quasineg,
            Cmd::ReproducePaper => Command::ReproducePaper,
        }
    }
}

fn load(cli: &Cli) -> Result<AnalysisConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => AnalysisConfig::default(),
    };
    if let Some(name) = &cli.family {
        cfg.family.kind = FamilyKind::parse(name).ok_or_else(|| Error::UnknownFamily(name.clone()))?;
    }
    if !cli.alpha.is_empty() {
        cfg.alphas = cli.alpha.clone();
    }
    if let Some(s) = &cli.seed {
        cfg.seed = parse_seed(s).ok_or_else(|| Error::Domain(format!("bad seed `{s}`")))?;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("evoscope: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let cmd = cli.command.command();
    let result = match (cmd, &cli.family) {
        (Command::ReproducePaper, Some(name)) => reproduce_paper(&[name.as_str()], &cfg),
        _ => run_command(cmd, &cfg),
    };
    match result {
        Ok(report) => {
            print!("{}", report.summary);
            for f in &report.failures {
                eprintln!("FAILED: {f}");
            }
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => {
            eprintln!("evoscope {}: {e}", cmd.name());
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
