//! `indist`: batch front end for building the calibrated pair, the rounded
//! likelihood-ratio distinguisher and their reports.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use indist::generators::GeneratorSpec;
use indist::{Error, Rational, Result};

use config::{Flags, Mode, RunConfig};

const EXIT_AUDIT_FAILED: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_BUDGET: u8 = 4;
const EXIT_IO: u8 = 5;
const EXIT_INVARIANT: u8 = 70;

#[derive(Parser)]
#[command(name = "indist", version, about = "Multicalibration-based k-sample distinguishability reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sandwich report for a single k.
    Analyze(Flags),
    /// Sandwich report over a k list plus the k* search.
    Sweep(Flags),
    /// Multicalibrated partition only.
    Mcal(Flags),
    /// Pseudo-Hellinger and pseudo-Rényi programs with sample bounds.
    Pseudo(Flags),
    /// Writes an instance (X0, X1, family) into the --out directory.
    Generate(GenerateArgs),
    /// Checks a stored partition; exits 1 when the audit fails.
    Audit(Flags),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    BiasedCoin,
    PlantedHalves,
    RandomPair,
    Uniform,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    /// Coin bias for `biased-coin`.
    #[arg(long)]
    e: Option<f64>,
    /// Domain size.
    #[arg(long)]
    n: Option<usize>,
    /// Bias for `planted-halves`.
    #[arg(long)]
    bias: Option<f64>,
    /// Dirichlet concentration for `random-pair`.
    #[arg(long)]
    concentration: Option<f64>,
    #[command(flatten)]
    flags: Flags,
}

impl GenerateArgs {
    fn spec(&self) -> Result<Option<GeneratorSpec>> {
        let Some(kind) = self.kind else { return Ok(None) };
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::InvalidParameter(format!("generator needs --{name}")))
        };
        let n = || self.n.ok_or_else(|| Error::InvalidParameter("generator needs --n".into()));
        Ok(Some(match kind {
            Kind::BiasedCoin => GeneratorSpec::BiasedCoin { e: need(self.e, "e")? },
            Kind::PlantedHalves => GeneratorSpec::PlantedHalves { n: n()?, bias: need(self.bias, "bias")? },
            Kind::RandomPair => GeneratorSpec::RandomPair {
                n: n()?,
                concentration: self.concentration.unwrap_or(1.0),
                seed: self.flags.seed.unwrap_or(0),
            },
            Kind::Uniform => GeneratorSpec::Uniform { n: n()? },
        }))
    }
}

type Runner = fn(&RunConfig) -> commands::Status;

fn dispatch(name: &str, flags: &Flags, generator: Option<GeneratorSpec>, rational: Runner, real: Runner) -> commands::Status {
    let cfg = RunConfig::resolve(name, flags, generator)?;
    match cfg.mode {
        Mode::Rational => rational(&cfg),
        Mode::Real => real(&cfg),
    }
}

fn run(cli: Cli) -> commands::Status {
    use commands::*;
    match &cli.command {
        Command::Analyze(f) => dispatch("analyze", f, None, analyze::<Rational>, analyze::<f64>),
        Command::Sweep(f) => dispatch("sweep", f, None, sweep::<Rational>, sweep::<f64>),
        Command::Mcal(f) => dispatch("mcal", f, None, mcal::<Rational>, mcal::<f64>),
        Command::Pseudo(f) => dispatch("pseudo", f, None, pseudo::<Rational>, pseudo::<f64>),
        Command::Audit(f) => dispatch("audit", f, None, audit_cmd::<Rational>, audit_cmd::<f64>),
        Command::Generate(g) => {
            let spec = g.spec()?;
            dispatch("generate", &g.flags, spec, generate_cmd::<Rational>, generate_cmd::<f64>)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) => EXIT_PARSE,
        Error::DomainMismatch { .. }
        | Error::InvalidDistribution(_)
        | Error::InvalidParameter(_)
        | Error::ZeroMassSubset
        | Error::EmptyFamily
        | Error::DomainTooLarge { .. } => EXIT_VALIDATION,
        Error::BudgetExceeded { .. } | Error::MaxRoundsExceeded { .. } | Error::SolverDidNotConverge(_) => EXIT_BUDGET,
        Error::Io(_) => EXIT_IO,
        Error::StructuralViolation { .. } | Error::Invariant(_) => EXIT_INVARIANT,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("indist: audit failed");
            ExitCode::from(EXIT_AUDIT_FAILED)
        }
        Err(e) => {
            let code = exit_code(&e);
            if code == EXIT_INVARIANT {
                eprintln!("indist: INTERNAL INVARIANT VIOLATED: {e}");
            } else {
                eprintln!("indist: {e}");
            }
            ExitCode::from(code)
        }
    }
}
