//! Effective run configuration: flags over a TOML config file over defaults.

use std::path::{Path, PathBuf};

use indist::analysis::convex::SolverConfig;
use indist::analysis::FamilyRegime;
use indist::config::{BoundConstants, DEFAULT_BUDGET};
use indist::function_families::ProductMode;
use indist::generators::GeneratorSpec;
use indist::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Rational,
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RegimeArg {
    AllBoolean,
    Products,
    PerCoordinate,
    None,
}

impl RegimeArg {
    pub fn regime(self) -> FamilyRegime {
        match self {
            RegimeArg::AllBoolean => FamilyRegime::AllBoolean,
            RegimeArg::Products => FamilyRegime::Products(ProductMode::AllProducts),
            RegimeArg::PerCoordinate => FamilyRegime::Products(ProductMode::PerCoordinate),
            RegimeArg::None => FamilyRegime::None,
        }
    }
}

/// A number written either as a TOML number or as text (`"1/10"`), kept as
/// text so rational mode reads it exactly.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum NumText {
    Text(String),
    Int(i64),
    Float(f64),
}

impl NumText {
    fn into_text(self) -> String {
        match self {
            NumText::Text(s) => s,
            NumText::Int(i) => i.to_string(),
            NumText::Float(f) => f.to_string(),
        }
    }
}

/// Contents of `--config`. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub x0: Option<PathBuf>,
    pub x1: Option<PathBuf>,
    pub family: Option<PathBuf>,
    pub partition: Option<PathBuf>,
    pub epsilon: Option<NumText>,
    pub gamma: Option<NumText>,
    pub delta: Option<NumText>,
    pub eps_prime: Option<NumText>,
    pub k: Option<Vec<usize>>,
    pub budget: Option<u128>,
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub target: Option<f64>,
    pub k_max: Option<usize>,
    pub regime: Option<RegimeArg>,
    pub mc_trials: Option<u64>,
    pub generator: Option<GeneratorSpec>,
    pub solver: Option<SolverConfig>,
    pub constants: Option<BoundConstants>,
}

impl FileConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

/// Flag values shared by every subcommand; `None` means "not given".
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Flags {
    /// Distribution file for X0.
    #[arg(long)]
    pub x0: Option<PathBuf>,
    /// Distribution file for X1.
    #[arg(long)]
    pub x1: Option<PathBuf>,
    /// Test family file.
    #[arg(long)]
    pub family: Option<PathBuf>,
    /// Indistinguishability parameter.
    #[arg(long)]
    pub epsilon: Option<String>,
    /// Heavy-part threshold for multicalibration.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Rounding resolution of the likelihood-ratio distinguisher.
    #[arg(long)]
    pub delta: Option<String>,
    /// Accuracy of the partition behind the hat variable.
    #[arg(long = "eps-prime")]
    pub eps_prime: Option<String>,
    /// Sample counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Work budget for exact computations.
    #[arg(long)]
    pub budget: Option<u128>,
    /// Seed for Monte Carlo estimates and the `random-pair` generator.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// JSON report path (stdout when absent), or an output directory for
    /// `generate`, or a partition path for `mcal`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV report path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// TOML file with defaults for any of these settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Partition file for `audit`.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// Advantage that defines k* in `sweep`.
    #[arg(long)]
    pub target: Option<f64>,
    /// Largest k tried by `sweep`.
    #[arg(long = "k-max")]
    pub k_max: Option<usize>,
    /// Family measured on X^k.
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
    /// Monte Carlo trials when exact evaluation exceeds the budget.
    #[arg(long = "mc-trials")]
    pub mc_trials: Option<u64>,
}

pub const DEFAULT_EPSILON: &str = "1/10";
pub const DEFAULT_DELTA: &str = "1/100";
pub const DEFAULT_TARGET: f64 = 2.0 / 3.0;
pub const DEFAULT_K_MAX: usize = 1000;
pub const DEFAULT_MC_TRIALS: u64 = 10_000;

/// The configuration a run actually used; echoed into every JSON report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub x0: Option<PathBuf>,
    pub x1: Option<PathBuf>,
    pub family: Option<PathBuf>,
    pub partition: Option<PathBuf>,
    pub epsilon: String,
    pub gamma: Option<String>,
    pub delta: String,
    pub eps_prime: Option<String>,
    pub k: Vec<usize>,
    pub budget: u128,
    pub seed: u64,
    pub mode: Mode,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub target: f64,
    pub k_max: usize,
    pub regime: RegimeArg,
    pub mc_trials: u64,
    pub generator: Option<GeneratorSpec>,
    pub solver: SolverConfig,
    pub constants: BoundConstants,
}

impl RunConfig {
    pub fn resolve(command: &str, flags: &Flags, generator: Option<GeneratorSpec>) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => FileConfig::read(path)?,
            None => FileConfig::default(),
        };
        let text = |flag: &Option<String>, file: Option<NumText>| flag.clone().or(file.map(NumText::into_text));
        let cfg = RunConfig {
            command: command.to_string(),
            x0: flags.x0.clone().or(file.x0),
            x1: flags.x1.clone().or(file.x1),
            family: flags.family.clone().or(file.family),
            partition: flags.partition.clone().or(file.partition),
            epsilon: text(&flags.epsilon, file.epsilon).unwrap_or_else(|| DEFAULT_EPSILON.into()),
            gamma: text(&flags.gamma, file.gamma),
            delta: text(&flags.delta, file.delta).unwrap_or_else(|| DEFAULT_DELTA.into()),
            eps_prime: text(&flags.eps_prime, file.eps_prime),
            k: flags.k.clone().or(file.k).unwrap_or_else(|| vec![1]),
            budget: flags.budget.or(file.budget).unwrap_or(DEFAULT_BUDGET),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            mode: flags.mode.or(file.mode).unwrap_or(Mode::Rational),
            out: flags.out.clone().or(file.out),
            csv: flags.csv.clone().or(file.csv),
            target: flags.target.or(file.target).unwrap_or(DEFAULT_TARGET),
            k_max: flags.k_max.or(file.k_max).unwrap_or(DEFAULT_K_MAX),
            regime: flags.regime.or(file.regime).unwrap_or(RegimeArg::Products),
            mc_trials: flags.mc_trials.or(file.mc_trials).unwrap_or(DEFAULT_MC_TRIALS),
            generator: generator.or(file.generator),
            solver: file.solver.unwrap_or_default(),
            constants: file.constants.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.k.is_empty() || self.k.contains(&0) {
            return Err(Error::InvalidParameter(format!("k list {:?} must be nonempty and positive", self.k)));
        }
        if !(self.target > 0.0 && self.target < 1.0) {
            return Err(Error::InvalidParameter(format!("target {} outside (0,1)", self.target)));
        }
        if self.k_max == 0 {
            return Err(Error::InvalidParameter("k-max must be positive".into()));
        }
        if self.mc_trials == 0 {
            return Err(Error::InvalidParameter("mc-trials must be positive".into()));
        }
        Ok(())
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter(format!("`{}` needs --{flag}", self.command)))
    }
}
