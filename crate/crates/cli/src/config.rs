//! Flags, the optional TOML config file, and their merge into one
//! [`RunConfig`].
//!
//! Precedence, highest first: command-line flag, environment variable
//! (`QORTH_BITS`, `QORTH_TOL_EXP`), config file, built-in default.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_Q: &str = "0.5";
pub const DEFAULT_BITS: u32 = 256;
pub const DEFAULT_TOL_EXP: u32 = 200;
pub const DEFAULT_N: usize = 8;
pub const DEFAULT_K_MAX: usize = 6;

#[derive(Debug, Parser)]
#[command(
    name = "qorth",
    version,
    about = "Evaluate q^-1-Hermite and dual q-ultraspherical polynomials and verify their orthogonality"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Base q, 0 < q < 1 (decimal).
    #[arg(long, global = true)]
    pub q: Option<String>,

    /// Working precision in bits (>= 64).
    #[arg(long, global = true, env = "QORTH_BITS")]
    pub bits: Option<u32>,

    /// Tolerance exponent: tol = 2^-tol_exp.
    #[arg(long = "tol-exp", global = true, env = "QORTH_TOL_EXP")]
    pub tol_exp: Option<u32>,

    #[arg(long, global = true, value_enum)]
    pub output: Option<OutputFormat>,

    /// Write the result here instead of stdout.
    #[arg(long = "out", global = true)]
    pub out: Option<PathBuf>,

    /// TOML file with the same keys as the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one polynomial value.
    Eval(EvalArgs),
    /// Assemble a Gram matrix under a discrete measure.
    Gram(GramArgs),
    /// Run the identity suite.
    Verify(VerifyArgs),
    /// Sweep the extremal parameter a and fingerprint the node sets.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Default)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Degree (for htilde: the index k of h~_2k).
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub s: SArgs,
    /// Polynomial argument x (for D: the lattice label, mu = q^-x + s q^(x+1)).
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    /// Angle phi with x = sinh(phi) (h, htilde).
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<String>,
    /// Argument mu (D only).
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct SArgs {
    /// Parameter s > 0 (decimal).
    #[arg(long)]
    pub s: Option<String>,
    /// Take s = 1/q (qinv) or s = q (q) instead of --s.
    #[arg(long = "s-mode", value_enum)]
    pub s_mode: Option<SMode>,
}

#[derive(Debug, Args, Default)]
pub struct GramArgs {
    #[arg(long, value_enum)]
    pub measure: Option<MeasureArg>,
    /// Polynomial family; defaults to the one the measure belongs to.
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    #[command(flatten)]
    pub s: SArgs,
    /// Extremal parameter, q <= a < 1 (decimal).
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long, value_enum)]
    pub parity: Option<ParityArg>,
    /// Largest degree.
    #[arg(long = "N")]
    pub n_max: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct VerifyArgs {
    /// Print the identity ids without running them.
    #[arg(long)]
    pub list: bool,
    #[arg(long = "k-max")]
    pub k_max: Option<usize>,
    /// Largest dual degree in the Gram-based checks.
    #[arg(long = "N")]
    pub n_max: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct SweepArgs {
    /// First a (decimal, or `q`).
    #[arg(long = "a-from")]
    pub a_from: Option<String>,
    /// Last a (decimal).
    #[arg(long = "a-to")]
    pub a_to: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long = "N")]
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Pretty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
pub enum FamilyArg {
    #[value(name = "h")]
    #[serde(rename = "h")]
    H,
    #[value(name = "htilde")]
    #[serde(rename = "htilde")]
    HTilde,
    #[value(name = "C")]
    #[serde(rename = "C")]
    C,
    #[value(name = "D")]
    #[serde(rename = "D")]
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SMode {
    Value,
    Qinv,
    Q,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureArg {
    HermiteExtremal,
    DualBase,
    DualQinvExtremal,
    DualQExtremal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParityArg {
    Even,
    Odd,
}

/// Keys accepted in the `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub q: Option<String>,
    pub bits: Option<u32>,
    pub tol_exp: Option<u32>,
    pub output: Option<OutputFormat>,
    pub out: Option<PathBuf>,
    pub family: Option<FamilyArg>,
    pub n: Option<usize>,
    pub s: Option<String>,
    pub s_mode: Option<SMode>,
    pub x: Option<String>,
    pub phi: Option<String>,
    pub mu: Option<String>,
    pub measure: Option<MeasureArg>,
    pub a: Option<String>,
    pub parity: Option<ParityArg>,
    #[serde(rename = "N")]
    pub n_max: Option<usize>,
    pub k_max: Option<usize>,
    pub list: Option<bool>,
    pub a_from: Option<String>,
    pub a_to: Option<String>,
    pub steps: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Eval,
    Gram,
    Verify,
    Sweep,
}

/// Everything a command needs, after merging flags, environment, config
/// file and defaults. Decimals stay strings until the command parses them at
/// the working precision.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub q: String,
    pub s: Option<String>,
    pub s_mode: SMode,
    pub a: Option<String>,
    pub n_max: usize,
    pub k_max: usize,
    pub bits: u32,
    pub tol_exp: u32,
    pub output: OutputFormat,
    pub out_path: Option<PathBuf>,
    pub family: Option<FamilyArg>,
    pub n: Option<usize>,
    pub x: Option<String>,
    pub phi: Option<String>,
    pub mu: Option<String>,
    pub measure: MeasureArg,
    pub parity: ParityArg,
    pub list: bool,
    pub a_from: String,
    pub a_to: String,
    pub steps: usize,
}

impl RunConfig {
    pub fn resolve(cli: Cli) -> Result<Self, CliError> {
        let file = match &cli.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let mut cfg = RunConfig {
            command: CommandKind::Eval,
            q: cli.q.or(file.q).unwrap_or_else(|| DEFAULT_Q.to_string()),
            s: file.s,
            s_mode: file.s_mode.unwrap_or(SMode::Value),
            a: file.a,
            n_max: file.n_max.unwrap_or(DEFAULT_N),
            k_max: file.k_max.unwrap_or(DEFAULT_K_MAX),
            bits: cli.bits.or(file.bits).unwrap_or(DEFAULT_BITS),
            tol_exp: cli.tol_exp.or(file.tol_exp).unwrap_or(DEFAULT_TOL_EXP),
            output: cli.output.or(file.output).unwrap_or(OutputFormat::Pretty),
            out_path: cli.out.or(file.out),
            family: file.family,
            n: file.n,
            x: file.x,
            phi: file.phi,
            mu: file.mu,
            measure: file.measure.unwrap_or(MeasureArg::HermiteExtremal),
            parity: file.parity.unwrap_or(ParityArg::Even),
            list: file.list.unwrap_or(false),
            a_from: file.a_from.unwrap_or_else(|| "q".to_string()),
            a_to: file.a_to.unwrap_or_else(|| "0.95".to_string()),
            steps: file.steps.unwrap_or(10),
        };
        let take_s = |s: SArgs, cfg: &mut RunConfig| {
            if s.s.is_some() {
                cfg.s = s.s;
            }
            if let Some(mode) = s.s_mode {
                cfg.s_mode = mode;
            }
        };
        match cli.command {
            Command::Eval(args) => {
                cfg.command = CommandKind::Eval;
                cfg.family = args.family.or(cfg.family);
                cfg.n = args.n.or(cfg.n);
                take_s(args.s, &mut cfg);
                // An argument given on the command line replaces all arguments
                // from the config file.
                if args.x.is_some() || args.phi.is_some() || args.mu.is_some() {
                    cfg.x = args.x;
                    cfg.phi = args.phi;
                    cfg.mu = args.mu;
                }
            }
            Command::Gram(args) => {
                cfg.command = CommandKind::Gram;
                cfg.measure = args.measure.unwrap_or(cfg.measure);
                cfg.family = args.family.or(cfg.family);
                take_s(args.s, &mut cfg);
                cfg.a = args.a.or(cfg.a);
                cfg.parity = args.parity.unwrap_or(cfg.parity);
                cfg.n_max = args.n_max.unwrap_or(cfg.n_max);
            }
            Command::Verify(args) => {
                cfg.command = CommandKind::Verify;
                cfg.list |= args.list;
                cfg.k_max = args.k_max.unwrap_or(cfg.k_max);
                cfg.n_max = args.n_max.unwrap_or(cfg.n_max);
            }
            Command::Sweep(args) => {
                cfg.command = CommandKind::Sweep;
                cfg.a_from = args.a_from.unwrap_or(cfg.a_from);
                cfg.a_to = args.a_to.unwrap_or(cfg.a_to);
                cfg.steps = args.steps.unwrap_or(cfg.steps);
                cfg.n_max = args.n_max.unwrap_or(cfg.n_max);
            }
        }
        Ok(cfg)
    }
}
