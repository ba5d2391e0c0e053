use std::path::{Path, PathBuf};

use adaptta::ExecutionMode;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::error::CliError;

/// Adaptive test-time augmentation benchmarks.
#[derive(Debug, Parser)]
#[command(name = "adaptta", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one configuration and print its report
    Run(Options),
    /// Evaluate the adaptive executor at several thresholds
    Sweep(Options),
    /// Evaluate batch, sequential and adaptive execution side by side
    Compare(Options),
    /// Record toy-classifier probabilities for every view of a PPM manifest
    GenTrace(Options),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Seq,
    Batch,
    Adaptive,
}

impl From<ModeArg> for ExecutionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Seq => ExecutionMode::Sequential,
            ModeArg::Batch => ExecutionMode::Batch,
            ModeArg::Adaptive => ExecutionMode::Adaptive,
        }
    }
}

/// Flags shared by every subcommand. Each may also come from `--config`;
/// a flag given on the command line wins.
#[derive(Debug, Default, Clone, Args)]
pub struct Options {
    /// TOML file with default values for any of these options
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Recorded trace (JSONL) to replay instead of running a classifier
    #[arg(long, value_name = "PATH", conflicts_with = "toy_seed")]
    pub trace: Option<PathBuf>,

    /// Seed of the built-in toy classifier
    #[arg(long, value_name = "INT")]
    pub toy_seed: Option<u64>,

    /// Number of classes of the toy classifier
    #[arg(long, value_name = "INT")]
    pub classes: Option<usize>,

    /// Samples as `sample_id<TAB>path<TAB>label` lines. With --trace, only
    /// the listed sample ids are evaluated.
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,

    /// Augmentation policy
    #[arg(long, value_name = "5C|10C")]
    pub policy: Option<String>,

    /// Early-exit threshold in [0, 1]
    #[arg(long, value_name = "FLOAT")]
    pub tau: Option<f64>,

    /// Thresholds for `sweep`, comma separated
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,

    /// Execution mode for `run`
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,

    /// `wall`, `sim`, or `sim:per-inference=MS,crop=MS,flip=MS,batchN=MS`
    #[arg(long, value_name = "SPEC")]
    pub latency: Option<String>,

    /// Write output here instead of stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Report format
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    trace: Option<PathBuf>,
    toy_seed: Option<u64>,
    classes: Option<usize>,
    manifest: Option<PathBuf>,
    policy: Option<String>,
    tau: Option<f64>,
    taus: Option<Vec<f64>>,
    mode: Option<ModeArg>,
    latency: Option<String>,
    out: Option<PathBuf>,
    format: Option<Format>,
}

/// Where the class probabilities come from.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    Trace(PathBuf),
    Toy { seed: u64, classes: usize },
}

pub const DEFAULT_TAU: f64 = 0.8;
pub const DEFAULT_LATENCY: &str = "sim";

/// Options after merging the config file and validating.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub backend: BackendSpec,
    pub manifest: Option<PathBuf>,
    pub policy: Option<String>,
    pub tau: f64,
    pub taus: Option<Vec<f64>>,
    pub mode: ExecutionMode,
    pub latency: String,
    pub out: Option<PathBuf>,
    pub format: Format,
}

fn load_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: FileConfig = toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
    // Relative paths in the file are relative to the file.
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let rebase = |p: Option<PathBuf>| p.map(|p| if p.is_relative() { base.join(p) } else { p });
    Ok(FileConfig {
        trace: rebase(cfg.trace),
        manifest: rebase(cfg.manifest),
        out: rebase(cfg.out),
        ..cfg
    })
}

fn check_tau(tau: f64) -> Result<f64, CliError> {
    if (0.0..=1.0).contains(&tau) {
        Ok(tau)
    } else {
        Err(CliError::Usage(format!(
            "tau must lie in [0, 1], got {tau}"
        )))
    }
}

impl Options {
    pub fn resolve(self) -> Result<Resolved, CliError> {
        let file = match &self.config {
            Some(path) => load_config(path)?,
            None => FileConfig::default(),
        };
        // A backend named on the command line replaces the file's backend
        // entirely rather than mixing with it.
        let (trace, toy_seed, classes) = if self.trace.is_some() || self.toy_seed.is_some() {
            (self.trace, self.toy_seed, self.classes)
        } else {
            (file.trace, file.toy_seed, self.classes.or(file.classes))
        };
        let backend = match (trace, toy_seed, classes) {
            (Some(path), None, _) => BackendSpec::Trace(path),
            (None, Some(seed), Some(classes)) => BackendSpec::Toy { seed, classes },
            (None, Some(_), None) => {
                return Err(CliError::Usage("--toy-seed needs --classes".into()))
            }
            (Some(_), Some(_), _) => {
                return Err(CliError::Usage(
                    "give either --trace or --toy-seed, not both".into(),
                ))
            }
            (None, None, _) => {
                return Err(CliError::Usage(
                    "a backend is required: --trace PATH or --toy-seed INT --classes INT".into(),
                ))
            }
        };
        let tau = check_tau(self.tau.or(file.tau).unwrap_or(DEFAULT_TAU))?;
        let taus = match self.taus.or(file.taus) {
            Some(list) => Some(
                list.into_iter()
                    .map(check_tau)
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            None => None,
        };
        Ok(Resolved {
            backend,
            manifest: self.manifest.or(file.manifest),
            policy: self.policy.or(file.policy),
            tau,
            taus,
            mode: self.mode.or(file.mode).unwrap_or(ModeArg::Adaptive).into(),
            latency: self
                .latency
                .or(file.latency)
                .unwrap_or_else(|| DEFAULT_LATENCY.to_string()),
            out: self.out.or(file.out),
            format: self.format.or(file.format).unwrap_or(Format::Json),
        })
    }
}
