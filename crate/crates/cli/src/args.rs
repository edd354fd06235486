//! Command-line flags.

use std::path::PathBuf;

use battdmd::{DmdcVariant, ModelKind, RankPolicy};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "battdmd",
    version,
    about = "DMD / DMDc identification of battery voltage dynamics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic HPPC records for a healthy cell and aged cycles.
    Synth(SynthArgs),
    /// Fit a DMD or DMDc model on the training split of a record.
    Fit(FitArgs),
    /// Roll a saved model open-loop over a record and score it.
    Simulate(SimulateArgs),
    /// Sweep the output or input embedding dimension.
    Sweep(SweepArgs),
    /// Apply saved models, unchanged, to aged records.
    Transfer(TransferArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Dmd,
    Dmdc,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Dmd => ModelKind::Dmd,
            KindArg::Dmdc => ModelKind::Dmdc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Full,
    Reduced,
    Auto,
}

impl From<VariantArg> for DmdcVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Full => DmdcVariant::Full,
            VariantArg::Reduced => DmdcVariant::Reduced,
            VariantArg::Auto => DmdcVariant::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    /// Output embedding dimension.
    M,
    /// Input embedding dimension (DMDc).
    Ell,
    /// `m` first, then `ell` at the best `m`.
    TwoStage,
}

/// Flags shared by every command. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Shared {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Output embedding dimension.
    #[arg(long)]
    pub m: Option<usize>,
    /// Input embedding dimension (DMDc).
    #[arg(long)]
    pub ell: Option<usize>,
    /// Delay stride in samples.
    #[arg(long)]
    pub tau: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// `fixed:R`, `rel:EPS` or `energy:ETA`.
    #[arg(long, value_name = "POLICY")]
    pub rank_policy: Option<RankPolicy>,
    /// Output-basis truncation of the reduced DMDc fit.
    #[arg(long, value_name = "POLICY")]
    pub output_rank_policy: Option<RankPolicy>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// Aged cycle counts, e.g. `20,80,340`.
    #[arg(long, value_delimiter = ',')]
    pub cycles: Option<Vec<u32>>,
    /// SoC blocks per record.
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Sample interval in seconds.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Voltage noise standard deviation in volts.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// Record to fit (CSV).
    #[arg(long, value_name = "CSV")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub shared: Shared,
    #[arg(long, value_name = "JSON")]
    pub model: Option<PathBuf>,
    #[arg(long, value_name = "CSV")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub shared: Shared,
    #[arg(long, value_name = "CSV")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub param: Option<SweepParam>,
    /// Grid for `m` (or for `ell` when sweeping `ell`), e.g. `10,20,40`.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    /// `ell` grid of the second stage of a two-stage sweep.
    #[arg(long, value_delimiter = ',')]
    pub ell_grid: Option<Vec<usize>>,
    /// Evaluate grid points one after another.
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// Saved model; repeat for several models.
    #[arg(long = "model", value_name = "JSON")]
    pub models: Vec<PathBuf>,
    /// Aged record; repeat for several records.
    #[arg(long = "aged", value_name = "CSV")]
    pub aged: Vec<PathBuf>,
}
