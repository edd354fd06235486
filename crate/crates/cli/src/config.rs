//! JSON run configuration merged with command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use battdmd::{
    CellSpec, ColumnMap, DmdcVariant, EmbeddingSpec, FitOptions, ModelKind, RankPolicy, SplitSpec,
};
use serde::{Deserialize, Serialize};

use crate::args::{Shared, SweepParam};
use crate::CliError;

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.6;
pub const DEFAULT_REPETITIONS: usize = 10;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub param: Option<SweepParam>,
    pub grid: Option<Vec<usize>>,
    pub ell_grid: Option<Vec<usize>>,
    pub serial: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub repetitions: Option<usize>,
    pub cycles: Option<Vec<u32>>,
    pub dt: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub initial_soc: Option<f64>,
    pub cell: Option<CellSpec>,
    pub capacity_fade_per_cycle: Option<f64>,
    pub resistance_growth_per_cycle: Option<f64>,
}

/// Everything a command may read. Paths in a config file are relative to
/// the file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub models: Vec<PathBuf>,
    pub aged: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub kind: Option<ModelKind>,
    pub m: Option<usize>,
    pub ell: Option<usize>,
    pub tau: Option<usize>,
    pub train_fraction: Option<f64>,
    pub rank_policy: Option<RankPolicy>,
    pub output_rank_policy: Option<RankPolicy>,
    pub variant: Option<DmdcVariant>,
    pub columns: Option<ColumnMap>,
    pub sweep: SweepConfig,
    pub synth: SynthConfig,
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        for p in cfg
            .input
            .iter_mut()
            .chain(cfg.out.iter_mut())
            .chain(cfg.models.iter_mut())
            .chain(cfg.aged.iter_mut())
        {
            rebase(&base, p);
        }
        Ok(cfg)
    }

    /// Loads `--config` when given and lets every flag override it.
    pub fn resolve(shared: &Shared) -> Result<Self, CliError> {
        let mut cfg = match &shared.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = shared.$field.clone() {
                    cfg.$field = Some(v.into());
                }
            };
        }
        take!(out);
        take!(seed);
        take!(kind);
        take!(m);
        take!(ell);
        take!(tau);
        take!(train_fraction);
        take!(rank_policy);
        take!(output_rank_policy);
        take!(variant);
        Ok(cfg)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn columns(&self) -> ColumnMap {
        self.columns.clone().unwrap_or_default()
    }

    pub fn require_kind(&self) -> Result<ModelKind, CliError> {
        self.kind
            .ok_or_else(|| CliError::Usage("--kind is required (dmd or dmdc)".into()))
    }

    pub fn require_input(&self) -> Result<&Path, CliError> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::Usage("--input is required".into()))
    }

    pub fn tau(&self) -> usize {
        self.tau.unwrap_or(1)
    }

    /// `ell` for a DMDc fit, which has no default.
    pub fn require_ell(&self, kind: ModelKind) -> Result<usize, CliError> {
        match kind {
            ModelKind::Dmd => Ok(1),
            ModelKind::Dmdc => self
                .ell
                .ok_or_else(|| CliError::Usage("--ell is required with --kind dmdc".into())),
        }
    }

    pub fn embedding(&self, kind: ModelKind) -> Result<EmbeddingSpec, CliError> {
        let m = self
            .m
            .ok_or_else(|| CliError::Usage("--m is required".into()))?;
        let ell = self.require_ell(kind)?;
        EmbeddingSpec::new(m, ell, self.tau()).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn split(&self) -> Result<SplitSpec, CliError> {
        SplitSpec::new(self.train_fraction.unwrap_or(DEFAULT_TRAIN_FRACTION))
            .map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn fit_options(&self) -> Result<FitOptions, CliError> {
        let defaults = FitOptions::default();
        let opts = FitOptions {
            policy: self.rank_policy.unwrap_or(defaults.policy),
            output_policy: self.output_rank_policy.unwrap_or(defaults.output_policy),
            variant: self.variant.unwrap_or(defaults.variant),
        };
        for p in [opts.policy, opts.output_policy] {
            p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        }
        Ok(opts)
    }
}

/// The settings that determine a fitted model, hashed into its provenance.
#[derive(Debug, Serialize)]
pub struct FitSettings {
    pub kind: ModelKind,
    pub embedding: EmbeddingSpec,
    pub train_fraction: f64,
    pub options: FitOptions,
    pub columns: ColumnMap,
}
