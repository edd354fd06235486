//! `battdmd fit`: identify a model on the training split.

use std::time::Instant;

use battdmd::{fit_model, open_loop, split, EmbeddingSpec, FitOptions, ModelKind, RssReport};
use log::warn;
use serde::Serialize;

use super::{file_label, load_series, REPORT_FORMAT_VERSION};
use crate::args::FitArgs;
use crate::config::{FitSettings, RunConfig};
use crate::modelfile::{ModelBody, ModelFile, ModelVariant, Provenance, Ranks};
use crate::output::{json_bytes, sha256_hex, Artifacts};
use crate::CliError;

pub const MODEL_FILE: &str = "model.json";
pub const REPORT_FILE: &str = "fit_report.json";

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub format_version: u32,
    pub input: String,
    pub kind: ModelKind,
    pub variant: ModelVariant,
    pub embedding: EmbeddingSpec,
    pub options: FitOptions,
    pub train_fraction: f64,
    pub ranks: Ranks,
    pub fit_residual: f64,
    pub spectral_radius: f64,
    pub samples: usize,
    pub train_samples: usize,
    pub snapshots: usize,
    pub model_digest: String,
    /// Open-loop forecast over the whole record.
    pub open_loop: Option<RssReport>,
    /// The same forecast scored from the first held-out sample.
    pub heldout: Option<RssReport>,
    pub eval_from: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forecast_error: Option<String>,
}

pub fn run(args: FitArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::resolve(&args.shared)?;
    if args.input.is_some() {
        cfg.input = args.input;
    }
    let kind = cfg.require_kind()?;
    let spec = cfg.embedding(kind)?;
    let split_spec = cfg.split()?;
    let opts = cfg.fit_options()?;
    let columns = cfg.columns();
    let input = cfg.require_input()?.to_path_buf();

    let settings = FitSettings {
        kind,
        embedding: spec,
        train_fraction: split_spec.train_fraction(),
        options: opts,
        columns: columns.clone(),
    };
    let raw =
        std::fs::read(&input).map_err(|e| anyhow::anyhow!("reading {}: {e}", input.display()))?;
    let series = load_series(&input, &columns)?;

    let started = Instant::now();
    let (train, eval) = split(&series, split_spec)?;
    let model = fit_model::<f64>(&train, spec, kind, &opts)?;
    let fit_seconds = started.elapsed().as_secs_f64();

    let body = ModelBody::new(
        &model,
        train.len(),
        series.dt(),
        Provenance {
            input_sha256: sha256_hex(&raw),
            config_sha256: sha256_hex(&serde_json::to_vec(&settings)?),
        },
    );
    let file = ModelFile::new(body)?;

    let eval_from = if eval.is_empty() { 0 } else { train.len() };
    let (open, heldout, forecast_error) = match open_loop(&model, &series) {
        Ok(f) => (
            Some(f.report(&series, 0)?),
            Some(f.report(&series, eval_from)?),
            None,
        ),
        Err(e) => {
            warn!("open-loop forecast failed: {e}");
            (None, None, Some(e.to_string()))
        }
    };
    let total_seconds = started.elapsed().as_secs_f64();

    let report = FitReport {
        format_version: REPORT_FORMAT_VERSION,
        input: file_label(&input),
        kind,
        variant: file.model.variant,
        embedding: spec,
        options: opts,
        train_fraction: split_spec.train_fraction(),
        ranks: file.model.ranks.clone(),
        fit_residual: file.model.diagnostics.fit_residual,
        spectral_radius: file.model.diagnostics.spectral_radius,
        samples: series.len(),
        train_samples: train.len(),
        snapshots: file.model.diagnostics.snapshots,
        model_digest: file.digest.clone(),
        open_loop: open,
        heldout,
        eval_from,
        forecast_error,
    };

    let mut out = Artifacts::new(cfg.out_dir());
    out.add(MODEL_FILE, json_bytes(&file)?);
    out.add(REPORT_FILE, json_bytes(&report)?);
    out.commit()?;
    eprintln!("fit {fit_seconds:.3} s, fit and forecast {total_seconds:.3} s");
    Ok(())
}
