//! `battdmd transfer`: saved models applied unchanged to aged records.

use std::path::Path;

use anyhow::Context;
use battdmd::{open_loop, ModelKind, RssReport};
use serde::Serialize;

use super::simulate::check_compatible;
use super::{file_label, load_series, REPORT_FORMAT_VERSION};
use crate::args::TransferArgs;
use crate::config::RunConfig;
use crate::modelfile::ModelFile;
use crate::output::{file_sha256, fmt_f64, Artifacts};
use crate::CliError;

pub const TABLE_FILE: &str = "transfer.csv";
pub const REPORT_FILE: &str = "transfer.json";

/// Cycle count from the digits after `cycle` in a file name, e.g.
/// `hppc_cycle_0080.csv` gives 80. A `healthy` record is cycle 0.
pub fn cycle_from_name(path: &Path) -> Option<u32> {
    let stem = path.file_stem()?.to_string_lossy().to_ascii_lowercase();
    let Some(at) = stem.rfind("cycle") else {
        return stem.contains("healthy").then_some(0);
    };
    let digits: String = stem[at + "cycle".len()..]
        .trim_start_matches(['_', '-'])
        .chars()
        .take_while(char::is_ascii_digit)
        .collect();
    digits.parse().ok()
}

#[derive(Debug, Serialize)]
pub struct TransferRow {
    pub cycle: u32,
    pub file: String,
    pub input_sha256: String,
    pub kind: ModelKind,
    pub model_digest: String,
    pub report: RssReport,
}

#[derive(Debug, Serialize)]
pub struct TransferReport {
    pub format_version: u32,
    pub rows: Vec<TransferRow>,
}

pub fn run(args: TransferArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::resolve(&args.shared)?;
    if !args.models.is_empty() {
        cfg.models = args.models;
    }
    if !args.aged.is_empty() {
        cfg.aged = args.aged;
    }
    if cfg.models.is_empty() {
        return Err(CliError::Usage("at least one --model is required".into()));
    }
    if cfg.aged.is_empty() {
        return Err(CliError::Usage(
            "at least one --aged record is required".into(),
        ));
    }

    let mut models = Vec::with_capacity(cfg.models.len());
    for path in &cfg.models {
        let file = ModelFile::load(path)?;
        if models
            .iter()
            .any(|(f, _): &(ModelFile, _)| f.model.kind == file.model.kind)
        {
            return Err(CliError::Usage(format!(
                "more than one {} model given; pass one model per kind",
                file.model.kind
            )));
        }
        let model = file.model.to_model()?;
        models.push((file, model));
    }
    models.sort_by_key(|(f, _)| f.model.kind as u8);

    let mut records = Vec::with_capacity(cfg.aged.len());
    for (k, path) in cfg.aged.iter().enumerate() {
        let cycle = cycle_from_name(path).unwrap_or(k as u32);
        records.push((cycle, path.clone()));
    }
    records.sort_by_key(|&(c, _)| c);

    let columns = cfg.columns();
    let mut rows = Vec::new();
    for (cycle, path) in &records {
        let label = file_label(path);
        let series = load_series(path, &columns)?;
        let digest = file_sha256(path)?;
        for (file, model) in &models {
            check_compatible(file, &cfg, &series, &label)?;
            let forecast = open_loop(model, &series)
                .with_context(|| format!("{} model on {label}", file.model.kind))?;
            rows.push(TransferRow {
                cycle: *cycle,
                file: label.clone(),
                input_sha256: digest.clone(),
                kind: file.model.kind,
                model_digest: file.digest.clone(),
                report: forecast.report(&series, 0)?,
            });
        }
    }

    let mut table = String::from("cycle,kind,rss,nrss\n");
    for r in &rows {
        let nrss = r.report.nrss.map(fmt_f64).unwrap_or_default();
        table.push_str(&format!(
            "{},{},{},{nrss}\n",
            r.cycle,
            r.kind,
            fmt_f64(r.report.rss)
        ));
    }
    let mut out = Artifacts::new(cfg.out_dir());
    out.add(TABLE_FILE, table.into_bytes());
    out.add_json(
        REPORT_FILE,
        &TransferReport {
            format_version: REPORT_FORMAT_VERSION,
            rows,
        },
    )?;
    out.commit()?;
    Ok(())
}
