//! `battdmd simulate`: open-loop rollout of a saved model.

use std::fmt::Write as _;

use anyhow::ensure;
use battdmd::timeseries::format_sig;
use battdmd::{open_loop, EmbeddingSpec, ModelKind, RssReport, TimeSeries};
use serde::Serialize;

use super::{file_label, load_series, REPORT_FORMAT_VERSION};
use crate::args::SimulateArgs;
use crate::config::RunConfig;
use crate::modelfile::{ModelFile, ModelVariant};
use crate::output::{file_sha256, Artifacts};
use crate::CliError;

pub const FORECAST_FILE: &str = "forecast.csv";
pub const REPORT_FILE: &str = "simulate_report.json";

/// Significant digits of the predicted voltage column.
const FORECAST_DIGITS: usize = 12;

#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub format_version: u32,
    pub input: String,
    pub input_sha256: String,
    pub model_digest: String,
    pub kind: ModelKind,
    pub variant: ModelVariant,
    pub embedding: EmbeddingSpec,
    pub first_index: usize,
    pub report: RssReport,
}

/// Rejects settings that contradict what the model was fitted with.
pub(crate) fn check_compatible(
    file: &ModelFile,
    cfg: &RunConfig,
    series: &TimeSeries,
    label: &str,
) -> anyhow::Result<()> {
    let body = &file.model;
    let spec = body.embedding;
    let expect = |what: &str, want: Option<usize>, have: usize| -> anyhow::Result<()> {
        if let Some(w) = want {
            ensure!(
                w == have,
                "embedding spec mismatch: {what}={w} requested but the model uses {what}={have}"
            );
        }
        Ok(())
    };
    expect("m", cfg.m, spec.m)?;
    expect("tau", cfg.tau, spec.tau)?;
    if body.kind == ModelKind::Dmdc {
        expect("ell", cfg.ell, spec.ell)?;
    }
    if let Some(k) = cfg.kind {
        ensure!(
            k == body.kind,
            "model is {} but --kind {k} was requested",
            body.kind
        );
    }
    let (model_dt, data_dt) = (body.diagnostics.dt_s, series.dt());
    ensure!(
        (model_dt - data_dt).abs() <= 1e-9 * model_dt.abs(),
        "embedding spec mismatch: model was fitted at {model_dt} s sampling but {label} is sampled at {data_dt} s"
    );
    Ok(())
}

pub fn run(args: SimulateArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::resolve(&args.shared)?;
    if args.input.is_some() {
        cfg.input = args.input;
    }
    if let Some(m) = args.model {
        cfg.models = vec![m];
    }
    let model_path = match cfg.models.as_slice() {
        [one] => one.clone(),
        [] => return Err(CliError::Usage("--model is required".into())),
        _ => return Err(CliError::Usage("simulate takes exactly one model".into())),
    };
    let input = cfg.require_input()?.to_path_buf();

    let file = ModelFile::load(&model_path)?;
    let model = file.model.to_model()?;
    let series = load_series(&input, &cfg.columns())?;
    let label = file_label(&input);
    check_compatible(&file, &cfg, &series, &label)?;

    let forecast =
        open_loop(&model, &series).map_err(|e| anyhow::anyhow!("simulating {label}: {e}"))?;
    let report = forecast.report(&series, 0)?;

    let mut csv = String::from("time_s,current_a,measured_v,predicted_v\n");
    for (k, p) in forecast.voltage.iter().enumerate() {
        let idx = forecast.first_index + k;
        writeln!(
            csv,
            "{},{},{},{}",
            format_sig(series.time()[idx], FORECAST_DIGITS),
            format_sig(series.current()[idx], FORECAST_DIGITS),
            format_sig(series.voltage()[idx], FORECAST_DIGITS),
            format_sig(*p, FORECAST_DIGITS)
        )
        .expect("writing to a String");
    }

    let summary = SimulateReport {
        format_version: REPORT_FORMAT_VERSION,
        input: label,
        input_sha256: file_sha256(&input)?,
        model_digest: file.digest.clone(),
        kind: file.model.kind,
        variant: file.model.variant,
        embedding: file.model.embedding,
        first_index: forecast.first_index,
        report,
    };
    let mut out = Artifacts::new(cfg.out_dir());
    out.add(FORECAST_FILE, csv.into_bytes());
    out.add_json(REPORT_FILE, &summary)?;
    out.commit()?;
    Ok(())
}
