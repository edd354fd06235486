//! `battdmd sweep`: RSS over a grid of embedding dimensions.

use battdmd::{
    sweep_input_embedding, sweep_output_embedding, FitOptions, ModelKind, Schedule, SplitSpec,
    SweepResult, TimeSeries,
};
use serde::Serialize;

use super::{file_label, load_series, REPORT_FORMAT_VERSION};
use crate::args::{SweepArgs, SweepParam};
use crate::config::RunConfig;
use crate::output::{file_sha256, fmt_f64, Artifacts};
use crate::CliError;

pub const SWEEP_JSON: &str = "sweep.json";
pub const CURVE_JSON: &str = "sweep_curve.json";

/// `ell` grid of the second stage when none is given.
pub const DEFAULT_ELL_GRID: std::ops::RangeInclusive<usize> = 1..=12;

#[derive(Debug, Serialize)]
pub struct Stage {
    /// `m` or `ell`.
    pub param: &'static str,
    pub kind: ModelKind,
    /// Embedding values held fixed during the stage.
    pub m: Option<usize>,
    pub ell: Option<usize>,
    pub tau: usize,
    pub result: SweepResult,
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub format_version: u32,
    pub input: String,
    pub input_sha256: String,
    pub train_fraction: f64,
    pub options: FitOptions,
    pub stages: Vec<Stage>,
}

#[derive(Debug, Serialize)]
pub struct CurveSeries {
    pub name: String,
    pub x_label: &'static str,
    pub points: Vec<[f64; 2]>,
    pub best: [f64; 2],
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub format_version: u32,
    pub y_label: &'static str,
    pub series: Vec<CurveSeries>,
}

fn csv(result: &SweepResult) -> Vec<u8> {
    let mut out = String::from("param,rss,nrss\n");
    for row in &result.grid {
        let nrss = row.nrss.map(fmt_f64).unwrap_or_default();
        out.push_str(&format!("{},{},{nrss}\n", row.param, fmt_f64(row.rss)));
    }
    out.into_bytes()
}

fn curve(stage: &Stage) -> CurveSeries {
    let best = stage.result.best_row();
    CurveSeries {
        name: format!("{} {}", stage.kind, stage.param),
        x_label: stage.param,
        points: stage
            .result
            .grid
            .iter()
            .map(|r| [r.param as f64, r.rss])
            .collect(),
        best: [best.param as f64, best.rss],
    }
}

struct Plan<'a> {
    series: &'a TimeSeries,
    tau: usize,
    split: SplitSpec,
    opts: FitOptions,
    schedule: Schedule,
}

impl Plan<'_> {
    fn over_m(&self, grid: &[usize], kind: ModelKind, ell: usize) -> Result<Stage, CliError> {
        let result = sweep_output_embedding::<f64>(
            self.series,
            grid,
            ell,
            self.tau,
            kind,
            self.split,
            &self.opts,
            self.schedule,
        )?;
        Ok(Stage {
            param: "m",
            kind,
            m: None,
            ell: (kind == ModelKind::Dmdc).then_some(ell),
            tau: self.tau,
            result,
        })
    }

    fn over_ell(&self, m: usize, grid: &[usize]) -> Result<Stage, CliError> {
        let result = sweep_input_embedding::<f64>(
            self.series,
            m,
            grid,
            self.tau,
            self.split,
            &self.opts,
            self.schedule,
        )?;
        Ok(Stage {
            param: "ell",
            kind: ModelKind::Dmdc,
            m: Some(m),
            ell: None,
            tau: self.tau,
            result,
        })
    }
}

fn nonempty(grid: Option<Vec<usize>>, flag: &str) -> Result<Vec<usize>, CliError> {
    match grid {
        Some(g) if !g.is_empty() => Ok(g),
        _ => Err(CliError::Usage(format!(
            "{flag} is required and must be non-empty"
        ))),
    }
}

pub fn run(args: SweepArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::resolve(&args.shared)?;
    if args.input.is_some() {
        cfg.input = args.input;
    }
    if args.param.is_some() {
        cfg.sweep.param = args.param;
    }
    if args.grid.is_some() {
        cfg.sweep.grid = args.grid;
    }
    if args.ell_grid.is_some() {
        cfg.sweep.ell_grid = args.ell_grid;
    }
    cfg.sweep.serial |= args.serial;

    let param = cfg.sweep.param.unwrap_or(SweepParam::M);
    let split = cfg.split()?;
    let opts = cfg.fit_options()?;
    let input = cfg.require_input()?.to_path_buf();
    let tau = cfg.tau();
    if tau == 0 {
        return Err(CliError::Usage("--tau must be >= 1".into()));
    }
    let schedule = if cfg.sweep.serial {
        Schedule::Serial
    } else {
        Schedule::Parallel
    };
    let grid = nonempty(cfg.sweep.grid.clone(), "--grid")?;

    let series = load_series(&input, &cfg.columns())?;
    let plan = Plan {
        series: &series,
        tau,
        split,
        opts,
        schedule,
    };
    let mut out = Artifacts::new(cfg.out_dir());
    let stages = match param {
        SweepParam::M => {
            let kind = cfg.require_kind()?;
            let ell = cfg.require_ell(kind)?;
            let stage = plan.over_m(&grid, kind, ell)?;
            out.add("sweep.csv", csv(&stage.result));
            vec![stage]
        }
        SweepParam::Ell => {
            if cfg.kind == Some(ModelKind::Dmd) {
                return Err(CliError::Usage("an ell sweep needs --kind dmdc".into()));
            }
            let m = cfg
                .m
                .ok_or_else(|| CliError::Usage("--m is required for an ell sweep".into()))?;
            let stage = plan.over_ell(m, &grid)?;
            out.add("sweep.csv", csv(&stage.result));
            vec![stage]
        }
        SweepParam::TwoStage => {
            if cfg.kind == Some(ModelKind::Dmd) {
                return Err(CliError::Usage(
                    "a two-stage sweep needs --kind dmdc".into(),
                ));
            }
            let ell_grid = cfg
                .sweep
                .ell_grid
                .clone()
                .unwrap_or_else(|| DEFAULT_ELL_GRID.collect());
            let ell_grid = nonempty(Some(ell_grid), "--ell-grid")?;
            let first = plan.over_m(&grid, ModelKind::Dmdc, 1)?;
            let second = plan.over_ell(first.result.best, &ell_grid)?;
            out.add("sweep_m.csv", csv(&first.result));
            out.add("sweep_ell.csv", csv(&second.result));
            vec![first, second]
        }
    };

    let curve = Curve {
        format_version: REPORT_FORMAT_VERSION,
        y_label: "rss",
        series: stages.iter().map(curve).collect(),
    };
    let report = SweepReport {
        format_version: REPORT_FORMAT_VERSION,
        input: file_label(&input),
        input_sha256: file_sha256(&input)?,
        train_fraction: split.train_fraction(),
        options: opts,
        stages,
    };
    out.add_json(SWEEP_JSON, &report)?;
    out.add_json(CURVE_JSON, &curve)?;
    out.commit()?;
    Ok(())
}
