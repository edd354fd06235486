//! `battdmd synth`: healthy and aged HPPC records.

use battdmd::timeseries::to_csv_string;
use battdmd::{
    age_cell, hppc_protocol, simulate_cell, AgingSpec, CellSpec, ProtocolScript, SimOptions,
};
use serde::Serialize;

use super::REPORT_FORMAT_VERSION;
use crate::args::SynthArgs;
use crate::config::{RunConfig, DEFAULT_REPETITIONS};
use crate::output::{json_bytes, sha256_hex, Artifacts};
use crate::CliError;

pub const HEALTHY_FILE: &str = "hppc_healthy.csv";

pub fn cycle_file(cycles: u32) -> String {
    format!("hppc_cycle_{cycles:04}.csv")
}

#[derive(Debug, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub cycles: u32,
    pub seed: u64,
    pub samples: usize,
    pub duration_s: f64,
    pub sha256: String,
    pub cell: CellSpec,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    pub repetitions: usize,
    pub dt_s: f64,
    pub initial_soc: f64,
    pub noise_sigma: f64,
    pub aging: AgingSpec,
    pub healthy: ManifestEntry,
    pub aged: Vec<ManifestEntry>,
    pub protocol: ProtocolScript,
}

pub fn run(args: SynthArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::resolve(&args.shared)?;
    let synth = &mut cfg.synth;
    if args.cycles.is_some() {
        synth.cycles = args.cycles;
    }
    if args.repetitions.is_some() {
        synth.repetitions = args.repetitions;
    }
    if args.dt.is_some() {
        synth.dt = args.dt;
    }
    if args.noise_sigma.is_some() {
        synth.noise_sigma = args.noise_sigma;
    }
    let synth = cfg.synth.clone();

    let cell = synth.cell.unwrap_or_default();
    let defaults = AgingSpec::default();
    let rates = AgingSpec {
        cycles: 0,
        capacity_fade_per_cycle: synth
            .capacity_fade_per_cycle
            .unwrap_or(defaults.capacity_fade_per_cycle),
        resistance_growth_per_cycle: synth
            .resistance_growth_per_cycle
            .unwrap_or(defaults.resistance_growth_per_cycle),
    };
    let repetitions = synth.repetitions.unwrap_or(DEFAULT_REPETITIONS);
    let seed = cfg.seed.unwrap_or(0);
    let base = SimOptions {
        dt: synth.dt.unwrap_or(1.0),
        initial_soc: synth.initial_soc.unwrap_or(1.0),
        noise_sigma: synth.noise_sigma.unwrap_or(0.0),
        seed,
    };
    let mut cycles = synth.cycles.unwrap_or_default();
    cycles.sort_unstable();
    cycles.dedup();

    let usage = |e: battdmd::SynthError| CliError::Usage(e.to_string());
    let script = hppc_protocol(&cell, repetitions).map_err(usage)?;
    for &c in &cycles {
        age_cell(&cell, &AgingSpec { cycles: c, ..rates }).map_err(usage)?;
    }

    let mut files = Artifacts::new(cfg.out_dir());
    let mut record = |name: String, cycles: u32| -> Result<ManifestEntry, CliError> {
        let aging = AgingSpec { cycles, ..rates };
        let opts = SimOptions {
            seed: seed.wrapping_add(u64::from(cycles)),
            ..base
        };
        let series = simulate_cell(&cell, &aging, &script, &opts)?;
        let text = to_csv_string(&series)?.into_bytes();
        let entry = ManifestEntry {
            file: name.clone(),
            cycles,
            seed: opts.seed,
            samples: series.len(),
            duration_s: series.time()[series.len() - 1] - series.time()[0],
            sha256: sha256_hex(&text),
            cell: age_cell(&cell, &aging)?,
        };
        files.add(name, text);
        Ok(entry)
    };
    let healthy = record(HEALTHY_FILE.to_string(), 0)?;
    let aged = cycles
        .iter()
        .map(|&c| record(cycle_file(c), c))
        .collect::<Result<Vec<_>, _>>()?;

    let manifest = Manifest {
        format_version: REPORT_FORMAT_VERSION,
        seed,
        repetitions,
        dt_s: base.dt,
        initial_soc: base.initial_soc,
        noise_sigma: base.noise_sigma,
        aging: rates,
        healthy,
        aged,
        protocol: script,
    };
    let bytes = json_bytes(&manifest)?;
    files.add("manifest.json", bytes.clone());
    files.commit()?;
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}
