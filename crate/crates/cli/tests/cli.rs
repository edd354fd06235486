use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use battdmd::{
    fit_model, load_csv, open_loop, split, ColumnMap, EmbeddingSpec, FitOptions, ModelKind,
    SplitSpec,
};
use battdmd_cli::modelfile::ModelFile;
use serde_json::Value;

fn battdmd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_battdmd"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = battdmd(dir, args);
    assert!(
        out.status.success(),
        "battdmd {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Current-free record of `v_k = 1.5 * 0.99^k + 0.8 * 0.95^k + 0.4 * (-0.9)^k`
/// truncated to `order` terms, written at full precision.
fn lti_csv(dir: &Path, name: &str, order: usize, len: usize) -> PathBuf {
    let terms = [(1.5, 0.99), (0.8, 0.95), (0.4, -0.9)];
    let mut text = String::from("time_s,current_a,voltage_v\n");
    for k in 0..len {
        let v: f64 = terms[..order]
            .iter()
            .map(|(c, l): &(f64, f64)| c * l.powi(k as i32))
            .sum();
        text.push_str(&format!("{k},0,{v:?}\n"));
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

/// Small HPPC data set: healthy record plus cycles 20 and 80.
fn hppc(dir: &Path) {
    ok(
        dir,
        &[
            "synth",
            "--out",
            "data",
            "--repetitions",
            "2",
            "--cycles",
            "20,80",
        ],
    );
}

const POLICY: [&str; 2] = ["--rank-policy", "rel:1e-6"];

fn fit_dmdc(dir: &Path, input: &str, out: &str) {
    let mut args = vec![
        "fit", "--input", input, "--kind", "dmdc", "--m", "30", "--ell", "4", "--out", out,
    ];
    args.extend_from_slice(&POLICY);
    ok(dir, &args);
}

#[test]
fn dmd_recovers_second_order_system() {
    let dir = tempfile::tempdir().unwrap();
    lti_csv(dir.path(), "lti.csv", 2, 400);
    ok(
        dir.path(),
        &[
            "fit", "--input", "lti.csv", "--kind", "dmd", "--m", "2", "--out", "fit",
        ],
    );
    let report = json(dir.path().join("fit/fit_report.json"));
    let residual = report["fit_residual"].as_f64().unwrap();
    assert!(residual <= 1e-8, "residual {residual}");
    assert_eq!(report["ranks"]["rank"], 2);
    assert_eq!(report["format_version"], 1);
    assert!(report["open_loop"]["rss"].as_f64().unwrap() < 1e-16);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    lti_csv(dir.path(), "lti.csv", 2, 50);
    let out = battdmd(
        dir.path(),
        &[
            "fit", "--input", "lti.csv", "--kind", "dmdc", "--m", "4", "--out", "fit",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--ell"), "{}", stderr(&out));
    assert!(!dir.path().join("fit").exists());

    for args in [
        &["fit", "--bogus"][..],
        &["fit", "--input", "lti.csv", "--kind", "dmd"][..],
        &[
            "fit",
            "--input",
            "lti.csv",
            "--kind",
            "dmd",
            "--m",
            "4",
            "--rank-policy",
            "fuzzy:2",
        ][..],
        &["sweep", "--input", "lti.csv", "--kind", "dmd"][..],
        &["transfer", "--aged", "lti.csv"][..],
        &["frobnicate"][..],
    ] {
        assert_eq!(battdmd(dir.path(), args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_with_one_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    lti_csv(dir.path(), "lti.csv", 2, 50);
    let out = battdmd(
        dir.path(),
        &[
            "fit",
            "--input",
            "missing.csv",
            "--kind",
            "dmd",
            "--m",
            "2",
            "--out",
            "fit",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("missing.csv"), "{}", stderr(&out));

    let out = battdmd(
        dir.path(),
        &[
            "fit", "--input", "lti.csv", "--kind", "dmd", "--m", "60", "--out", "fit",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("fit").exists());
}

#[test]
fn simulate_reproduces_fit_rss_and_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    hppc(d);
    fit_dmdc(d, "data/hppc_cycle_0020.csv", "fit");
    ok(
        d,
        &[
            "simulate",
            "--model",
            "fit/model.json",
            "--input",
            "data/hppc_cycle_0020.csv",
            "--out",
            "sim",
        ],
    );

    let fit = json(d.join("fit/fit_report.json"));
    let sim = json(d.join("sim/simulate_report.json"));
    assert_eq!(fit["open_loop"], sim["report"]);
    assert_eq!(
        fit["open_loop"]["rss"].as_f64().unwrap().to_bits(),
        sim["report"]["rss"].as_f64().unwrap().to_bits()
    );

    // the saved model forecasts exactly what the in-memory fit does
    let series = load_csv(d.join("data/hppc_cycle_0020.csv"), &ColumnMap::default()).unwrap();
    let (train, _) = split(&series, SplitSpec::default()).unwrap();
    let opts = FitOptions {
        policy: "rel:1e-6".parse().unwrap(),
        ..FitOptions::default()
    };
    let spec = EmbeddingSpec::new(30, 4, 1).unwrap();
    let in_memory = fit_model::<f64>(&train, spec, ModelKind::Dmdc, &opts).unwrap();
    let loaded = ModelFile::load(&d.join("fit/model.json"))
        .unwrap()
        .model
        .to_model()
        .unwrap();
    assert_eq!(loaded, in_memory);
    let a = open_loop(&in_memory, &series).unwrap();
    let b = open_loop(&loaded, &series).unwrap();
    assert!(a
        .voltage
        .iter()
        .zip(&b.voltage)
        .all(|(x, y)| x.to_bits() == y.to_bits()));

    let csv = fs::read_to_string(d.join("sim/forecast.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("time_s,current_a,measured_v,predicted_v")
    );
    assert_eq!(lines.count(), series.len() - 30);
}

#[test]
fn short_records_report_insufficient_history() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    lti_csv(d, "train.csv", 2, 400);
    lti_csv(d, "short.csv", 2, 101);
    lti_csv(d, "enough.csv", 2, 102);
    ok(
        d,
        &[
            "fit",
            "--input",
            "train.csv",
            "--kind",
            "dmd",
            "--m",
            "100",
            "--out",
            "fit",
        ],
    );
    let out = battdmd(
        d,
        &[
            "simulate",
            "--model",
            "fit/model.json",
            "--input",
            "short.csv",
            "--out",
            "sim",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("insufficient history"),
        "{}",
        stderr(&out)
    );
    assert!(!d.join("sim").exists());
    ok(
        d,
        &[
            "simulate",
            "--model",
            "fit/model.json",
            "--input",
            "enough.csv",
            "--out",
            "sim",
        ],
    );

    let out = battdmd(
        d,
        &[
            "transfer",
            "--model",
            "fit/model.json",
            "--aged",
            "short.csv",
            "--out",
            "tr",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("insufficient history"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn simulate_rejects_mismatched_settings_and_tampered_models() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    lti_csv(d, "lti.csv", 2, 200);
    ok(
        d,
        &[
            "fit", "--input", "lti.csv", "--kind", "dmd", "--m", "4", "--out", "fit",
        ],
    );

    let out = battdmd(
        d,
        &[
            "simulate",
            "--model",
            "fit/model.json",
            "--input",
            "lti.csv",
            "--m",
            "5",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("embedding spec mismatch"),
        "{}",
        stderr(&out)
    );

    let text = fs::read_to_string(lti_csv(d, "slow.csv", 2, 200)).unwrap();
    let doubled: String = text
        .lines()
        .enumerate()
        .map(|(k, l)| match k {
            0 => format!("{l}\n"),
            _ => {
                let (t, rest) = l.split_once(',').unwrap();
                format!("{},{rest}\n", 2 * t.parse::<u32>().unwrap())
            }
        })
        .collect();
    fs::write(d.join("slow.csv"), doubled).unwrap();
    let out = battdmd(
        d,
        &[
            "simulate",
            "--model",
            "fit/model.json",
            "--input",
            "slow.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("sampling"), "{}", stderr(&out));

    let model = fs::read_to_string(d.join("fit/model.json")).unwrap();
    let tampered = model.replacen("\"fit_residual\": ", "\"fit_residual\": 1", 1);
    assert_ne!(tampered, model);
    fs::write(d.join("fit/model.json"), tampered).unwrap();
    let out = battdmd(
        d,
        &[
            "simulate",
            "--model",
            "fit/model.json",
            "--input",
            "lti.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("digest mismatch"), "{}", stderr(&out));
}

#[test]
fn sweep_finds_generator_order_and_handles_edge_grids() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    lti_csv(d, "lti.csv", 3, 300);
    ok(
        d,
        &[
            "sweep",
            "--input",
            "lti.csv",
            "--kind",
            "dmd",
            "--grid",
            "5,1,2,3,4,6",
            "--out",
            "sweep",
        ],
    );
    let report = json(d.join("sweep/sweep.json"));
    assert_eq!(report["stages"][0]["result"]["best"], 3);
    let csv = fs::read_to_string(d.join("sweep/sweep.csv")).unwrap();
    assert!(csv.starts_with("param,rss,nrss\n1,"));
    assert_eq!(csv.lines().count(), 7);
    let curve = json(d.join("sweep/sweep_curve.json"));
    assert_eq!(curve["series"][0]["points"].as_array().unwrap().len(), 6);
    assert_eq!(curve["series"][0]["best"][0], 3.0);

    ok(
        d,
        &[
            "sweep", "--input", "lti.csv", "--kind", "dmd", "--grid", "4", "--out", "single",
        ],
    );
    let csv = fs::read_to_string(d.join("single/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);

    let out = battdmd(
        d,
        &[
            "sweep", "--input", "lti.csv", "--kind", "dmd", "--grid", "400,500", "--out", "none",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("400:") && err.contains("500:"), "{err}");
    assert!(!d.join("none").exists());
}

#[test]
fn two_stage_sweep_uses_best_m() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    hppc(d);
    let mut args = vec![
        "sweep",
        "--input",
        "data/hppc_healthy.csv",
        "--param",
        "two-stage",
        "--grid",
        "10,20",
        "--ell-grid",
        "1,2,3",
        "--out",
        "sweep",
    ];
    args.extend_from_slice(&POLICY);
    ok(d, &args);
    let report = json(d.join("sweep/sweep.json"));
    let stages = report["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 2);
    assert_eq!(stages[0]["param"], "m");
    assert_eq!(stages[0]["ell"], 1);
    assert_eq!(stages[1]["param"], "ell");
    assert_eq!(stages[1]["m"], stages[0]["result"]["best"]);
    for name in ["sweep_m.csv", "sweep_ell.csv", "sweep_curve.json"] {
        assert!(d.join("sweep").join(name).exists(), "{name}");
    }
}

#[test]
fn self_transfer_matches_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    hppc(d);
    fit_dmdc(d, "data/hppc_cycle_0020.csv", "fit_c");
    ok(
        d,
        &[
            "fit",
            "--input",
            "data/hppc_cycle_0020.csv",
            "--kind",
            "dmd",
            "--m",
            "30",
            "--out",
            "fit_d",
            "--rank-policy",
            "rel:1e-6",
        ],
    );
    ok(
        d,
        &[
            "simulate",
            "--model",
            "fit_c/model.json",
            "--input",
            "data/hppc_cycle_0020.csv",
            "--out",
            "sim",
        ],
    );
    ok(
        d,
        &[
            "transfer",
            "--model",
            "fit_c/model.json",
            "--model",
            "fit_d/model.json",
            "--aged",
            "data/hppc_cycle_0080.csv",
            "--aged",
            "data/hppc_cycle_0020.csv",
            "--aged",
            "data/hppc_healthy.csv",
            "--out",
            "tr",
        ],
    );
    let table = fs::read_to_string(d.join("tr/transfer.csv")).unwrap();
    let rows: Vec<Vec<&str>> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    let keys: Vec<(&str, &str)> = rows.iter().map(|r| (r[0], r[1])).collect();
    assert_eq!(
        keys,
        [
            ("0", "dmd"),
            ("0", "dmdc"),
            ("20", "dmd"),
            ("20", "dmdc"),
            ("80", "dmd"),
            ("80", "dmdc")
        ]
    );
    let sim = json(d.join("sim/simulate_report.json"));
    let self_rss: f64 = rows[3][2].parse().unwrap();
    assert_eq!(
        self_rss.to_bits(),
        sim["report"]["rss"].as_f64().unwrap().to_bits()
    );
    for pair in rows.chunks(2) {
        let (dmd, dmdc): (f64, f64) = (pair[0][2].parse().unwrap(), pair[1][2].parse().unwrap());
        assert!(dmdc <= dmd, "{pair:?}");
    }

    let out = battdmd(
        d,
        &[
            "transfer",
            "--model",
            "fit_c/model.json",
            "--model",
            "fit_c/model.json",
            "--aged",
            "data/hppc_healthy.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_writes_requested_records() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ok(
        d,
        &[
            "synth",
            "--out",
            "data",
            "--cycles",
            "340,20,80",
            "--seed",
            "3",
        ],
    );
    let manifest: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(manifest, json(d.join("data/manifest.json")));
    assert_eq!(manifest["repetitions"], 10);
    assert_eq!(manifest["protocol"].as_array().unwrap().len(), 2 + 10 * 7);
    assert_eq!(manifest["healthy"]["file"], "hppc_healthy.csv");
    let aged: Vec<&str> = manifest["aged"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["file"].as_str().unwrap())
        .collect();
    assert_eq!(
        aged,
        [
            "hppc_cycle_0020.csv",
            "hppc_cycle_0080.csv",
            "hppc_cycle_0340.csv"
        ]
    );
    let mut names: Vec<String> = fs::read_dir(d.join("data"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "hppc_cycle_0020.csv",
            "hppc_cycle_0080.csv",
            "hppc_cycle_0340.csv",
            "hppc_healthy.csv",
            "manifest.json"
        ]
    );
    let capacity = |e: &Value| e["cell"]["capacity"].as_f64().unwrap();
    assert!(capacity(&manifest["aged"][2]) < capacity(&manifest["aged"][0]));
    assert!(capacity(&manifest["aged"][0]) < capacity(&manifest["healthy"]));
    let healthy = fs::read(d.join("data/hppc_healthy.csv")).unwrap();
    assert_eq!(
        manifest["healthy"]["sha256"].as_str().unwrap(),
        battdmd_cli::output::sha256_hex(&healthy)
    );
}

#[test]
fn config_file_is_merged_with_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::create_dir(d.join("cfg")).unwrap();
    lti_csv(&d.join("cfg"), "lti.csv", 2, 200);
    fs::write(
        d.join("cfg/run.json"),
        r#"{"input": "lti.csv", "kind": "dmd", "m": 6, "out": "results", "train_fraction": 0.5}"#,
    )
    .unwrap();
    ok(d, &["fit", "--config", "cfg/run.json", "--m", "3"]);
    let report = json(d.join("cfg/results/fit_report.json"));
    assert_eq!(report["embedding"]["m"], 3);
    assert_eq!(report["train_samples"], 100);

    fs::write(
        d.join("cfg/bad.json"),
        r#"{"input": "lti.csv", "colour": "red"}"#,
    )
    .unwrap();
    let out = battdmd(
        d,
        &[
            "fit",
            "--config",
            "cfg/bad.json",
            "--kind",
            "dmd",
            "--m",
            "2",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("colour"), "{}", stderr(&out));
}
