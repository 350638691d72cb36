use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use whonet::dataset::{build_recording_windows, ingest_csv, OutageLength, Schema, WindowOptions};
use whonet::eval::evaluate_windows;
use whonet::model::load_model;

fn whonet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_whonet")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = whonet(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, out: &str, seed: &str, duration: &str) {
    ok(
        dir,
        &["--out", out, "--seed", seed, "synth", "--duration", duration, "--rear-bias", "1.05", "--noise", "0.05"],
    );
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn params_table_has_every_count() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["params", "--table"]);
    let rows: Vec<Vec<usize>> =
        text.lines().skip(1).map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[3], vec![72, 8_209, 24_481, 32_617, 3_025]);
    assert_eq!(rows[6], vec![512, 283_649, 849_921, 1_133_057, 21_505]);
}

#[test]
fn params_single_value_defaults_to_forty_inputs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ok(dir.path(), &["params", "--hidden", "72", "--cell", "srnn"]).trim(), "8209");
    assert_eq!(ok(dir.path(), &["params", "--hidden", "72", "--cell", "srnn", "--input-dim", "40"]).trim(), "8209");
    assert_eq!(ok(dir.path(), &["params", "--hidden", "32", "--cell", "srnn", "--input-dim", "41"]).trim(), "2401");
    assert_eq!(whonet(dir.path(), &["params", "--cell", "gru"]).status.code(), Some(2));
}

#[test]
fn exit_codes_separate_usage_data_and_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(whonet(d, &["eval", "--null-model", "--data", "x.csv", "--outage", "45"]).status.code(), Some(2));
    assert_eq!(whonet(d, &["train"]).status.code(), Some(2));
    assert_eq!(whonet(d, &["train", "--data", "missing/*.csv"]).status.code(), Some(3));
    synth(d, "data", "3", "120");
    let diverged = whonet(d, &["--out", "m", "train", "--data", "data/*.csv", "--lr", "1e307", "--epochs", "30"]);
    assert_eq!(diverged.status.code(), Some(4), "{}", String::from_utf8_lossy(&diverged.stderr));
    assert_eq!(whonet(d, &["--config", "nope.toml", "params"]).status.code(), Some(2));
}

#[test]
fn same_seed_reproduces_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for run in ["a", "b"] {
        synth(d, &format!("{run}/data"), "5", "300");
        ok(d, &["--out", &format!("{run}/model"), "train", "--data", &format!("{run}/data/*.csv"), "--epochs", "5"]);
        ok(
            d,
            &[
                "--out",
                &format!("{run}/eval"),
                "eval",
                "--model",
                &format!("{run}/model/model.json"),
                "--data",
                &format!("{run}/data/*.csv"),
                "--outage",
                "30",
            ],
        );
    }
    for f in [
        "data/synthetic.csv",
        "data/synthetic.manifest.json",
        "model/model.json",
        "model/loss.csv",
        "eval/report.csv",
        "eval/report.txt",
        "eval/trajectories_30s.geojson",
    ] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("a/data/synthetic.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);

    synth(d, "c/data", "6", "300");
    assert_ne!(fs::read(d.join("a/data/synthetic.csv")).unwrap(), fs::read(d.join("c/data/synthetic.csv")).unwrap());
}

#[test]
fn null_model_report_matches_physical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "data", "8", "400");
    ok(d, &["--out", "eval", "eval", "--null-model", "--data", "data/*.csv"]);
    let rows = csv_rows(&d.join("eval/report.csv"));
    let find = |scenario: &str, method: &str, metric: &str| {
        rows.iter().find(|r| r[0] == scenario && r[1] == method && r[2] == metric).unwrap()[3..].to_vec()
    };
    // 400 s yields 399 windows: every length up to 180 s has a sequence.
    for s in ["10", "30", "60", "120", "180"] {
        for metric in ["crse", "cte"] {
            assert_eq!(find(s, "physical", metric), find(s, "corrected", metric));
        }
    }
}

#[test]
fn report_numbers_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "train", "10", "400");
    synth(d, "test", "11", "400");
    ok(d, &["--out", "m", "train", "--data", "train/*.csv", "--epochs", "10"]);
    ok(d, &["--out", "e", "eval", "--model", "m/model.json", "--data", "test/*.csv", "--outage", "60"]);

    let model = load_model(d.join("m/model.json")).unwrap();
    let rec = ingest_csv(d.join("test/synthetic.csv"), &Schema::default()).unwrap();
    let windows = build_recording_windows(&rec, model.calibration, &WindowOptions::default()).unwrap();
    let report = evaluate_windows(&model, &windows, OutageLength::S60).unwrap();
    let s = report.summary;

    let rows = csv_rows(&d.join("e/report.csv"));
    let value = |method: &str, metric: &str, col: usize| -> f64 {
        rows.iter().find(|r| r[1] == method && r[2] == metric).unwrap()[col].parse().unwrap()
    };
    assert_eq!(value("physical", "crse", 5), s.physical.crse.mean);
    assert_eq!(value("corrected", "crse", 5), s.corrected.crse.mean);
    assert_eq!(value("corrected", "cte", 3), s.corrected.cte.max);
    assert_eq!(value("corrected", "cte", 6), s.corrected.cte.std);
    assert_eq!(value("gnss", "distance", 7), s.total_distance);
    assert_eq!(value("gnss", "distance", 8) as usize, s.n_sequences);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "data", "12", "200");
    fs::write(d.join("run.toml"), "seed = 4\nout = \"fromfile\"\n[model]\nhidden = 9\n[train]\nepochs = 3\n").unwrap();
    ok(d, &["--config", "run.toml", "train", "--data", "data/*.csv", "--epochs", "2"]);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("fromfile/train.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["train"]["epochs"], 2);
    assert_eq!(manifest["config"]["model"]["hidden"], 9);
    assert_eq!(manifest["config"]["model"]["seed"], 4);
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    let loss = fs::read_to_string(d.join("fromfile/loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 3);
}

#[test]
fn ingest_converts_foreign_units() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "data", "13", "60");
    // Rewrite the native file with km/h wheel speeds, degrees and other names.
    let rows = csv_rows(&d.join("data/synthetic.csv"));
    let mut w = csv::Writer::from_path(d.join("foreign.csv")).unwrap();
    w.write_record(["time", "fl", "fr", "rl", "rr", "latitude", "longitude", "heading_deg"]).unwrap();
    for r in &rows {
        let kmh = |v: &str| (v.parse::<f64>().unwrap() * 0.3 * 3.6).to_string();
        let deg = r[7].parse::<f64>().unwrap().to_degrees().to_string();
        w.write_record([r[0].clone(), kmh(&r[1]), kmh(&r[2]), kmh(&r[3]), kmh(&r[4]), r[5].clone(), r[6].clone(), deg])
            .unwrap();
    }
    w.flush().unwrap();
    fs::write(
        d.join("schema.toml"),
        "[columns]\ntimestamp = \"time\"\nwheel_fl = \"fl\"\nwheel_fr = \"fr\"\nwheel_rl = \"rl\"\nwheel_rr = \"rr\"\n\
         lat = \"latitude\"\nlon = \"longitude\"\nyaw = \"heading_deg\"\n[units]\nwheel = \"km/h\"\nyaw = \"deg\"\nwheel_radius_m = 0.3\n",
    )
    .unwrap();
    ok(d, &["--out", "conv", "ingest", "--input", "foreign.csv", "--schema", "schema.toml"]);
    let native = ingest_csv(d.join("data/synthetic.csv"), &Schema::default()).unwrap();
    let back = ingest_csv(d.join("conv/foreign.csv"), &Schema::default()).unwrap();
    assert_eq!(native.len(), back.len());
    for (a, b) in native.records().iter().zip(back.records()) {
        assert!((a.wheels.rl - b.wheels.rl).abs() < 1e-9);
        assert!((a.yaw - b.yaw).abs() < 1e-9);
    }
    assert!(d.join("conv/ingest.manifest.json").exists());
}
