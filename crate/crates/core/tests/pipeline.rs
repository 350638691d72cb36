use whonet::dataset::{
    build_recording_windows, export_csv, generate_synthetic, ingest_csv, LabeledWindow, OutageLength, Recording, Schema,
    SpeedSegment, SyntheticConfig, WheelFactors, WindowOptions,
};
use whonet::deadreckon::Calibration;
use whonet::eval::evaluate_windows;
use whonet::model::{load_model, save_model, train, CellKind, ModelConfig, TrainConfig};

fn drive(seed: u64) -> Vec<LabeledWindow> {
    let cfg = SyntheticConfig {
        tyre_bias: WheelFactors::rear(1.05),
        noise_std_rad_s: 0.05,
        ..SyntheticConfig::random_drive(400.0, seed)
    };
    let rec = Recording::from_records(generate_synthetic(&cfg).unwrap()).unwrap();
    build_recording_windows(&rec, Calibration::default(), &WindowOptions::default()).unwrap()
}

#[test]
fn csv_round_trip_keeps_windows() {
    let cfg = SyntheticConfig { noise_std_rad_s: 0.05, ..SyntheticConfig::random_drive(120.0, 3) };
    let records = generate_synthetic(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("drive.csv");
    export_csv(&path, &records, &Schema::default()).unwrap();
    let back = ingest_csv(&path, &Schema::default()).unwrap();
    assert_eq!(back.records(), records.as_slice());

    let opts = WindowOptions::default();
    let direct = build_recording_windows(&Recording::from_records(records).unwrap(), Calibration::default(), &opts);
    let read = build_recording_windows(&back, Calibration::default(), &opts);
    assert_eq!(direct.unwrap(), read.unwrap());
}

#[test]
fn rear_bias_shows_up_as_positive_labels() {
    // Straight at 20 m/s: a +5% rear radius over-reports about 1 m per second.
    let cfg = SyntheticConfig {
        duration_s: 60.0,
        initial_speed_mps: 20.0,
        speed_profile: vec![SpeedSegment { duration_s: 60.0, end_speed_mps: 20.0 }],
        tyre_bias: WheelFactors::rear(1.05),
        ..SyntheticConfig::default()
    };
    let rec = Recording::from_records(generate_synthetic(&cfg).unwrap()).unwrap();
    let windows = build_recording_windows(&rec, Calibration::default(), &WindowOptions::default()).unwrap();
    assert_eq!(windows.len(), 59);
    for w in &windows {
        assert!((w.window.y.0 - 1.0).abs() < 1e-6, "{}", w.window.y.0);
    }
}

#[test]
fn saved_model_evaluates_identically() {
    let train_w = drive(1);
    let test_w = drive(2);
    let model_cfg = ModelConfig { cell: CellKind::Lstm, hidden: 12, ..ModelConfig::default() };
    let train_cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
    let model = train(&train_w, Calibration::default(), &model_cfg, &train_cfg).unwrap().model;

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();

    let a = evaluate_windows(&model, &test_w, OutageLength::S60).unwrap();
    let b = evaluate_windows(&loaded, &test_w, OutageLength::S60).unwrap();
    assert_eq!(a.summary, b.summary);
    assert_eq!(a.predictions, b.predictions);
    assert_eq!(a.summary.n_sequences, test_w.len() / 60);
}
