use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;
use whonet::dataset::{
    build_recording_windows, export_csv, ingest_csv, write_synthetic, LabeledWindow, OutageLength, RandomDrive,
    Schema, SyntheticConfig, WheelFactors,
};
use whonet::deadreckon::Calibration;
use whonet::eval::{
    evaluate_windows, render_text, trajectory_geojson, write_csv, ErrorPredictor, NullModel, OracleModel,
};
use whonet::fingerprint::{file_sha256, sha256_hex};
use whonet::model::{load_model, param_count, save_model, train, CellKind, ModelConfig, TrainConfig};

use crate::config::{FileConfig, WindowSection};
use crate::error::CliError;
use crate::{Cli, Command, DataArgs, EvalArgs, IngestArgs, ParamsArgs, SynthArgs, TrainArgs};

/// Hidden widths of the standard parameter table.
pub const TABLE_WIDTHS: [usize; 7] = [32, 48, 64, 72, 128, 256, 512];

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.or(file.seed);
    let out = file.out_dir(cli.out.as_deref());
    match &cli.command {
        Command::Synth(a) => synth(a, &file, seed, &out),
        Command::Train(a) => train_cmd(a, &file, seed, &out),
        Command::Eval(a) => eval_cmd(a, &file, &out),
        Command::Params(a) => params(a),
        Command::Ingest(a) => ingest(a, &file, &out),
    }
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

impl FileDigest {
    fn of(path: &Path, shown: impl Into<String>) -> Result<Self, CliError> {
        Ok(FileDigest { path: shown.into(), sha256: file_sha256(path)? })
    }
}

/// Written next to every command's outputs. Contains no timestamps or
/// absolute output paths, so identical runs produce identical manifests.
#[derive(Debug, Serialize)]
struct RunManifest<C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: Option<u64>,
    config: C,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

fn write_manifest<C: Serialize>(
    out: &Path,
    command: &'static str,
    seed: Option<u64>,
    config: C,
    inputs: Vec<FileDigest>,
    outputs: &[&str],
) -> Result<PathBuf, CliError> {
    let outputs = outputs.iter().map(|name| FileDigest::of(&out.join(name), *name)).collect::<Result<_, _>>()?;
    let manifest = RunManifest {
        tool: "whonet",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        config,
        inputs,
        outputs,
    };
    let path = out.join(format!("{command}.manifest.json"));
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

fn synth(a: &SynthArgs, file: &FileConfig, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let mut cfg = file.synth.clone().unwrap_or_else(|| SyntheticConfig::random_drive(600.0, 0));
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(d) = a.duration {
        cfg.duration_s = d;
    }
    if let Some(b) = a.rear_bias {
        cfg.tyre_bias = WheelFactors { rl: b, rr: b, ..cfg.tyre_bias };
    }
    if let Some(n) = a.noise {
        cfg.noise_std_rad_s = n;
    }
    if let Some(rate) = a.slip_rate {
        let random = cfg.random.get_or_insert_with(RandomDrive::default);
        random.slip_events_per_minute = rate;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let written = write_synthetic(&cfg, out, &a.stem)?;
    info!("wrote {} records to {}", written.manifest.records, written.csv_path.display());
    println!("{}", written.csv_path.display());
    Ok(())
}

/// Resolved data source, recorded in manifests.
#[derive(Debug, Serialize)]
struct DataConfig {
    data: String,
    schema: Schema,
    wheel_radius_m: f64,
    windows: WindowSection,
}

fn resolve_schema(args: &DataArgs, file: &FileConfig) -> Result<Schema, CliError> {
    match &args.schema {
        Some(p) => Ok(Schema::load(p)?),
        None => {
            file.schema.validate()?;
            Ok(file.schema.clone())
        }
    }
}

/// Windows of every file matching the glob, in sorted path order, with run
/// ids unique across files.
fn load_windows(
    pattern: &str,
    schema: &Schema,
    cal: Calibration,
    windows: &WindowSection,
) -> Result<(Vec<LabeledWindow>, Vec<FileDigest>), CliError> {
    let paths = glob::glob(pattern).map_err(|e| CliError::Usage(format!("bad glob `{pattern}`: {e}")))?;
    let mut paths: Vec<PathBuf> = paths.collect::<Result<_, _>>().map_err(|e| CliError::Data(e.to_string()))?;
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Data(format!("no files match `{pattern}`")));
    }
    let opts = windows.options();
    let mut all: Vec<LabeledWindow> = Vec::new();
    let mut digests = Vec::new();
    for path in &paths {
        let recording = ingest_csv(path, schema)?;
        let offset = all.last().map_or(0, |w| w.run + 1);
        let ws = build_recording_windows(&recording, cal, &opts)?;
        info!("{}: {} records, {} windows", path.display(), recording.len(), ws.len());
        all.extend(ws.into_iter().map(|mut w| {
            w.run += offset;
            w
        }));
        digests.push(FileDigest::of(path, path.display().to_string())?);
    }
    if all.is_empty() {
        return Err(CliError::Data(format!("no complete one-second windows in `{pattern}`")));
    }
    Ok((all, digests))
}

#[derive(Debug, Serialize)]
struct TrainRunConfig {
    #[serde(flatten)]
    data: DataConfig,
    model: ModelConfig,
    train: TrainConfig,
}

fn train_cmd(a: &TrainArgs, file: &FileConfig, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let mut model_cfg = file.model.clone();
    let mut train_cfg = file.train.clone();
    if let Some(s) = seed {
        model_cfg.seed = s;
        train_cfg.seed = s;
    }
    if let Some(c) = a.cell {
        model_cfg.cell = c;
    }
    if let Some(h) = a.hidden {
        model_cfg.hidden = h;
    }
    if let Some(d) = a.dropout {
        model_cfg.dropout_rate = d;
    }
    if a.stateless {
        model_cfg.stateful = false;
    }
    if let Some(lr) = a.lr {
        train_cfg.learning_rate = lr;
    }
    if let Some(b) = a.batch_size {
        train_cfg.batch_size = b;
    }
    if let Some(e) = a.epochs {
        train_cfg.epochs = e;
    }
    model_cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    train_cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let cal = file.calibration(a.wheel_radius)?;
    let schema = resolve_schema(&a.data, file)?;

    let (windows, inputs) = load_windows(&a.data.data, &schema, cal, &file.windows)?;
    info!("training {} on {} windows", model_cfg.cell, windows.len());
    let outcome = train(&windows, cal, &model_cfg, &train_cfg)?;

    fs::create_dir_all(out)?;
    save_model(&outcome.model, out.join("model.json"))?;
    let mut loss = String::from("epoch,train_mae\n");
    for (k, l) in outcome.trace.epochs.iter().enumerate() {
        loss.push_str(&format!("{},{l}\n", k + 1));
    }
    fs::write(out.join("loss.csv"), loss)?;
    let config = TrainRunConfig {
        data: DataConfig {
            data: a.data.data.clone(),
            schema,
            wheel_radius_m: cal.radius(),
            windows: file.windows,
        },
        model: model_cfg,
        train: train_cfg,
    };
    let seed = Some(config.train.seed);
    write_manifest(out, "train", seed, config, inputs, &["model.json", "loss.csv"])?;
    println!(
        "trained on {} windows: mae {:.4} -> {:.4} m; model written to {}",
        windows.len(),
        outcome.trace.initial,
        outcome.trace.final_eval,
        out.join("model.json").display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalRunConfig {
    #[serde(flatten)]
    data: DataConfig,
    predictor: String,
    outages: Vec<usize>,
}

fn eval_cmd(a: &EvalArgs, file: &FileConfig, out: &Path) -> Result<(), CliError> {
    let explicit: Vec<usize> = if a.outage.is_empty() {
        file.eval.outages.clone()
    } else {
        a.outage.iter().map(|s| s.parse().expect("restricted by the argument parser")).collect()
    };
    let lengths: Vec<OutageLength> = if explicit.is_empty() {
        OutageLength::ALL.to_vec()
    } else {
        explicit
            .iter()
            .map(|&s| OutageLength::try_from(s).map_err(|e| CliError::Usage(e.to_string())))
            .collect::<Result<_, _>>()?
    };

    let model = a.model.as_ref().map(load_model).transpose()?;
    let cal = match &model {
        Some(m) if a.wheel_radius.is_none() => m.calibration,
        _ => file.calibration(a.wheel_radius)?,
    };
    let (predictor, name): (&dyn ErrorPredictor, String) = match &model {
        Some(m) => (m, format!("model:{}", m.config.cell)),
        None if a.oracle_model => (&OracleModel, "oracle".into()),
        None => (&NullModel, "null".into()),
    };
    let schema = resolve_schema(&a.data, file)?;
    let (windows, mut inputs) = load_windows(&a.data.data, &schema, cal, &file.windows)?;
    if let Some(p) = &a.model {
        inputs.insert(0, FileDigest::of(p, p.display().to_string())?);
    }

    let mut reports = Vec::new();
    for &length in &lengths {
        match evaluate_windows(predictor, &windows, length) {
            Ok(r) => reports.push(r),
            Err(whonet::Error::NoSequences { length_s }) if explicit.is_empty() => {
                warn!("no complete {length_s} s sequences; skipping");
            }
            Err(e) => return Err(e.into()),
        }
    }
    if reports.is_empty() {
        return Err(CliError::Data("the data holds no complete outage sequence of any length".into()));
    }

    fs::create_dir_all(out)?;
    let summaries: Vec<_> = reports.iter().map(|r| r.summary.clone()).collect();
    let text = render_text(&summaries);
    fs::write(out.join("report.txt"), &text)?;
    let mut csv = Vec::new();
    write_csv(&mut csv, &summaries)?;
    fs::write(out.join("report.csv"), csv)?;
    let mut names = vec!["report.txt".to_string(), "report.csv".to_string()];
    for r in &reports {
        let name = format!("trajectories_{}s.geojson", r.summary.length.seconds());
        let mut body = serde_json::to_vec(&trajectory_geojson(r)?)?;
        body.push(b'\n');
        fs::write(out.join(&name), body)?;
        names.push(name);
    }
    let config = EvalRunConfig {
        data: DataConfig {
            data: a.data.data.clone(),
            schema,
            wheel_radius_m: cal.radius(),
            windows: file.windows,
        },
        predictor: name,
        outages: reports.iter().map(|r| r.summary.length.seconds()).collect(),
    };
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    write_manifest(out, "eval", None, config, inputs, &names)?;
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

fn params(a: &ParamsArgs) -> Result<(), CliError> {
    if a.input_dim == 0 {
        return Err(CliError::Usage("--input-dim must be at least 1".into()));
    }
    match (a.table, a.cell, a.hidden) {
        (false, Some(cell), Some(hidden)) if hidden > 0 => {
            println!("{}", param_count(cell, a.input_dim, hidden));
        }
        (_, _, Some(0)) => return Err(CliError::Usage("--hidden must be at least 1".into())),
        (false, None, Some(hidden)) => print_table(a.input_dim, &[hidden]),
        (false, Some(_), None) => return Err(CliError::Usage("--cell needs --hidden (or use --table)".into())),
        _ => print_table(a.input_dim, &TABLE_WIDTHS),
    }
    Ok(())
}

fn print_table(input_dim: usize, widths: &[usize]) {
    let mut line = format!("{:>6}", "hidden");
    for c in CellKind::ALL {
        line.push_str(&format!(" {:>9}", c.name()));
    }
    println!("{line}");
    for &h in widths {
        let mut line = format!("{h:>6}");
        for c in CellKind::ALL {
            line.push_str(&format!(" {:>9}", param_count(c, input_dim, h)));
        }
        println!("{line}");
    }
}

#[derive(Debug, Serialize)]
struct IngestSummary {
    schema: Schema,
    records: usize,
    segments: usize,
    windows: usize,
    wheel_radius_m: f64,
}

fn ingest(a: &IngestArgs, file: &FileConfig, out: &Path) -> Result<(), CliError> {
    let schema = Schema::load(&a.schema)?;
    let cal = file.calibration(a.wheel_radius)?;
    let recording = ingest_csv(&a.input, &schema)?;
    let windows = build_recording_windows(&recording, cal, &file.windows.options())?;
    let stem = match &a.stem {
        Some(s) => s.clone(),
        None => a
            .input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| CliError::Usage("cannot derive an output name; pass --stem".into()))?,
    };
    fs::create_dir_all(out)?;
    let name = format!("{stem}.csv");
    export_csv(out.join(&name), recording.records(), &Schema::default())?;
    let summary = IngestSummary {
        schema: schema.clone(),
        records: recording.len(),
        segments: recording.segment_count(),
        windows: windows.len(),
        wheel_radius_m: cal.radius(),
    };
    let inputs = vec![
        FileDigest::of(&a.input, a.input.display().to_string())?,
        FileDigest { path: a.schema.display().to_string(), sha256: sha256_hex(&fs::read(&a.schema)?) },
    ];
    write_manifest(out, "ingest", None, &summary, inputs, &[name.as_str()])?;
    println!(
        "{} records in {} segments ({} windows) written to {}",
        summary.records,
        summary.segments,
        summary.windows,
        out.join(&name).display()
    );
    Ok(())
}
