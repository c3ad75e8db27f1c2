mod render;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use wstatt_core::model::{
    end_to_end_gradcheck, load_checkpoint, save_checkpoint, Mode, Model, ModelError, E2E_GRAD_FLOOR,
};
use wstatt_core::nn::gradcheck::kernel_suite;
use wstatt_core::nn::NnError;
use wstatt_core::raster::{
    compute_norm_stats, erode_labels, read_labels, remove_small_components, write_labels, Connectivity, RasterTimeSeries,
    Split,
};
use wstatt_core::synth::{gen_benchmark, BenchmarkConfig, DatasetManifest, SceneData};
use wstatt_core::train::{
    compare_runs, confusion_render, early_sweep, evaluate_scenes, export_attention, loss_csv, predict_scene, sweep_csv,
    train_with, Dataset, MetricsReport, PrepInfo, SceneSample, TrainConfig, TrainError,
};

const VERSION: &str = env!("WSTATT_VERSION");
const RUN_MANIFEST: &str = "run.json";

const KERNEL_TOL: f64 = 1e-5;
const E2E_TOL: f64 = 1e-4;

const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_DATA: u8 = 4;
const EXIT_NUMERIC: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "wstatt", version = VERSION, about = "Crop-type segmentation from satellite and weather time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic benchmark (scenes, weather, labels, manifest).
    Synth {
        /// Benchmark config JSON; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Clean labels and fix normalization statistics for a dataset.
    Prep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Boundary erosion passes.
        #[arg(long, default_value_t = 0)]
        erode: usize,
        /// Smallest same-class component (8-connected) kept, in pixels.
        #[arg(long, default_value_t = 1)]
        min_component: usize,
        /// Pixels excluded along each scene edge.
        #[arg(long, default_value_t = 0)]
        margin: usize,
    },
    /// Train a model and write best/last checkpoints and the loss curve.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Training config JSON; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// wstatt or statt (satellite-only ablation).
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Per-class metrics and confusion matrix on one split.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_split, default_value = "test")]
        split: Split,
        /// Truncate inputs to this many months; full series when omitted.
        #[arg(long)]
        months: Option<u32>,
        /// Second checkpoint to compare against (deltas are its F1 minus --ckpt's).
        #[arg(long)]
        compare_ckpt: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Macro and per-class F1 at several early-prediction horizons.
    Sweep {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_split, default_value = "test")]
        split: Split,
        #[arg(long, value_delimiter = ',', default_value = "6,8,10,12")]
        months: Vec<u32>,
        /// Fail unless the checkpoint was trained in this mode.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-timestamp mean attention over one patch.
    Attention {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// SCENE:ROW:COL of the patch's top-left pixel.
        #[arg(long)]
        patch: String,
        #[arg(long, default_value_t = 12)]
        months: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of every kernel's backward pass.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also check the whole network's loss gradient in both modes.
        #[arg(long)]
        end_to_end: bool,
        /// Write gradcheck.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a label or prediction raster as a PPM image.
    Render {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse::<Mode>().map_err(|e| e.to_string())
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        _ => Err(format!("unknown split {s:?} (train, val, test)")),
    }
}

/// Failure category, mapped to the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug)]
struct Tagged {
    kind: Kind,
    msg: String,
}

impl fmt::Display for Tagged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for Tagged {}

fn fail(kind: Kind, msg: impl Into<String>) -> anyhow::Error {
    anyhow!(Tagged { kind, msg: msg.into() })
}

fn classify(err: &anyhow::Error) -> Kind {
    for cause in err.chain() {
        if let Some(t) = cause.downcast_ref::<Tagged>() {
            return t.kind;
        }
        if let Some(e) = cause.downcast_ref::<TrainError>() {
            return match e {
                TrainError::Config(_) => Kind::Config,
                TrainError::Diverged { .. } => Kind::Numeric,
                _ => Kind::Data,
            };
        }
        if let Some(e) = cause.downcast_ref::<wstatt_core::Error>() {
            return match e {
                wstatt_core::Error::Train(TrainError::Config(_)) => Kind::Config,
                wstatt_core::Error::Train(TrainError::Diverged { .. }) => Kind::Numeric,
                wstatt_core::Error::Model(ModelError::Config(_)) => Kind::Config,
                wstatt_core::Error::Model(ModelError::Nn(NnError::NonFinite(_))) => Kind::Numeric,
                wstatt_core::Error::Nn(NnError::NonFinite(_)) => Kind::Numeric,
                _ => Kind::Data,
            };
        }
    }
    Kind::Data
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| fail(Kind::Config, format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| fail(Kind::Config, format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text)
}

/// Records what a run consumed so it can be repeated. No timestamps, so
/// identical invocations write identical manifests.
fn write_run_manifest(out: &Path, subcommand: &str, inputs: Value, config: Value) -> Result<()> {
    let manifest = json!({
        "tool": "wstatt",
        "version": VERSION,
        "subcommand": subcommand,
        "inputs": inputs,
        "config": config,
    });
    write_json(&out.join(RUN_MANIFEST), &manifest)
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn load_dataset(dir: &Path) -> Result<Dataset> {
    Dataset::load(dir, 0).with_context(|| format!("loading dataset {}", dir.display()))
}

fn load_model(path: &Path, data: &Dataset) -> Result<Model> {
    let ckpt = load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    let cfg = ckpt.model.config();
    if cfg.classes != data.classes() || cfg.sat_channels != data.sat_channels() {
        return Err(fail(
            Kind::Data,
            format!(
                "checkpoint expects {} classes / {} bands, dataset has {} / {}",
                cfg.classes,
                cfg.sat_channels,
                data.classes(),
                data.sat_channels()
            ),
        ));
    }
    Ok(ckpt.model)
}

fn split_scenes(data: &Dataset, split: Split) -> Result<Vec<&SceneSample>> {
    let scenes = data.split(split);
    if scenes.is_empty() {
        return Err(fail(Kind::Data, format!("dataset has no {split:?} scenes")));
    }
    Ok(scenes)
}

fn synth(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg: BenchmarkConfig = match config {
        Some(p) => read_config(p)?,
        None => BenchmarkConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let manifest = gen_benchmark(&cfg, out)?;
    write_run_manifest(
        out,
        "synth",
        json!({ "config_file": config.map(path_str) }),
        serde_json::to_value(&cfg)?,
    )?;
    println!("wrote {} scenes to {}", manifest.scenes.len(), out.display());
    Ok(())
}

fn prep(data: &Path, out: &Path, erode: usize, min_component: usize, margin: usize) -> Result<()> {
    if data == out {
        return Err(fail(Kind::Config, "prep --out must differ from --data"));
    }
    let manifest = DatasetManifest::read(data)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut sat_train: Vec<RasterTimeSeries> = Vec::new();
    let mut wx_train: Vec<RasterTimeSeries> = Vec::new();
    let mut removed = 0usize;
    for entry in &manifest.scenes {
        let scene = SceneData::load(data, entry)?;
        let cleaned = remove_small_components(&erode_labels(&scene.labels, erode), min_component, Connectivity::Eight);
        removed += scene.labels.ids().iter().zip(cleaned.ids()).filter(|(a, b)| a != b).count();
        write_labels(out.join(&entry.labels), &cleaned)?;
        for f in [&entry.satellite, &entry.weather] {
            fs::copy(data.join(f), out.join(f)).with_context(|| format!("copying {f}"))?;
        }
        if entry.split == Split::Train {
            sat_train.push(scene.satellite);
            wx_train.push(scene.weather);
        }
    }
    if sat_train.is_empty() {
        return Err(fail(Kind::Data, "dataset has no train scenes to compute normalization from"));
    }
    let info = PrepInfo {
        erode,
        min_component,
        margin,
        sat_stats: compute_norm_stats(&sat_train.iter().collect::<Vec<_>>())?,
        weather_stats: compute_norm_stats(&wx_train.iter().collect::<Vec<_>>())?,
    };
    manifest.write(out)?;
    info.write(out)?;
    write_run_manifest(out, "prep", json!({ "data": path_str(data) }), serde_json::to_value(&info)?)?;
    println!("relabeled {removed} pixels as unknown across {} scenes", manifest.scenes.len());
    Ok(())
}

fn train_cmd(
    data_dir: &Path,
    config: Option<&Path>,
    mode: Option<Mode>,
    out: &Path,
    seed: Option<u64>,
    epochs: Option<usize>,
) -> Result<()> {
    let mut cfg: TrainConfig = match config {
        Some(p) => read_config(p)?,
        None => TrainConfig::default(),
    };
    if let Some(m) = mode {
        cfg.mode = m;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    cfg.validate()?;
    let data = load_dataset(data_dir)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let outcome = train_with(&data, &cfg, |ckpt| {
        save_checkpoint(out.join(format!("epoch_{:03}.ckpt", ckpt.epoch)), ckpt, true)
    })?;
    save_checkpoint(out.join("best.ckpt"), &outcome.best, true)?;
    save_checkpoint(out.join("last.ckpt"), &outcome.last, true)?;
    write_file(&out.join("loss.csv"), loss_csv(&outcome.curve))?;
    write_run_manifest(
        out,
        "train",
        json!({ "data": path_str(data_dir), "config_file": config.map(path_str), "seed": cfg.seed }),
        serde_json::to_value(&cfg)?,
    )?;
    println!(
        "{} trained {} epochs; best epoch {} (validation macro-F1 {:.4})",
        cfg.mode, cfg.epochs, outcome.best_epoch, outcome.best_val_macro_f1
    );
    Ok(())
}

fn write_report(out: &Path, stem: &str, report: &MetricsReport) -> Result<()> {
    let (text, csv) = confusion_render(report);
    write_file(&out.join(format!("{stem}.csv")), report.to_csv())?;
    write_file(&out.join(format!("{stem}_confusion.txt")), text)?;
    write_file(&out.join(format!("{stem}_confusion.csv")), csv)?;
    write_json(&out.join(format!("{stem}.json")), report)
}

fn eval_cmd(ckpt: &Path, data_dir: &Path, split: Split, months: Option<u32>, compare: Option<&Path>, out: &Path) -> Result<()> {
    let data = load_dataset(data_dir)?;
    let scenes = split_scenes(&data, split)?;
    let model = load_model(ckpt, &data)?;
    let report = evaluate_scenes(&model, &scenes, months, Default::default())?;
    write_report(out, "metrics", &report)?;
    let pred_dir = out.join("pred");
    fs::create_dir_all(&pred_dir).with_context(|| format!("creating {}", pred_dir.display()))?;
    for s in &scenes {
        let mut grid = s.labels.clone();
        grid.ids_mut().copy_from_slice(&predict_scene(&model, s, months)?);
        write_labels(pred_dir.join(format!("{}.lbl.rts", s.id)), &grid)?;
    }
    println!("macro-F1 {:.4} over {} pixels", report.macro_f1, report.masked_in);
    if let Some(other) = compare {
        let model_b = load_model(other, &data)?;
        let report_b = evaluate_scenes(&model_b, &scenes, months, Default::default())?;
        write_report(out, "metrics_b", &report_b)?;
        write_file(&out.join("compare.csv"), compare_runs(&report, &report_b)?)?;
        println!("compare: macro-F1 {:.4} -> {:.4}", report.macro_f1, report_b.macro_f1);
    }
    write_run_manifest(
        out,
        "eval",
        json!({
            "ckpt": path_str(ckpt),
            "data": path_str(data_dir),
            "split": split,
            "months": months,
            "compare_ckpt": compare.map(path_str),
        }),
        Value::Null,
    )
}

fn sweep_cmd(ckpt: &Path, data_dir: &Path, split: Split, months: &[u32], mode: Option<Mode>, out: &Path) -> Result<()> {
    if months.is_empty() || months.iter().any(|m| !(1..=12).contains(m)) {
        return Err(fail(Kind::Config, "--months must list values in 1..=12"));
    }
    let data = load_dataset(data_dir)?;
    let scenes = split_scenes(&data, split)?;
    let model = load_model(ckpt, &data)?;
    if let Some(m) = mode {
        if m != model.config().mode {
            return Err(fail(Kind::Config, format!("checkpoint was trained as {}, not {m}", model.config().mode)));
        }
    }
    let reports = early_sweep(&model, &scenes, months, Default::default())?;
    write_file(&out.join("sweep.csv"), sweep_csv(&reports))?;
    for r in &reports {
        write_report(out, &format!("metrics_{:02}m", r.months.unwrap_or(12)), r)?;
        println!("{:>2} months: macro-F1 {:.4}", r.months.unwrap_or(12), r.macro_f1);
    }
    write_run_manifest(
        out,
        "sweep",
        json!({ "ckpt": path_str(ckpt), "data": path_str(data_dir), "split": split, "months": months }),
        Value::Null,
    )
}

fn parse_patch(id: &str) -> Result<(String, usize, usize)> {
    let parts: Vec<&str> = id.rsplitn(3, ':').collect();
    let bad = || fail(Kind::Config, format!("patch {id:?} is not SCENE:ROW:COL"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let col = parts[0].parse().map_err(|_| bad())?;
    let row = parts[1].parse().map_err(|_| bad())?;
    Ok((parts[2].to_string(), row, col))
}

fn attention_cmd(ckpt: &Path, data_dir: &Path, patch: &str, months: u32, out: &Path) -> Result<()> {
    let (scene_id, row, col) = parse_patch(patch)?;
    let data = load_dataset(data_dir)?;
    let scene = data.scene(&scene_id).ok_or_else(|| fail(Kind::Data, format!("no scene {scene_id:?} in dataset")))?;
    let model = load_model(ckpt, &data)?;
    let profile = export_attention(&model, scene, row, col, months)?;
    write_file(&out.join("attention.csv"), profile.to_csv())?;
    write_run_manifest(
        out,
        "attention",
        json!({ "ckpt": path_str(ckpt), "data": path_str(data_dir), "patch": patch, "months": months }),
        Value::Null,
    )
}

fn gradcheck_cmd(seed: u64, end_to_end: bool, out: Option<&Path>) -> Result<()> {
    let mut csv = String::from("check,max_rel_err,tolerance,passed\n");
    let mut all_ok = true;
    let mut line = |name: &str, err: f64, tol: f64| {
        let ok = err < tol;
        all_ok &= ok;
        println!("{name:<28} {err:>10.3e}  < {tol:.0e}  {}", if ok { "ok" } else { "FAIL" });
        csv.push_str(&format!("{name},{err:e},{tol:e},{ok}\n"));
    };
    for k in kernel_suite(seed)? {
        line(&k.name, k.max_rel_err, KERNEL_TOL);
    }
    if end_to_end {
        for mode in [Mode::Wstatt, Mode::StattAblation] {
            let (_, rep) = end_to_end_gradcheck(seed, mode)?;
            line(&format!("end_to_end.{mode}"), rep.max_rel_err, E2E_TOL);
        }
        println!("(end-to-end relative errors use a denominator floor of {E2E_GRAD_FLOOR:e})");
    }
    if let Some(dir) = out {
        write_file(&dir.join("gradcheck.csv"), &csv)?;
        write_run_manifest(dir, "gradcheck", json!({ "seed": seed, "end_to_end": end_to_end }), Value::Null)?;
    }
    if !all_ok {
        return Err(fail(Kind::Numeric, "gradient check failed"));
    }
    Ok(())
}

fn render_cmd(input: &Path, out: &Path) -> Result<()> {
    let labels = read_labels(input)?;
    let img = render::render_ppm(&labels).map_err(|e| fail(Kind::Data, e.to_string()))?;
    write_file(out, img)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { config, out, seed } => synth(config.as_deref(), &out, seed),
        Command::Prep { data, out, erode, min_component, margin } => prep(&data, &out, erode, min_component, margin),
        Command::Train { data, config, mode, out, seed, epochs } => train_cmd(&data, config.as_deref(), mode, &out, seed, epochs),
        Command::Eval { ckpt, data, split, months, compare_ckpt, out } => {
            eval_cmd(&ckpt, &data, split, months, compare_ckpt.as_deref(), &out)
        }
        Command::Sweep { ckpt, data, split, months, mode, out } => sweep_cmd(&ckpt, &data, split, &months, mode, &out),
        Command::Attention { ckpt, data, patch, months, out } => attention_cmd(&ckpt, &data, &patch, months, &out),
        Command::Gradcheck { seed, end_to_end, out } => gradcheck_cmd(seed, end_to_end, out.as_deref()),
        Command::Render { input, out } => render_cmd(&input, &out),
    }
}

fn threads_from_env() -> Result<usize> {
    match std::env::var("WSTATT_THREADS") {
        Ok(v) => v.trim().parse().map_err(|_| fail(Kind::Config, format!("WSTATT_THREADS={v:?} is not a count"))),
        Err(_) => Ok(0),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = threads_from_env().and_then(|n| {
        wstatt_core::par::init_threads(n);
        run(cli)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(match classify(&e) {
                Kind::Config => EXIT_CONFIG,
                Kind::Data => EXIT_DATA,
                Kind::Numeric => EXIT_NUMERIC,
            })
        }
    }
}
