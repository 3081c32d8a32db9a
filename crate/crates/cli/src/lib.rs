//! Subcommand implementations behind the `rayvox` binary. Every artifact
//! written here carries the hash of the run configuration that produced it.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rayvox_core::datagen::{generate_scenes, Split};
use rayvox_core::geometry::backproject;
use rayvox_core::handover::{run_benchmark, standard_suite, BenchmarkReport, RestorationBackend, ScenarioSet};
use rayvox_core::io::{
    dataset_root_of, depth_to_tensor_f64, load_checkpoint, load_split, read_manifest, read_scene, save_checkpoint,
    write_dataset, CheckpointMeta, Manifest, RunConfig,
};
use rayvox_core::metrics::{evaluate_dataset, format_table, MetricReport, SceneMetrics};
use rayvox_core::network::restore;
use rayvox_core::training::{train, EpochLog};
use rayvox_core::{Error, Model, Result};

/// Copy of the run configuration stored beside generated data and checkpoints.
pub const CONFIG_COPY: &str = "config.json";
pub const TRAIN_LOG: &str = "log.jsonl";
pub const RESTORED_DEPTH: &str = "restored.rvt";
pub const POINT_DUMP: &str = "points.xyz";
pub const RESTORE_SUMMARY: &str = "restore.json";
pub const HANDOVER_REPORT: &str = "report.json";
pub const TRAJECTORY_DIR: &str = "trajectories";

/// Process exit status for an error: 2 bad configuration, 3 data error,
/// 4 training divergence, 5 configuration hash mismatch.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::Diverged(_) => 4,
        Error::ConfigDrift { .. } => 5,
        _ => 3,
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| io_err(path, e))
}

/// The run configuration at `path`, or the defaults.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => {
            let c = RunConfig::default();
            c.validate()?;
            Ok(c)
        }
    }
}

fn check_drift(meta: &CheckpointMeta, cfg: &RunConfig) -> Result<()> {
    let config = cfg.hash();
    if meta.config_hash != config {
        return Err(Error::ConfigDrift { checkpoint: meta.config_hash.clone(), config });
    }
    Ok(())
}

/// Generates the dataset described by `cfg.dataset` under `out`.
pub fn cmd_gen_data(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    create_dir(out)?;
    let scenes = generate_scenes(&cfg.dataset)?;
    let manifest = write_dataset(out, &cfg.dataset, &scenes, &cfg.hash())?;
    let path = out.join(CONFIG_COPY);
    std::fs::write(&path, cfg.canonical_json() + "\n").map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}

/// One line of the training log stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub config_hash: String,
    #[serde(flatten)]
    pub epoch: EpochLog,
}

/// What a finished (or diverged) training run left behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub config_hash: String,
    pub checkpoint: PathBuf,
    pub best_epoch: Option<usize>,
    pub epochs_run: usize,
    pub final_val: Option<MetricReport>,
}

/// Trains on the train split of `data`, selecting by validation RMSE, and
/// writes the checkpoint and log into `out`. On divergence the last good
/// parameters are still saved and the error is returned.
pub fn cmd_train(
    cfg: &RunConfig,
    data: &Path,
    out: &Path,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainSummary> {
    let manifest = read_manifest(data)?;
    let strip = |v: Vec<(usize, _)>| v.into_iter().map(|(_, r)| r).collect::<Vec<_>>();
    let train_set = strip(load_split(data, &manifest, Some(Split::Train))?);
    let val_set = strip(load_split(data, &manifest, Some(Split::Val))?);
    create_dir(out)?;
    let hash = cfg.hash();

    let log_path = out.join(TRAIN_LOG);
    let mut log = BufWriter::new(File::create(&log_path).map_err(|e| io_err(&log_path, e))?);
    let mut log_err = None;
    let init = Model::new(cfg.model.clone())?;
    let result = train(init, &train_set, &val_set, &cfg.train, |e| {
        on_epoch(e);
        let line = LogLine { config_hash: hash.clone(), epoch: e.clone() };
        let text = serde_json::to_string(&line).expect("log line serialises");
        if let Err(err) = writeln!(log, "{text}").and_then(|_| log.flush()) {
            log_err.get_or_insert(err);
        }
    })?;
    if let Some(err) = log_err {
        return Err(io_err(&log_path, err));
    }

    let meta = CheckpointMeta {
        config_hash: hash.clone(),
        model: cfg.model.clone(),
        param_count: result.model.param_count(),
        best_epoch: result.best_epoch,
        epochs_run: result.log.len(),
        diverged: result.diverged.clone(),
    };
    save_checkpoint(out, &result.model, &meta)?;
    let path = out.join(CONFIG_COPY);
    std::fs::write(&path, cfg.canonical_json() + "\n").map_err(|e| io_err(&path, e))?;
    if let Some(reason) = result.diverged {
        return Err(Error::Diverged(reason));
    }
    Ok(TrainSummary {
        config_hash: hash,
        checkpoint: out.to_path_buf(),
        best_epoch: result.best_epoch,
        epochs_run: result.log.len(),
        final_val: result.log.last().and_then(|l| l.val),
    })
}

/// Restored and corrupted-input metrics of one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub split: Split,
    pub restored: MetricReport,
    pub corrupted: MetricReport,
    pub scenes: Vec<SceneMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_hash: String,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn table(&self) -> String {
        let names: Vec<(String, String)> = self
            .rows
            .iter()
            .map(|r| {
                let s = serde_json::to_value(r.split).expect("split").as_str().unwrap_or("?").to_string();
                (format!("{s} restored"), format!("{s} corrupted"))
            })
            .collect();
        let mut rows = Vec::new();
        for (r, (a, b)) in self.rows.iter().zip(&names) {
            rows.push((a.as_str(), &r.restored));
            rows.push((b.as_str(), &r.corrupted));
        }
        format_table(&rows)
    }
}

/// Evaluates the checkpoint in `ckpt` on one split of `data`, or on every
/// non-empty split when `split` is `None`.
pub fn cmd_eval(cfg: &RunConfig, ckpt: &Path, data: &Path, split: Option<Split>) -> Result<EvalReport> {
    let (model, meta) = load_checkpoint(ckpt)?;
    check_drift(&meta, cfg)?;
    let manifest = read_manifest(data)?;
    let splits = match split {
        Some(s) => vec![s],
        None => vec![Split::Train, Split::Val, Split::Test],
    };
    let mut rows = Vec::new();
    for s in splits {
        if split.is_none() && manifest.entries(Some(s)).next().is_none() {
            continue;
        }
        let scenes = load_split(data, &manifest, Some(s))?;
        if scenes.is_empty() {
            return Err(Error::InvalidInput(format!("split {s:?} is empty")));
        }
        let ev = evaluate_dataset(&model, scenes.iter().map(|(i, r)| (*i, r)))?;
        rows.push(EvalRow { split: s, restored: ev.restored, corrupted: ev.corrupted, scenes: ev.scenes });
    }
    Ok(EvalReport { config_hash: meta.config_hash, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestoreSummary {
    pub config_hash: String,
    pub scene: PathBuf,
    pub restored: usize,
    pub unrestored: usize,
    /// Rows written to the point dump.
    pub points: usize,
    /// Whether the dump was limited to restored object pixels.
    pub masked: bool,
}

/// Restores one scene directory of a generated dataset and writes the
/// restored depth, an `x y z` point dump and a summary into `out`. With
/// `masked`, only object pixels that received a prediction are dumped
/// (background removal); otherwise every valid pixel is.
pub fn cmd_restore(ckpt: &Path, scene_dir: &Path, out: &Path, masked: bool) -> Result<RestoreSummary> {
    let (model, meta) = load_checkpoint(ckpt)?;
    let root = dataset_root_of(scene_dir)
        .ok_or_else(|| Error::InvalidInput(format!("{} is not inside a dataset", scene_dir.display())))?;
    let manifest = read_manifest(&root)?;
    let rec = read_scene(scene_dir, &manifest.intrinsics)?;
    let r = restore(&model, &rec.input())?;

    create_dir(out)?;
    depth_to_tensor_f64(&r.depth).write(&out.join(RESTORED_DEPTH))?;
    let cloud = backproject(&r.depth, &rec.intrinsics)?;
    let dump = out.join(POINT_DUMP);
    let mut w = BufWriter::new(File::create(&dump).map_err(|e| io_err(&dump, e))?);
    let mut points = 0;
    for (p, &(u, v)) in cloud.points.iter().zip(&cloud.pixels) {
        if masked && !r.predicted.get(u, v) {
            continue;
        }
        writeln!(w, "{} {} {}", p.x, p.y, p.z).map_err(|e| io_err(&dump, e))?;
        points += 1;
    }
    w.flush().map_err(|e| io_err(&dump, e))?;

    let summary = RestoreSummary {
        config_hash: meta.config_hash,
        scene: scene_dir.to_path_buf(),
        restored: r.restored,
        unrestored: r.unrestored,
        points,
        masked,
    };
    write_json(&out.join(RESTORE_SUMMARY), &summary)?;
    Ok(summary)
}

/// Depth source for the handover command.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendChoice {
    Oracle,
    Passthrough,
    Checkpoint(PathBuf),
}

/// Where the handover scenarios come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    File(PathBuf),
    /// The built-in 30-scenario suite drawn from this seed.
    Suite(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverReport {
    pub config_hash: String,
    pub report: BenchmarkReport,
}

fn load_scenarios(src: &ScenarioSource) -> Result<ScenarioSet> {
    match src {
        ScenarioSource::Suite(seed) => Ok(ScenarioSet { scenarios: standard_suite(*seed)? }),
        ScenarioSource::File(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", p.display())))
        }
    }
}

/// Runs every scenario with the chosen backend and writes the report and
/// one trajectory stream per scenario into `out`.
pub fn cmd_handover(
    cfg: &RunConfig,
    backend: &BackendChoice,
    scenarios: &ScenarioSource,
    out: &Path,
) -> Result<HandoverReport> {
    let set = load_scenarios(scenarios)?;
    let model;
    let backend = match backend {
        BackendChoice::Oracle => RestorationBackend::Oracle,
        BackendChoice::Passthrough => RestorationBackend::Passthrough,
        BackendChoice::Checkpoint(dir) => {
            let (m, meta) = load_checkpoint(dir)?;
            check_drift(&meta, cfg)?;
            model = m;
            RestorationBackend::Model(&model)
        }
    };
    let (report, trajectories) = run_benchmark(&set.scenarios, &backend, &cfg.handover)?;

    let dir = out.join(TRAJECTORY_DIR);
    create_dir(&dir)?;
    for (script, records) in set.scenarios.iter().zip(&trajectories) {
        let path = dir.join(format!("{}.jsonl", script.name));
        let mut w = BufWriter::new(File::create(&path).map_err(|e| io_err(&path, e))?);
        for r in records {
            writeln!(w, "{}", serde_json::to_string(r)?).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
    }
    let out_report = HandoverReport { config_hash: cfg.hash(), report };
    write_json(&out.join(HANDOVER_REPORT), &out_report)?;
    Ok(out_report)
}

/// Writes the built-in scenario suite as an editable scenario file.
pub fn cmd_suite(seed: u64, out: &Path) -> Result<usize> {
    let set = load_scenarios(&ScenarioSource::Suite(seed))?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_json(out, &set)?;
    Ok(set.scenarios.len())
}
