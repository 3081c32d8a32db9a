use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use rayvox_cli::*;
use rayvox_core::datagen::Split;
use rayvox_core::geometry::Mask;
use rayvox_core::handover::{standard_suite, Phase, ScenarioSet};
use rayvox_core::io::{
    load_checkpoint, read_manifest, read_scene, tensor_to_depth, write_scene, RunConfig, Tensor, SCENES_DIR,
    SCENE_FILES,
};
use rayvox_core::{Error, Model};

fn config(scenes: usize, epochs: usize) -> RunConfig {
    let mut c = RunConfig::default();
    c.dataset.scenes = scenes;
    c.train.epochs = epochs;
    c
}

/// Relative path -> bytes of every file under `root`.
fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn rayvox(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rayvox")).args(args).output().unwrap()
}

#[test]
fn single_scene_dataset_has_six_files_and_one_entry() {
    let dir = tempfile::tempdir().unwrap();
    let m = cmd_gen_data(&config(1, 0), dir.path()).unwrap();
    assert_eq!(m.scenes.len(), 1);
    let scene = dir.path().join(&m.scenes[0].path);
    let mut names: Vec<String> =
        std::fs::read_dir(&scene).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    let mut expected: Vec<String> = SCENE_FILES.iter().map(|s| s.to_string()).collect();
    expected.sort();
    assert_eq!(names, expected);
    assert!(m.scenes[0].path.starts_with(SCENES_DIR));
}

#[test]
fn regenerating_with_the_same_seed_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = config(4, 0);
    cmd_gen_data(&cfg, a.path()).unwrap();
    cmd_gen_data(&cfg, b.path()).unwrap();
    assert_eq!(snapshot(a.path()), snapshot(b.path()));
}

#[test]
fn manifest_split_counts_follow_seven_two_one() {
    let dir = tempfile::tempdir().unwrap();
    let m = cmd_gen_data(&config(23, 0), dir.path()).unwrap();
    // floor(0.7 * 23) = 16, floor(0.2 * 23) = 4, rest 3.
    assert_eq!((m.splits.train, m.splits.val, m.splits.test), (16, 4, 3));
    assert_eq!(m.entries(Some(Split::Test)).count(), 3);
    assert_eq!(m.config_hash, config(23, 0).hash());
}

#[test]
fn zero_epoch_training_keeps_the_initial_model() {
    let (data, out) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = config(4, 0);
    cmd_gen_data(&cfg, data.path()).unwrap();
    let s = cmd_train(&cfg, data.path(), out.path(), |_| {}).unwrap();
    assert_eq!(s.epochs_run, 0);
    let (model, meta) = load_checkpoint(out.path()).unwrap();
    assert_eq!(model.params, Model::new(cfg.model.clone()).unwrap().params);
    assert_eq!(meta.config_hash, cfg.hash());
    assert_eq!(std::fs::read_to_string(out.path().join(TRAIN_LOG)).unwrap(), "");
}

#[test]
fn training_logs_one_line_per_epoch_with_the_hash() {
    let (data, out) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = config(10, 2);
    cmd_gen_data(&cfg, data.path()).unwrap();
    let mut seen = 0;
    cmd_train(&cfg, data.path(), out.path(), |_| seen += 1).unwrap();
    assert_eq!(seen, 2);
    let text = std::fs::read_to_string(out.path().join(TRAIN_LOG)).unwrap();
    let lines: Vec<LogLine> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|l| l.config_hash == cfg.hash()));
    assert_eq!(lines[1].epoch.epoch, 1);
}

#[test]
fn eval_reports_both_rows_and_refuses_drifted_configs() {
    let (data, out) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = config(10, 0);
    cmd_gen_data(&cfg, data.path()).unwrap();
    cmd_train(&cfg, data.path(), out.path(), |_| {}).unwrap();

    let r = cmd_eval(&cfg, out.path(), data.path(), None).unwrap();
    assert_eq!(r.rows.iter().map(|x| x.split).collect::<Vec<_>>(), [Split::Train, Split::Val, Split::Test]);
    assert!(r.rows.iter().all(|x| x.corrupted.pixels > 0 && x.corrupted.pixels == x.restored.pixels));
    let table = r.table();
    assert!(table.contains("test restored") && table.contains("test corrupted"));

    let mut other = cfg.clone();
    other.train.lr *= 2.0;
    let e = cmd_eval(&other, out.path(), data.path(), Some(Split::Test)).unwrap_err();
    assert!(matches!(e, Error::ConfigDrift { .. }));
    assert_eq!(exit_code(&e), 5);
}

#[test]
fn binary_exit_codes_distinguish_failures() {
    let (data, out, tmp) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = config(5, 0);
    let cfg_path = tmp.path().join("run.json");
    std::fs::write(&cfg_path, cfg.canonical_json()).unwrap();
    let cfg_arg = cfg_path.to_str().unwrap();
    let (d, o) = (data.path().to_str().unwrap(), out.path().to_str().unwrap());

    assert_eq!(rayvox(&["gen-data", "--config", cfg_arg, "--out", d]).status.code(), Some(0));
    assert_eq!(rayvox(&["train", "--config", cfg_arg, "--data", d, "--out", o]).status.code(), Some(0));
    let ok = rayvox(&["eval", "--config", cfg_arg, "--checkpoint", o, "--data", d, "--split", "all"]);
    assert_eq!(ok.status.code(), Some(0));

    // Defaults hash differently from the training config.
    let drift = rayvox(&["eval", "--checkpoint", o, "--data", d]);
    assert_eq!(drift.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&drift.stderr).contains("config drift"));

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"dataset": {"scenes": 3, "colour": 1}}"#).unwrap();
    let r = rayvox(&["gen-data", "--config", bad.to_str().unwrap(), "--out", d]);
    assert_eq!(r.status.code(), Some(2));

    let missing = rayvox(&["eval", "--config", cfg_arg, "--checkpoint", o, "--data", tmp.path().to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn masked_dump_has_one_row_per_restored_pixel_and_reruns_match() {
    let (data, ck) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = config(3, 0);
    let m = cmd_gen_data(&cfg, data.path()).unwrap();
    cmd_train(&cfg, data.path(), ck.path(), |_| {}).unwrap();
    let scene = data.path().join(&m.scenes[0].path);

    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let s = cmd_restore(ck.path(), &scene, a.path(), true).unwrap();
    cmd_restore(ck.path(), &scene, b.path(), true).unwrap();
    assert_eq!(snapshot(a.path()), snapshot(b.path()));

    let rows = std::fs::read_to_string(a.path().join(POINT_DUMP)).unwrap().lines().count();
    assert_eq!(rows, s.restored);
    assert_eq!(s.points, s.restored);
    assert!(s.restored > 0);
    assert_eq!(s.restored + s.unrestored, m.scenes[0].object_pixels);

    // Unmasked dumps cover every valid pixel of the restored depth.
    let c = tempfile::tempdir().unwrap();
    let full = cmd_restore(ck.path(), &scene, c.path(), false).unwrap();
    let depth = tensor_to_depth(&Tensor::read(&c.path().join(RESTORED_DEPTH)).unwrap()).unwrap();
    assert_eq!(full.points, depth.valid_count());
}

#[test]
fn empty_mask_restores_to_the_input_depth() {
    let (data, ck, out) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = config(1, 0);
    let m = cmd_gen_data(&cfg, data.path()).unwrap();
    cmd_train(&cfg, data.path(), ck.path(), |_| {}).unwrap();
    let scene = data.path().join(&m.scenes[0].path);
    let manifest = read_manifest(data.path()).unwrap();
    let mut rec = read_scene(&scene, &manifest.intrinsics).unwrap();
    rec.mask_obj = Mask::empty(rec.mask_obj.width, rec.mask_obj.height);
    write_scene(&scene, &rec).unwrap();

    let s = cmd_restore(ck.path(), &scene, out.path(), true).unwrap();
    assert_eq!((s.restored, s.points), (0, 0));
    let depth = tensor_to_depth(&Tensor::read(&out.path().join(RESTORED_DEPTH)).unwrap()).unwrap();
    assert_eq!(depth.values, rec.depth_raw.values);
}

#[test]
fn handover_from_a_scenario_file_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("scenarios.json");
    let set = ScenarioSet { scenarios: standard_suite(0).unwrap().into_iter().take(3).collect() };
    std::fs::write(&file, serde_json::to_string(&set).unwrap()).unwrap();
    let cfg = RunConfig::default();
    let src = ScenarioSource::File(file);

    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let r = cmd_handover(&cfg, &BackendChoice::Oracle, &src, &a).unwrap();
    cmd_handover(&cfg, &BackendChoice::Oracle, &src, &b).unwrap();
    assert_eq!(snapshot(&a), snapshot(&b));

    assert_eq!(r.report.attempts, 3);
    assert_eq!(r.config_hash, cfg.hash());
    for (script, outcome) in set.scenarios.iter().zip(&r.report.outcomes) {
        let lines = std::fs::read_to_string(a.join(TRAJECTORY_DIR).join(format!("{}.jsonl", script.name))).unwrap();
        assert_eq!(lines.lines().count(), outcome.ticks);
        assert!(matches!(outcome.phase, Phase::Done | Phase::Failed));
    }
}

#[test]
fn suite_file_round_trips_into_the_same_scenarios() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("suite.json");
    assert_eq!(cmd_suite(2, &path).unwrap(), 30);
    let read: ScenarioSet = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(read.scenarios, standard_suite(2).unwrap());
}
