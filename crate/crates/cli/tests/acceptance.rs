//! End-to-end acceptance run: one PASS/FAIL line per criterion. Exits
//! non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rayvox_cli::*;
use rayvox_core::datagen::{generate_scene, SpecDistribution, Split};
use rayvox_core::features::HandKeypoints;
use rayvox_core::geometry::{
    backproject, build_voxel_grid, compose_depth, pixel_ray, traverse, traverse_all, ScoredPair, DEFAULT_MARGIN,
    DEFAULT_RESOLUTION,
};
use rayvox_core::handover::{estimate_hand_motion, standard_suite};
use rayvox_core::io::RunConfig;
use rayvox_core::metrics::{evaluate, MetricReport};
use rayvox_core::network::ModelConfig;
use rayvox_core::training::{build_targets, total_loss, LossWeights};
use rayvox_core::{DepthImage, Mask, Mat3, Model, Ray, Vec3, VoxelGrid};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Duration, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn shipped_config(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::load(&path).expect("shipped config loads")
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
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

/// Loss gradient against central differences, eight entries of every block.
fn gradient_check() -> Outcome {
    let dist = SpecDistribution { width: 32, height: 32, ..Default::default() };
    let (_, scene) = generate_scene(&dist, None, 7).map_err(err)?;
    let mut m = Model::new(ModelConfig::default()).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // Zero-initialised biases would leave some paths untested.
    m.params.iter_mut().for_each(|x| *x += rng.random_range(-0.01..0.01));
    let w = LossWeights::default();
    let mut g = vec![0.0; m.param_count()];
    let r = total_loss(&m, &scene, &w, Some(&mut g)).map_err(err)?;
    ensure(r.supervised > 0, || "scene has no supervised rays".into())?;

    let h = 1e-6;
    let mut worst = (0.0f64, String::new());
    let mut checked = 0;
    for b in &m.layout.blocks {
        for _ in 0..8 {
            let i = b.offset + rng.random_range(0..b.len());
            let mut mp = m.clone();
            mp.params[i] += h;
            let fp = total_loss(&mp, &scene, &w, None).map_err(err)?.total;
            mp.params[i] -= 2.0 * h;
            let fm = total_loss(&mp, &scene, &w, None).map_err(err)?.total;
            let fd = (fp - fm) / (2.0 * h);
            let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-4);
            if rel > worst.0 {
                worst = (rel, format!("{}[{}]: {} vs {fd}", b.name, i - b.offset, g[i]));
            }
            checked += 1;
        }
    }
    ensure(worst.0 < 1e-4, || format!("relative error {:.2e} at {}", worst.0, worst.1))?;
    Ok(format!("{} blocks, {checked} entries, worst relative error {:.2e}", m.layout.blocks.len(), worst.0))
}

/// Distinct cells met by sampling the ray at spacing `h`.
fn sampled_cells(g: &VoxelGrid, dir: &Vec3, t_max: f64, h: f64) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for i in 0..=(t_max / h).ceil() as usize {
        if let Some(c) = g.locate(&(dir * ((i as f64 + 0.5) * h))) {
            let id = g.linear_id(c);
            if out.last() != Some(&id) {
                out.push(id);
            }
        }
    }
    out
}

/// True when plane crossings of different axes lie within `eps` of each
/// other (the order of corner cells is then not observable by sampling).
fn is_tie(g: &VoxelGrid, dir: &Vec3, t_max: f64, eps: f64) -> bool {
    let mut cross = Vec::new();
    for a in 0..3 {
        for k in 0..=g.resolution {
            let plane = g.origin[a] + k as f64 * g.cell_size[a];
            if dir[a] == 0.0 {
                if plane.abs() < eps {
                    return true;
                }
            } else if (0.0..t_max).contains(&(plane / dir[a])) {
                cross.push((plane / dir[a], a));
            }
        }
    }
    cross.sort_by(|x, y| x.0.total_cmp(&y.0));
    cross.windows(2).any(|w| w[0].1 != w[1].1 && w[1].0 - w[0].0 < eps)
}

fn traversal_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut cases, mut ties, mut misses) = (0, 0, 0);
    while cases < 500 {
        let origin = Vec3::new(rng.random_range(-0.25..0.1), rng.random_range(-0.25..0.1), rng.random_range(0.2..0.9));
        let cell =
            Vec3::new(rng.random_range(0.004..0.05), rng.random_range(0.004..0.05), rng.random_range(0.004..0.05));
        let res = rng.random_range(1..=8usize);
        let g = VoxelGrid::with_box(origin, cell, res);
        let extent = cell * res as f64;
        let aim = Vec3::new(rng.random(), rng.random(), rng.random());
        let target = origin + extent.component_mul(&aim) + Vec3::new(rng.random_range(-0.015..0.015), 0.0, 0.0);
        let dir = target.normalize();
        let far = (0..8)
            .map(|k| {
                let c = Vec3::new((k & 1) as f64, ((k >> 1) & 1) as f64, ((k >> 2) & 1) as f64);
                (origin + extent.component_mul(&c)).norm()
            })
            .fold(0.0, f64::max)
            * 1.01;
        let h = cell.min() / 400.0;
        if is_tie(&g, &dir, far, 4.0 * h) {
            ties += 1;
            continue;
        }
        let walked: Vec<usize> = traverse_all(&g, &Ray { pixel: (0, 0), dir }).iter().map(|w| w.0).collect();
        let expected = sampled_cells(&g, &dir, far, h);
        ensure(walked == expected, || format!("case {cases}: walk {walked:?} vs sampled {expected:?}"))?;
        misses += usize::from(expected.is_empty());
        cases += 1;
    }
    Ok(format!("{cases} cases ({misses} missing the grid), {ties} ties excluded"))
}

fn compose_oracle() -> Outcome {
    let dist = SpecDistribution::default();
    let (mut supervised, mut worst) = (0usize, 0.0f64);
    for s in 0..50u64 {
        let (_, rec) = generate_scene(&dist, None, 500 + s).map_err(err)?;
        let k = &rec.intrinsics;
        let cloud = backproject(&rec.depth_raw, k).map_err(err)?;
        let grid = build_voxel_grid(&cloud.points, DEFAULT_RESOLUTION, DEFAULT_MARGIN).map_err(err)?;
        let rays: Vec<Ray> =
            rec.mask_obj.pixels().map(|(u, v)| pixel_ray(k, u, v)).collect::<Result<_, _>>().map_err(err)?;
        let pairs: Vec<_> = rays.iter().enumerate().map(|(i, r)| traverse(&grid, r, i)).collect();
        let targets = build_targets(&rec.depth_gt, &rays, &pairs);
        let scored: Vec<Vec<ScoredPair>> = pairs
            .iter()
            .zip(&targets.rays)
            .map(|(ps, t)| {
                let Some(t) = t else { return Vec::new() };
                ps.iter()
                    .enumerate()
                    .map(|(j, &pair)| ScoredPair {
                        pair,
                        logit: if j == t.pair { 5.0 } else { -5.0 },
                        offset: if j == t.pair { t.offset } else { 0.0 },
                    })
                    .collect()
            })
            .collect();
        let out = compose_depth(k, &rays, &scored).map_err(err)?;
        for (ray, t) in rays.iter().zip(&targets.rays) {
            if t.is_some() {
                let (u, v) = ray.pixel;
                worst = worst.max((out.get(u, v) - rec.depth_gt.get(u, v)).abs());
                supervised += 1;
            }
        }
    }
    ensure(supervised > 0, || "no supervised rays".into())?;
    ensure(worst <= 1e-6, || format!("worst error {worst:.3e} m"))?;
    Ok(format!("50 scenes, {supervised} supervised rays, worst error {worst:.2e} m"))
}

fn restored_vs_corrupted(cfg: &RunConfig, work: &Path, tag: &str) -> Result<(MetricReport, MetricReport), String> {
    let data = work.join(format!("{tag}-data"));
    let ckpt = work.join(format!("{tag}-ckpt"));
    let start = Instant::now();
    cmd_gen_data(cfg, &data).map_err(err)?;
    cmd_train(cfg, &data, &ckpt, |e| {
        let v = e.val.map(|v| v.rmse).unwrap_or(f64::NAN);
        eprintln!(
            "  [{tag}] epoch {:>2} loss {:.4} val rmse {v:.4} ({:.0}s)",
            e.epoch,
            e.loss,
            start.elapsed().as_secs_f64()
        );
    })
    .map_err(err)?;
    let r = cmd_eval(cfg, &ckpt, &data, Some(Split::Test)).map_err(err)?;
    let row = &r.rows[0];
    Ok((row.restored, row.corrupted))
}

fn desk_learning(work: &Path) -> Outcome {
    let cfg = shipped_config("desk.json");
    let (restored, corrupted) = restored_vs_corrupted(&cfg, work, "desk")?;
    let detail = format!(
        "test RMSE {:.4} vs corrupted {:.4}; delta1.05 {:.1}% vs {:.1}%",
        restored.rmse, corrupted.rmse, restored.delta_1_05, corrupted.delta_1_05
    );
    ensure(restored.rmse < 0.5 * corrupted.rmse && restored.delta_1_05 > corrupted.delta_1_05 + 20.0, || {
        detail.clone()
    })?;
    Ok(detail)
}

fn ablation_direction(work: &Path) -> Outcome {
    let (full, _) = restored_vs_corrupted(&shipped_config("holdout.json"), work, "full")?;
    let (off, _) = restored_vs_corrupted(&shipped_config("holdout_no_hand.json"), work, "no-hand")?;
    let detail = format!(
        "unknown-category test RMSE: full {:.5}, hand feature off {:.5} (margin {:+.5})",
        full.rmse,
        off.rmse,
        off.rmse - full.rmse
    );
    ensure(full.rmse <= off.rmse, || detail.clone())?;
    Ok(detail)
}

fn random_rotation(rng: &mut impl Rng) -> Mat3 {
    let axis = Unit::new_normalize(Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ));
    Rotation3::from_axis_angle(&axis, rng.random_range(0.0..std::f64::consts::PI)).into_inner()
}

/// `current = R0 (p - w) + w + t0`: a rotation about the wrist, then a
/// translation.
fn moved(kp: &[Vec3], r0: &Mat3, t0: &Vec3) -> HandKeypoints {
    let w = kp[0];
    HandKeypoints::new(kp.iter().map(|p| r0 * (p - w) + w + t0).collect()).unwrap()
}

fn kabsch() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let pts: Vec<Vec3> = (0..21)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-0.08..0.08),
                    rng.random_range(-0.08..0.08),
                    0.5 + rng.random_range(-0.05..0.05),
                )
            })
            .collect();
        let r0 = random_rotation(&mut rng);
        let t0 = Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
        let (r, t) =
            estimate_hand_motion(&HandKeypoints::new(pts.clone()).unwrap(), &moved(&pts, &r0, &t0)).map_err(err)?;
        worst.0 = worst.0.max((r - r0).norm());
        worst.1 = worst.1.max((t - t0).norm());
    }
    ensure(worst.0 < 1e-9 && worst.1 < 1e-9, || format!("worst errors R {:.2e}, T {:.2e}", worst.0, worst.1))?;

    // Coplanar hands leave one singular value at zero, so the raw SVD
    // product is a reflection about half the time; the flip must restore
    // the true rotation.
    let mut flips = 0;
    for _ in 0..40 {
        let pts: Vec<Vec3> =
            (0..21).map(|_| Vec3::new(rng.random_range(-0.08..0.08), rng.random_range(-0.08..0.08), 0.5)).collect();
        let r0 = random_rotation(&mut rng);
        let cur = moved(&pts, &r0, &Vec3::zeros());
        let w = pts[0];
        let mut h = Mat3::zeros();
        for (a, b) in pts.iter().zip(cur.points()) {
            h += (a - w) * (b - w).transpose();
        }
        let svd = h.svd(true, true);
        let raw = svd.v_t.unwrap().transpose() * svd.u.unwrap().transpose();
        flips += usize::from(raw.determinant() < 0.0);
        let (r, _) = estimate_hand_motion(&HandKeypoints::new(pts).unwrap(), &cur).map_err(err)?;
        ensure((r - r0).norm() < 1e-9, || format!("coplanar case off by {:.2e}", (r - r0).norm()))?;
    }
    ensure(flips > 0, || "no coplanar case exercised the flip".into())?;

    // A mirrored hand has a reflection as its unconstrained optimum.
    let pts: Vec<Vec3> = (0..21).map(|_| Vec3::new(rng.random(), rng.random(), rng.random()) * 0.1).collect();
    let w = pts[0];
    let mirror = Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, 1.0));
    let mirrored = HandKeypoints::new(pts.iter().map(|p| mirror * (p - w) + w).collect()).unwrap();
    let (r, _) = estimate_hand_motion(&HandKeypoints::new(pts).unwrap(), &mirrored).map_err(err)?;
    ensure((r.determinant() - 1.0).abs() < 1e-9 && (r.transpose() * r - Mat3::identity()).norm() < 1e-9, || {
        format!("mirror case gave det {}", r.determinant())
    })?;
    Ok(format!(
        "100 motions, worst R {:.1e} T {:.1e}; 40 coplanar cases ({flips} flipped); mirror gives a rotation",
        worst.0, worst.1
    ))
}

fn oracle_metrics(pred: &DepthImage, gt: &DepthImage, mask: &Mask) -> [f64; 6] {
    let (mut n, mut sq, mut rel, mut abs) = (0.0, 0.0, 0.0, 0.0);
    let mut hits = [0.0; 3];
    for v in 0..gt.height {
        for u in 0..gt.width {
            if !mask.get(u, v) {
                continue;
            }
            let (d, t) = (pred.get(u, v), gt.get(u, v));
            n += 1.0;
            sq += (d - t) * (d - t);
            rel += (d - t).abs() / t;
            abs += (d - t).abs();
            for (hit, th) in hits.iter_mut().zip([1.05, 1.10, 1.25]) {
                if d > 0.0 && (d / t).max(t / d) < th {
                    *hit += 1.0;
                }
            }
        }
    }
    [(sq / n).sqrt(), rel / n, abs / n, 100.0 * hits[0] / n, 100.0 * hits[1] / n, 100.0 * hits[2] / n]
}

fn as_array(r: &MetricReport) -> [f64; 6] {
    [r.rmse, r.rel, r.mae, r.delta_1_05, r.delta_1_10, r.delta_1_25]
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = 50;
        let gt =
            DepthImage::from_values(n, n, (0..n * n).map(|_| rng.random_range(0.3..1.5)).collect()).map_err(err)?;
        let pred = DepthImage::from_values(
            n,
            n,
            gt.values
                .iter()
                .map(|&t| if rng.random::<f64>() < 0.1 { 0.0 } else { t * rng.random_range(0.7..1.3) })
                .collect(),
        )
        .map_err(err)?;
        let mut mask = Mask::from_data(n, n, (0..n * n).map(|_| rng.random::<f64>() < 0.6).collect()).map_err(err)?;
        mask.set(0, 0, true);
        let got = as_array(&evaluate(&pred, &gt, &mask).map_err(err)?);
        for (a, b) in got.iter().zip(oracle_metrics(&pred, &gt, &mask)) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("worst deviation {worst:.2e}"))?;

    let gt = DepthImage::from_values(4, 4, (0..16).map(|i| 0.4 + 0.05 * i as f64).collect()).map_err(err)?;
    let mask = Mask::from_data(4, 4, vec![true; 16]).map_err(err)?;
    let scaled =
        |f: &dyn Fn(f64) -> f64| DepthImage::from_values(4, 4, gt.values.iter().map(|&t| f(t)).collect()).unwrap();
    let same = as_array(&evaluate(&gt, &gt, &mask).map_err(err)?);
    ensure(same == [0.0, 0.0, 0.0, 100.0, 100.0, 100.0], || format!("pred = gt gave {same:?}"))?;
    let r = evaluate(&scaled(&|t| 1.08 * t), &gt, &mask).map_err(err)?;
    ensure(
        r.delta_1_05 == 0.0 && r.delta_1_10 == 100.0 && r.delta_1_25 == 100.0 && (r.rel - 0.08).abs() < 1e-15,
        || format!("1.08 x gt gave {r:?}"),
    )?;
    let r = evaluate(&scaled(&|t| t + 0.01), &gt, &mask).map_err(err)?;
    ensure((r.rmse - 0.01).abs() < 1e-15 && (r.mae - 0.01).abs() < 1e-15, || format!("gt + 1 cm gave {r:?}"))?;
    Ok(format!("20 random 50x50 instances, worst deviation {worst:.1e}; examples hold"))
}

fn handover_benchmark(work: &Path) -> Outcome {
    let cfg = RunConfig::default();
    let suite = ScenarioSource::Suite(0);
    let oracle = cmd_handover(&cfg, &BackendChoice::Oracle, &suite, &work.join("handover-oracle")).map_err(err)?;
    let pass =
        cmd_handover(&cfg, &BackendChoice::Passthrough, &suite, &work.join("handover-passthrough")).map_err(err)?;
    let moving: Vec<String> =
        standard_suite(0).map_err(err)?.into_iter().filter(|s| !s.motions.is_empty()).map(|s| s.name).collect();
    let moving_done = oracle.report.outcomes.iter().filter(|o| o.success && moving.contains(&o.name)).count();
    print!("{}", oracle.report.table());
    print!("{}", pass.report.table());
    let detail = format!(
        "oracle {}/{} ({moving_done}/{} with mid-approach hand motion), passthrough {}/{}",
        oracle.report.successes,
        oracle.report.attempts,
        moving.len(),
        pass.report.successes,
        pass.report.attempts
    );
    ensure(
        oracle.report.attempts == 30
            && moving.len() == 2
            && oracle.report.successes >= 29
            && pass.report.rate < oracle.report.rate,
        || detail.clone(),
    )?;
    Ok(detail)
}

fn determinism(work: &Path) -> Outcome {
    let mut cfg = RunConfig::default();
    cfg.dataset.scenes = 12;
    cfg.train.epochs = 2;
    let run = |tag: &str| -> Result<[BTreeMap<PathBuf, Vec<u8>>; 4], String> {
        let root = work.join(format!("det-{tag}"));
        let (data, ckpt, ho) = (root.join("data"), root.join("ckpt"), root.join("handover"));
        cmd_gen_data(&cfg, &data).map_err(err)?;
        cmd_train(&cfg, &data, &ckpt, |_| {}).map_err(err)?;
        let ev = cmd_eval(&cfg, &ckpt, &data, None).map_err(err)?;
        let eval = BTreeMap::from([(PathBuf::from("eval.json"), serde_json::to_vec(&ev).map_err(err)?)]);
        cmd_handover(&cfg, &BackendChoice::Oracle, &ScenarioSource::Suite(0), &ho).map_err(err)?;
        Ok([snapshot(&data), snapshot(&ckpt), eval, snapshot(&ho)])
    };
    let (a, b) = (run("a")?, run("b")?);
    let names = ["gen-data", "train", "eval", "handover"];
    let files: usize = a.iter().map(BTreeMap::len).sum();
    for ((x, y), name) in a.iter().zip(&b).zip(names) {
        ensure(x == y, || format!("{name} outputs differ between runs"))?;
    }
    Ok(format!("gen-data, train, eval, handover: {files} files bit-identical across two runs"))
}

fn main() {
    let work = tempfile::tempdir().expect("scratch directory");
    let w = work.path();
    let criteria: Vec<Criterion> = vec![
        ("1 gradient correctness", Duration::from_secs(300), Box::new(gradient_check)),
        ("2 traversal oracle", Duration::from_secs(30), Box::new(traversal_oracle)),
        ("3 composition round trip", Duration::from_secs(60), Box::new(compose_oracle)),
        ("4 desk-scale learning", Duration::from_secs(3600), Box::new(|| desk_learning(w))),
        ("5 hand-feature ablation", Duration::from_secs(7200), Box::new(|| ablation_direction(w))),
        ("6 Kabsch", Duration::from_secs(5), Box::new(kabsch)),
        ("7 metric oracle", Duration::from_secs(5), Box::new(metric_oracle)),
        ("8 handover benchmark", Duration::from_secs(600), Box::new(|| handover_benchmark(w))),
        ("9 determinism", Duration::from_secs(3600), Box::new(|| determinism(w))),
    ];
    let mut failed = 0;
    for (name, budget, check) in &criteria {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let result = result.and_then(|d| {
            ensure(took <= *budget, || format!("{d}; took {took:.1?}, budget {budget:?}"))?;
            Ok(d)
        });
        match result {
            Ok(d) => println!("PASS criterion {name}: {d} [{took:.1?}]"),
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {name}: {e} [{took:.1?}]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
