//! Masked depth metrics: RMSE, REL, MAE and ratio-threshold accuracies.

use serde::{Deserialize, Serialize};

use crate::network::restore;
use crate::{DepthImage, Error, Mask, Model, Result, SceneRecord};

pub const THRESHOLDS: [f64; 3] = [1.05, 1.10, 1.25];

/// Metrics over a set of pixels; thresholds are percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse: f64,
    pub rel: f64,
    pub mae: f64,
    pub delta_1_05: f64,
    pub delta_1_10: f64,
    pub delta_1_25: f64,
    pub pixels: usize,
}

/// Running sums behind a [`MetricReport`], so scenes aggregate by pixel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricSums {
    pub sq: f64,
    pub rel: f64,
    pub abs: f64,
    pub hits: [usize; 3],
    pub pixels: usize,
}

impl MetricSums {
    /// Adds one pixel; a zero prediction fails every threshold.
    pub fn add(&mut self, pred: f64, gt: f64) {
        let e = (pred - gt).abs();
        self.sq += e * e;
        self.abs += e;
        self.rel += e / gt;
        if pred > 0.0 {
            let ratio = (pred / gt).max(gt / pred);
            for (h, t) in self.hits.iter_mut().zip(THRESHOLDS) {
                if ratio < t {
                    *h += 1;
                }
            }
        }
        self.pixels += 1;
    }

    pub fn merge(&mut self, o: &MetricSums) {
        self.sq += o.sq;
        self.rel += o.rel;
        self.abs += o.abs;
        for (a, b) in self.hits.iter_mut().zip(o.hits) {
            *a += b;
        }
        self.pixels += o.pixels;
    }

    pub fn report(&self) -> Result<MetricReport> {
        if self.pixels == 0 {
            return Err(Error::InvalidInput("metrics over an empty mask".into()));
        }
        let n = self.pixels as f64;
        let pct = |h: usize| 100.0 * h as f64 / n;
        Ok(MetricReport {
            rmse: (self.sq / n).sqrt(),
            rel: self.rel / n,
            mae: self.abs / n,
            delta_1_05: pct(self.hits[0]),
            delta_1_10: pct(self.hits[1]),
            delta_1_25: pct(self.hits[2]),
            pixels: self.pixels,
        })
    }
}

/// Sums over the masked pixels of one image pair.
pub fn accumulate(pred: &DepthImage, gt: &DepthImage, mask: &Mask) -> Result<MetricSums> {
    if (pred.width, pred.height) != (gt.width, gt.height) || (mask.width, mask.height) != (gt.width, gt.height) {
        return Err(Error::DimensionMismatch("prediction, ground truth and mask differ in size".into()));
    }
    let mut s = MetricSums::default();
    for (u, v) in mask.pixels() {
        let g = gt.get(u, v);
        if !(g > 0.0) {
            return Err(Error::InvalidInput(format!("ground truth at ({u}, {v}) is {g}")));
        }
        s.add(pred.get(u, v), g);
    }
    Ok(s)
}

pub fn evaluate(pred: &DepthImage, gt: &DepthImage, mask: &Mask) -> Result<MetricReport> {
    accumulate(pred, gt, mask)?.report()
}

/// Restored and raw-input metrics of one scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub index: usize,
    pub restored: MetricReport,
    pub corrupted: MetricReport,
}

/// Pixel-weighted aggregate over a split plus the per-scene rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEvaluation {
    pub restored: MetricReport,
    pub corrupted: MetricReport,
    pub scenes: Vec<SceneMetrics>,
}

/// Restores every scene's object region and scores it, alongside the raw
/// input depth on the same masks. Scenes with an empty object mask are
/// skipped.
pub fn evaluate_dataset<'a>(
    model: &Model,
    scenes: impl IntoIterator<Item = (usize, &'a SceneRecord)>,
) -> Result<DatasetEvaluation> {
    let mut total_r = MetricSums::default();
    let mut total_c = MetricSums::default();
    let mut rows = Vec::new();
    for (index, s) in scenes {
        if s.mask_obj.count() == 0 {
            continue;
        }
        let out = restore(model, &s.input())?;
        let r = accumulate(&out.depth, &s.depth_gt, &s.mask_obj)?;
        let c = accumulate(&s.depth_raw, &s.depth_gt, &s.mask_obj)?;
        total_r.merge(&r);
        total_c.merge(&c);
        rows.push(SceneMetrics { index, restored: r.report()?, corrupted: c.report()? });
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("evaluation split is empty".into()));
    }
    Ok(DatasetEvaluation { restored: total_r.report()?, corrupted: total_c.report()?, scenes: rows })
}

/// Aligned text table, one row per named report.
pub fn format_table(rows: &[(&str, &MetricReport)]) -> String {
    let name_w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(6);
    let mut out = format!(
        "{:<name_w$}  {:>8}  {:>8}  {:>8}  {:>7}  {:>7}  {:>7}\n",
        "method", "RMSE", "REL", "MAE", "δ1.05", "δ1.10", "δ1.25"
    );
    for (name, r) in rows {
        out += &format!(
            "{:<name_w$}  {:>8.4}  {:>8.4}  {:>8.4}  {:>7.2}  {:>7.2}  {:>7.2}\n",
            name, r.rmse, r.rel, r.mae, r.delta_1_05, r.delta_1_10, r.delta_1_25
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(w: usize, h: usize, seed: u64) -> (DepthImage, Mask) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = DepthImage::from_values(w, h, (0..w * h).map(|_| rng.random_range(0.5..2.0)).collect()).unwrap();
        let mask = Mask::from_data(w, h, (0..w * h).map(|_| rng.random_bool(0.6)).collect()).unwrap();
        (gt, mask)
    }

    fn map(gt: &DepthImage, mut f: impl FnMut(f64) -> f64) -> DepthImage {
        DepthImage::from_values(gt.width, gt.height, gt.values.iter().map(|&d| f(d)).collect()).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let (gt, mask) = setup(10, 10, 1);
        let r = evaluate(&gt, &gt, &mask).unwrap();
        assert_eq!((r.rmse, r.rel, r.mae), (0.0, 0.0, 0.0));
        assert_eq!((r.delta_1_05, r.delta_1_10, r.delta_1_25), (100.0, 100.0, 100.0));
    }

    #[test]
    fn uniform_ratio_error() {
        let (gt, mask) = setup(10, 10, 2);
        let r = evaluate(&map(&gt, |d| 1.08 * d), &gt, &mask).unwrap();
        assert_eq!((r.delta_1_05, r.delta_1_10, r.delta_1_25), (0.0, 100.0, 100.0));
        assert!((r.rel - 0.08).abs() < 1e-12);
    }

    #[test]
    fn uniform_offset_error() {
        let (gt, mask) = setup(10, 10, 3);
        let r = evaluate(&map(&gt, |d| d + 0.01), &gt, &mask).unwrap();
        assert!((r.rmse - 0.01).abs() < 1e-12 && (r.mae - 0.01).abs() < 1e-12);
    }

    #[test]
    fn matches_nested_loop_oracle() {
        let (gt, mask) = setup(50, 50, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let pred = map(&gt, |d| if rng.random_bool(0.1) { 0.0 } else { d * rng.random_range(0.8..1.2) });
        let r = evaluate(&pred, &gt, &mask).unwrap();
        let (mut sq, mut rel, mut ab, mut n) = (0.0, 0.0, 0.0, 0.0);
        let mut hits = [0.0; 3];
        for v in 0..50 {
            for u in 0..50 {
                if !mask.get(u, v) {
                    continue;
                }
                let (p, g) = (pred.get(u, v), gt.get(u, v));
                sq += (p - g) * (p - g);
                ab += (p - g).abs();
                rel += (p - g).abs() / g;
                n += 1.0;
                for (h, t) in hits.iter_mut().zip([1.05, 1.10, 1.25]) {
                    if p > 0.0 && f64::max(p / g, g / p) < t {
                        *h += 1.0;
                    }
                }
            }
        }
        assert!((r.rmse - (sq / n).sqrt()).abs() <= 1e-12);
        assert!((r.rel - rel / n).abs() <= 1e-12);
        assert!((r.mae - ab / n).abs() <= 1e-12);
        assert!((r.delta_1_05 - 100.0 * hits[0] / n).abs() <= 1e-12);
        assert!((r.delta_1_10 - 100.0 * hits[1] / n).abs() <= 1e-12);
        assert!((r.delta_1_25 - 100.0 * hits[2] / n).abs() <= 1e-12);
    }

    #[test]
    fn rejects_empty_mask_and_bad_ground_truth() {
        let (gt, _) = setup(4, 4, 5);
        assert!(evaluate(&gt, &gt, &Mask::empty(4, 4)).is_err());
        let mut bad = gt.clone();
        bad.set(0, 0, 0.0);
        let mut m = Mask::empty(4, 4);
        m.set(0, 0, true);
        assert!(evaluate(&gt, &bad, &m).is_err());
    }

    #[test]
    fn table_lists_columns_in_order() {
        let (gt, mask) = setup(4, 4, 6);
        let r = evaluate(&gt, &gt, &mask).unwrap();
        let t = format_table(&[("restored", &r)]);
        let header = t.lines().next().unwrap();
        let pos: Vec<usize> =
            ["RMSE", "REL", "MAE", "δ1.05", "δ1.10", "δ1.25"].iter().map(|c| header.find(c).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(t.lines().count(), 2);
    }
}
