use std::fmt::Write as _;

use super::dataset::{tile_origins, SceneSample};
use super::metrics::{Confusion, MetricsReport, MinSupport};
use super::TrainError;
use crate::error::Result;
use crate::model::{Mode, Model};
use crate::par;

/// Months horizons of the early-prediction table.
pub const DEFAULT_MONTHS: [u32; 4] = [6, 8, 10, 12];

fn weather_for<'a>(model: &Model, scene: &'a SceneSample) -> Option<&'a crate::Tensor> {
    match model.config().mode {
        Mode::Wstatt => Some(&scene.weather),
        Mode::StattAblation => None,
    }
}

/// Per-pixel class ids for a whole scene, tiled at the model's patch size.
/// `months = None` feeds the full series.
pub fn predict_scene(model: &Model, scene: &SceneSample, months: Option<u32>) -> Result<Vec<u16>> {
    let p = model.config().patch_px;
    let (h, w) = (scene.height(), scene.width());
    let tiles = tile_origins(h, w, p);
    if tiles.is_empty() {
        return Err(TrainError::Data(format!("scene {} ({h}×{w}) is smaller than the {p}px patch", scene.id)).into());
    }
    let weather = weather_for(model, scene);
    let preds = par::map_slice(&tiles, |&(r, c)| -> Result<Vec<u16>> {
        let sat = scene.sat_patch(r, c, p);
        let labels = match months {
            Some(m) => model.predict_early(&sat, weather, m)?.labels,
            None => {
                let fwd = model.forward(&sat, weather)?;
                crate::model::argmax_classes(&fwd.probs)
            }
        };
        Ok(labels)
    });
    let mut out = vec![0u16; h * w];
    for (&(r, c), pred) in tiles.iter().zip(preds) {
        let pred = pred?;
        for i in 0..p {
            out[(r + i) * w + c..(r + i) * w + c + p].copy_from_slice(&pred[i * p..(i + 1) * p]);
        }
    }
    Ok(out)
}

/// Pools the confusion counts of `scenes` into one report.
pub fn evaluate_scenes(model: &Model, scenes: &[&SceneSample], months: Option<u32>, min_support: MinSupport) -> Result<MetricsReport> {
    let first = scenes.first().ok_or_else(|| TrainError::Data("no scenes to evaluate".into()))?;
    let mut conf = Confusion::new(first.labels.class_table.len());
    for s in scenes {
        let pred = predict_scene(model, s, months)?;
        conf.add(&pred, &s.labels, &s.mask)?;
    }
    Ok(conf.report(&first.labels.class_table, first.labels.unknown_id, min_support, months)?)
}

/// One pooled report per horizon.
pub fn early_sweep(model: &Model, scenes: &[&SceneSample], months_list: &[u32], min_support: MinSupport) -> Result<Vec<MetricsReport>> {
    months_list.iter().map(|&m| evaluate_scenes(model, scenes, Some(m), min_support)).collect()
}

/// `class,months,f1`: the included classes and a `macro` row per horizon.
pub fn sweep_csv(reports: &[MetricsReport]) -> String {
    let mut s = String::from("class,months,f1\n");
    for r in reports {
        let m = r.months.map_or_else(|| "all".to_string(), |m| m.to_string());
        for c in r.included() {
            let _ = writeln!(s, "{},{m},{:.6}", c.name, c.f1);
        }
        let _ = writeln!(s, "macro,{m},{:.6}", r.macro_f1);
    }
    s
}

/// Spatially averaged attention over one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionProfile {
    /// Mean α per timestamp over all patch pixels.
    pub overall: Vec<f64>,
    /// Mean α per timestamp over the pixels of each class id, `None` when
    /// the class is absent from the patch.
    pub per_class: Vec<Option<Vec<f64>>>,
}

impl AttentionProfile {
    pub fn timestamps(&self) -> usize {
        self.overall.len()
    }

    /// `t,overall,class_0..class_{V−1}`; absent classes leave empty cells.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,overall");
        for c in 0..self.per_class.len() {
            let _ = write!(s, ",class_{c}");
        }
        s.push('\n');
        for t in 0..self.timestamps() {
            let _ = write!(s, "{t},{:.9}", self.overall[t]);
            for col in &self.per_class {
                match col {
                    Some(v) => {
                        let _ = write!(s, ",{:.9}", v[t]);
                    }
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Averages a `T×h×w` attention map, nearest-upsampled to the `P×P` patch,
/// over all pixels and over each class's pixels in `labels` (row-major P×P).
pub fn attention_profile(alpha: &crate::Tensor, labels: &[u16], classes: usize) -> Result<AttentionProfile> {
    let (t_n, h, w) = (alpha.dim(0), alpha.dim(1), alpha.dim(2));
    let p = (labels.len() as f64).sqrt() as usize;
    if p * p != labels.len() || p % h != 0 || h != w {
        return Err(TrainError::Data(format!("labels of {} pixels do not tile a {h}×{w} attention map", labels.len())).into());
    }
    let f = p / h;
    let mut sums = vec![vec![0.0; t_n]; classes];
    let mut counts = vec![0usize; classes];
    let mut overall = vec![0.0; t_n];
    for i in 0..p {
        for j in 0..p {
            let k = labels[i * p + j] as usize;
            if k >= classes {
                return Err(TrainError::Data(format!("class id {k} out of range")).into());
            }
            counts[k] += 1;
            for t in 0..t_n {
                let a = alpha.data()[(t * h + i / f) * w + j / f];
                sums[k][t] += a;
                overall[t] += a;
            }
        }
    }
    overall.iter_mut().for_each(|v| *v /= (p * p) as f64);
    let per_class = sums
        .into_iter()
        .zip(counts)
        .map(|(s, n)| (n > 0).then(|| s.into_iter().map(|v| v / n as f64).collect()))
        .collect();
    Ok(AttentionProfile { overall, per_class })
}

/// Attention profile of the `P×P` patch at `(row0, col0)` of `scene` after
/// truncating to `months`.
pub fn export_attention(model: &Model, scene: &SceneSample, row0: usize, col0: usize, months: u32) -> Result<AttentionProfile> {
    let p = model.config().patch_px;
    if row0 + p > scene.height() || col0 + p > scene.width() {
        return Err(TrainError::Data(format!("patch {row0}:{col0} of size {p} leaves scene {}", scene.id)).into());
    }
    let sat = scene.sat_patch(row0, col0, p);
    let pred = model.predict_early(&sat, weather_for(model, scene), months)?;
    let labels = scene.labels.crop(row0, col0, p, p);
    attention_profile(&pred.alpha, labels.ids(), model.config().classes)
}
