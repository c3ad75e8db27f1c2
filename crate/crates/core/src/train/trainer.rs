use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::dataset::{tile_origins, Dataset};
use super::eval::evaluate_scenes;
use super::metrics::MinSupport;
use super::TrainError;
use crate::error::Result;
use crate::model::{Checkpoint, Mode, Model, ModelConfig};
use crate::nn::{adam_step, Adam};
use crate::par;
use crate::raster::{boundary_exclusion_mask, months_horizon_len, Split};
use crate::rng::SplitMix64;
use crate::Tensor;

fn default_lr() -> f64 {
    1e-4
}
fn default_epochs() -> usize {
    50
}
fn default_one() -> usize {
    1
}
fn default_patch() -> usize {
    64
}
fn default_widths() -> Vec<usize> {
    vec![32, 64, 128]
}
fn default_hidden() -> usize {
    128
}
fn default_weather_hidden() -> usize {
    32
}
fn default_horizons() -> Vec<u32> {
    vec![12]
}
fn default_val_months() -> Vec<u32> {
    vec![12]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Patches per Adam step.
    #[serde(default = "default_one")]
    pub batch_patches: usize,
    #[serde(default = "default_patch")]
    pub patch_px: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    /// Extra boundary margin excluded from the loss, on top of the
    /// dataset's own mask. Unknown pixels are always excluded.
    #[serde(default)]
    pub margin: usize,
    /// Report a checkpoint every this many epochs (0 = never).
    #[serde(default)]
    pub checkpoint_every: usize,
    /// Each training patch is truncated to a horizon drawn uniformly from
    /// this list; `[12]` trains on full years only.
    #[serde(default = "default_horizons")]
    pub horizons_months: Vec<u32>,
    /// Horizons at which validation macro-F1 is measured; their mean
    /// selects the best epoch.
    #[serde(default = "default_val_months")]
    pub val_months: Vec<u32>,
    #[serde(default)]
    pub min_support: MinSupport,
    #[serde(default = "default_widths")]
    pub conv_widths: Vec<usize>,
    #[serde(default = "default_hidden")]
    pub lstm_hidden: usize,
    #[serde(default = "default_weather_hidden")]
    pub weather_hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl TrainConfig {
    pub fn validate(&self) -> std::result::Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        // lr = 0 is allowed: it freezes the parameters.
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and non-negative");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_patches == 0 {
            return bad("batch_patches must be at least 1");
        }
        if self.horizons_months.is_empty() || self.horizons_months.iter().any(|m| !(1..=12).contains(m)) {
            return bad("horizons_months must be a non-empty list of months in 1..=12");
        }
        if self.val_months.is_empty() || self.val_months.iter().any(|m| !(1..=12).contains(m)) {
            return bad("val_months must be a non-empty list of months in 1..=12");
        }
        Ok(())
    }

    pub fn model_config(&self, data: &Dataset) -> ModelConfig {
        ModelConfig {
            sat_channels: data.sat_channels(),
            weather_channels: data.weather_channels(),
            classes: data.classes(),
            conv_widths: self.conv_widths.clone(),
            lstm_hidden: self.lstm_hidden,
            weather_hidden: self.weather_hidden,
            mode: self.mode,
            sat_step_days: data.sat_step_days(),
            patch_px: self.patch_px,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossRow {
    /// Adam steps taken so far.
    pub step: u64,
    pub epoch: usize,
    /// Mean training loss over the epoch's steps.
    pub loss: f64,
    /// Validation macro-F1, averaged over the configured horizons.
    pub val_macro_f1: f64,
}

/// `step,epoch,loss,val_macro_f1`, one row per epoch.
pub fn loss_csv(rows: &[LossRow]) -> String {
    let mut s = String::from("step,epoch,loss,val_macro_f1\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{:.9},{:.6}", r.step, r.epoch, r.loss, r.val_macro_f1);
    }
    s
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Checkpoint of the epoch with the highest validation macro-F1
    /// (earliest on ties).
    pub best: Checkpoint,
    pub best_epoch: usize,
    pub best_val_macro_f1: f64,
    pub last: Checkpoint,
    pub curve: Vec<LossRow>,
}

struct Patch {
    sat: Tensor,
    weather: Option<Tensor>,
    targets: Vec<u16>,
    mask: Vec<bool>,
}

impl Patch {
    fn truncated(&self, months: u32, step_days: u32) -> (Tensor, Option<Tensor>) {
        if months == 12 {
            return (self.sat.clone(), self.weather.clone());
        }
        let t_s = months_horizon_len(self.sat.dim(0), step_days, 0, months).max(1);
        let weather = self.weather.as_ref().map(|w| w.slice_outer(0, months_horizon_len(w.dim(0), 1, 0, months).max(1)));
        (self.sat.slice_outer(0, t_s), weather)
    }
}

fn training_patches(data: &Dataset, cfg: &TrainConfig) -> Vec<Patch> {
    let p = cfg.patch_px;
    let mut out = Vec::new();
    for s in data.split(Split::Train) {
        let margin = boundary_exclusion_mask(s.height(), s.width(), cfg.margin);
        for (r, c) in tile_origins(s.height(), s.width(), p) {
            let labels = s.labels.crop(r, c, p, p);
            let base = s.mask.crop(r, c, p, p);
            let extra = margin.crop(r, c, p, p);
            let mask: Vec<bool> = base.valid.iter().zip(&extra.valid).map(|(&a, &b)| a && b).collect();
            if !mask.iter().any(|&m| m) {
                continue;
            }
            out.push(Patch {
                sat: s.sat_patch(r, c, p),
                weather: (cfg.mode == Mode::Wstatt).then(|| s.weather.clone()),
                targets: labels.ids().to_vec(),
                mask,
            });
        }
    }
    out
}

/// Trains with no periodic checkpoint hook.
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(data, cfg, |_| Ok(()))
}

/// Adam on the masked cross-entropy, one pass over the shuffled training
/// tiles per epoch, keeping the epoch with the best validation macro-F1.
/// `on_checkpoint` receives the current state every `checkpoint_every`
/// epochs.
pub fn train_with(data: &Dataset, cfg: &TrainConfig, mut on_checkpoint: impl FnMut(&Checkpoint) -> Result<()>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let val = data.split(Split::Val);
    if val.is_empty() {
        return Err(TrainError::Data("dataset has no validation scenes".into()).into());
    }
    let patches = training_patches(data, cfg);
    if patches.is_empty() {
        return Err(TrainError::Data("no training patch has labelled pixels".into()).into());
    }
    let model_cfg = cfg.model_config(data);
    let step_days = model_cfg.sat_step_days;
    let mut model = Model::new(model_cfg, cfg.seed)?;
    let opt = Adam { lr: cfg.lr, ..Adam::default() };
    let mut order_rng = SplitMix64::derive(cfg.seed, 0x5348_5546);
    let mut horizon_rng = SplitMix64::derive(cfg.seed, 0x484f_5249);

    let mut step = 0u64;
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(Checkpoint, f64)> = None;
    let mut order: Vec<usize> = (0..patches.len()).collect();
    for epoch in 1..=cfg.epochs {
        order_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_patches) {
            step += 1;
            let jobs: Vec<(usize, u32)> = batch
                .iter()
                .map(|&i| (i, cfg.horizons_months[horizon_rng.below(cfg.horizons_months.len())]))
                .collect();
            let results = par::map_slice(&jobs, |&(i, months)| {
                let p = &patches[i];
                let (sat, weather) = p.truncated(months, step_days);
                model.loss_and_grads(&sat, weather.as_ref(), &p.targets, &p.mask)
            });
            model.params_mut().zero_grads();
            let mut loss = 0.0;
            for r in results {
                let (l, g) = r?;
                loss += l;
                model.params_mut().accumulate(&g)?;
            }
            let scale = 1.0 / batch.len() as f64;
            loss *= scale;
            if !loss.is_finite() || !model.params().grads_finite() {
                return Err(TrainError::Diverged { step, epoch, loss }.into());
            }
            model.params_mut().scale_grads(scale);
            adam_step(model.params_mut(), &opt, step);
            loss_sum += loss;
            batches += 1;
        }
        let mut val_f1 = 0.0;
        for &m in &cfg.val_months {
            val_f1 += evaluate_scenes(&model, &val, Some(m), cfg.min_support)?.macro_f1;
        }
        val_f1 /= cfg.val_months.len() as f64;
        curve.push(LossRow { step, epoch, loss: loss_sum / batches as f64, val_macro_f1: val_f1 });
        let ckpt = || Checkpoint { model: model.clone(), epoch, seed: cfg.seed, adam_step: step };
        if best.as_ref().is_none_or(|(_, f)| val_f1 > *f) {
            best = Some((ckpt(), val_f1));
        }
        if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
            on_checkpoint(&ckpt())?;
        }
    }
    let (best, best_val_macro_f1) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        best_epoch: best.epoch,
        best,
        best_val_macro_f1,
        last: Checkpoint { model, epoch: cfg.epochs, seed: cfg.seed, adam_step: step },
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{LabelGrid, RasterTimeSeries};
    use crate::synth::{SceneData, SceneEntry};

    /// Two classes split left/right; band 0 carries the class, band 1 is noise.
    fn micro_scene(id: &str, split: Split, seed: u64) -> SceneData {
        let (t_n, n) = (4, 8);
        let mut rng = SplitMix64::new(seed);
        let ids: Vec<u16> = (0..n * n).map(|k| if k % n < n / 2 { 1 } else { 2 }).collect();
        let mut sat = Vec::with_capacity(t_n * 2 * n * n);
        for _ in 0..t_n {
            sat.extend(ids.iter().map(|&c| if c == 1 { 0.8 } else { 0.2 } + 0.05 * rng.normal() as f32));
            sat.extend((0..n * n).map(|_| rng.next_f64() as f32));
        }
        let names = |k: usize| (0..k).map(|b| format!("b{b}")).collect::<Vec<_>>();
        let wx: Vec<f32> = (0..60).map(|d| (d as f32 * 0.1).sin()).collect();
        SceneData {
            entry: SceneEntry {
                id: id.into(),
                split,
                scene_seed: seed,
                weather_seed: seed,
                phase_shift: 0.0,
                satellite: String::new(),
                weather: String::new(),
                labels: String::new(),
            },
            satellite: RasterTimeSeries::new([t_n, 2, n, n], sat, names(2), 15, 0, None).unwrap(),
            weather: RasterTimeSeries::new([60, 1, 1, 1], wx, names(1), 1, 0, None).unwrap(),
            labels: LabelGrid::new(n, n, ids, vec!["unknown".into(), "a".into(), "b".into()], 0).unwrap(),
        }
    }

    fn micro_data() -> Dataset {
        let scenes = vec![micro_scene("t0", Split::Train, 1), micro_scene("v0", Split::Val, 2)];
        Dataset::from_scenes(scenes, 0, None).unwrap()
    }

    fn micro_cfg() -> TrainConfig {
        TrainConfig { patch_px: 8, conv_widths: vec![4], lstm_hidden: 4, weather_hidden: 3, epochs: 5, ..TrainConfig::default() }
    }

    #[test]
    fn zero_lr_freezes_parameters() {
        let data = micro_data();
        let cfg = TrainConfig { lr: 0.0, ..micro_cfg() };
        let out = train(&data, &cfg).unwrap();
        let init = Model::new(cfg.model_config(&data), cfg.seed).unwrap();
        for (a, b) in out.last.model.params().params().iter().zip(init.params().params()) {
            assert_eq!(a.value, b.value, "{}", a.name);
        }
        let first = out.curve[0].loss;
        assert!(out.curve.iter().all(|r| r.loss == first));
    }

    #[test]
    fn separable_micro_scene_is_learned() {
        let data = micro_data();
        let cfg = TrainConfig { lr: 1e-2, epochs: 200, ..micro_cfg() };
        let out = train(&data, &cfg).unwrap();
        assert_eq!(out.curve.last().unwrap().step, 200);
        let loss = out.curve.last().unwrap().loss;
        assert!(loss < 0.1, "final loss {loss}");
        assert_eq!(out.best_val_macro_f1, 1.0);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let data = micro_data();
        let cfg = TrainConfig { lr: 1e-3, horizons_months: vec![1, 12], ..micro_cfg() };
        let a = train(&data, &cfg).unwrap();
        let b = train(&data, &cfg).unwrap();
        assert_eq!(loss_csv(&a.curve), loss_csv(&b.curve));
        assert_eq!(a.best.encode(true), b.best.encode(true));
        assert_eq!(a.last.encode(true), b.last.encode(true));
    }

    #[test]
    fn statt_mode_trains_without_weather() {
        let data = micro_data();
        let cfg = TrainConfig { mode: Mode::StattAblation, ..micro_cfg() };
        let out = train(&data, &cfg).unwrap();
        assert!(out.last.model.params().index_of("wx_lstm.fwd.wz_f").is_err());
    }

    #[test]
    fn checkpoint_cadence() {
        let data = micro_data();
        let cfg = TrainConfig { checkpoint_every: 2, ..micro_cfg() };
        let mut epochs = Vec::new();
        train_with(&data, &cfg, |c| {
            epochs.push(c.epoch);
            Ok(())
        })
        .unwrap();
        assert_eq!(epochs, vec![2, 4]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { epochs: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { lr: -1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { horizons_months: vec![13], ..TrainConfig::default() }.validate().is_err());
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epoch": 3}"#).is_err());
        let d = TrainConfig::default();
        assert_eq!((d.lr, d.epochs), (1e-4, 50));
    }

    #[test]
    fn missing_validation_split_is_an_error() {
        let data = Dataset::from_scenes(vec![micro_scene("t0", Split::Train, 1)], 0, None).unwrap();
        assert!(train(&data, &micro_cfg()).is_err());
    }
}
