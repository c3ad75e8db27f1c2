use super::config::{Mode, ModelConfig};
use super::stages::{
    aggregate, aggregate_backward, aggregate_skips, aggregate_skips_backward, align_weather, attend, attend_backward, fuse,
    fuse_backward,
};
use super::ModelError;
use crate::nn::{
    bilstm, bilstm_backward, concat_channels, conv2d, conv2d_backward, cross_entropy_masked, nearest_upsample,
    nearest_upsample_backward, pointwise, pointwise_backward, softmax_axis, split_channels, Activation, BiLstmCache,
    LstmParams, ParamStore,
};
use crate::raster::months_horizon_len;
use crate::rng::SplitMix64;
use crate::Tensor;

/// Gradients in parameter-store order.
pub type Grads = Vec<Tensor>;

const DIRECTIONS: [&str; 2] = ["fwd", "bwd"];
const GATES: [&str; 4] = ["f", "i", "o", "g"];

#[derive(Debug, Clone, Copy)]
enum Init {
    Uniform(f64),
    Zeros,
}

struct ParamSpec {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

fn lstm_specs(prefix: &str, din: usize, dh: usize, out: &mut Vec<ParamSpec>) {
    let bound = 1.0 / (dh as f64).sqrt();
    for dir in DIRECTIONS {
        for g in GATES {
            out.push(ParamSpec { name: format!("{prefix}.{dir}.wz_{g}"), shape: vec![dh, din], init: Init::Uniform(bound) });
        }
        for g in GATES {
            out.push(ParamSpec { name: format!("{prefix}.{dir}.wh_{g}"), shape: vec![dh, dh], init: Init::Uniform(bound) });
        }
    }
}

fn conv_specs(prefix: &str, cout: usize, cin: usize, k: usize, out: &mut Vec<ParamSpec>) {
    let bound = 1.0 / ((cin * k * k) as f64).sqrt();
    out.push(ParamSpec { name: format!("{prefix}.weight"), shape: vec![cout, cin, k, k], init: Init::Uniform(bound) });
    out.push(ParamSpec { name: format!("{prefix}.bias"), shape: vec![cout], init: Init::Uniform(bound) });
}

/// Parameter names, shapes and initializers, in store order.
fn param_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let mut out = Vec::new();
    let levels = cfg.levels();
    for l in 0..levels {
        conv_specs(&format!("enc.{l}"), cfg.conv_widths[l], cfg.skip_channels(l), 3, &mut out);
    }
    lstm_specs("sat_lstm", cfg.conv_widths[levels - 1], cfg.lstm_hidden, &mut out);
    if cfg.mode == Mode::Wstatt {
        lstm_specs("wx_lstm", cfg.weather_channels, cfg.weather_hidden, &mut out);
    }
    out.push(ParamSpec { name: "attn.weight".into(), shape: vec![1, cfg.fused_channels()], init: Init::Zeros });
    for l in (0..levels).rev() {
        let below = if l == levels - 1 { cfg.fused_channels() } else { cfg.conv_widths[l + 1] };
        conv_specs(&format!("dec.{l}"), cfg.conv_widths[l], below + cfg.skip_channels(l), 3, &mut out);
    }
    conv_specs("head", cfg.classes, cfg.conv_widths[0], 1, &mut out);
    out
}

#[derive(Debug, Clone)]
struct Indices {
    enc: Vec<(usize, usize)>,
    sat_lstm: [[usize; 8]; 2],
    wx_lstm: Option<[[usize; 8]; 2]>,
    attn: usize,
    /// Indexed by level, not by decoding order.
    dec: Vec<(usize, usize)>,
    head: (usize, usize),
}

impl Indices {
    fn resolve(cfg: &ModelConfig, store: &ParamStore) -> Result<Self, ModelError> {
        let at = |n: String| store.index_of(&n).map_err(ModelError::from);
        let conv = |p: String| -> Result<(usize, usize), ModelError> { Ok((at(format!("{p}.weight"))?, at(format!("{p}.bias"))?)) };
        let lstm = |p: &str| -> Result<[[usize; 8]; 2], ModelError> {
            let mut out = [[0; 8]; 2];
            for (d, dir) in DIRECTIONS.iter().enumerate() {
                for (g, gate) in GATES.iter().enumerate() {
                    out[d][g] = at(format!("{p}.{dir}.wz_{gate}"))?;
                    out[d][4 + g] = at(format!("{p}.{dir}.wh_{gate}"))?;
                }
            }
            Ok(out)
        };
        Ok(Indices {
            enc: (0..cfg.levels()).map(|l| conv(format!("enc.{l}"))).collect::<Result<_, _>>()?,
            sat_lstm: lstm("sat_lstm")?,
            wx_lstm: if cfg.mode == Mode::Wstatt { Some(lstm("wx_lstm")?) } else { None },
            attn: at("attn.weight".into())?,
            dec: (0..cfg.levels()).map(|l| conv(format!("dec.{l}"))).collect::<Result<_, _>>()?,
            head: conv("head".into())?,
        })
    }
}

/// A network instance: configuration plus named parameters.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
    idx: Indices,
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// `V×P×P` class logits.
    pub logits: Tensor,
    /// Softmax of `logits` over classes.
    pub probs: Tensor,
    /// Attention weights `T_s×H'×W'`.
    pub alpha: Tensor,
    skips: Vec<Tensor>,
    enc_out: Vec<Tensor>,
    sat_cache: BiLstmCache,
    weather: Option<WeatherState>,
    h_sw: Tensor,
    agg_skips: Vec<Tensor>,
    /// Per level: decoder conv input and post-relu output.
    dec_in: Vec<Tensor>,
    dec_out: Vec<Tensor>,
}

#[derive(Debug, Clone)]
struct WeatherState {
    cache: BiLstmCache,
    idx: Vec<usize>,
    t_w: usize,
}

/// Output of [`Model::predict_early`].
#[derive(Debug, Clone)]
pub struct EarlyPrediction {
    /// Argmax class id per pixel, row-major `P×P`.
    pub labels: Vec<u16>,
    pub probs: Tensor,
    pub alpha: Tensor,
    pub t_sat: usize,
    pub t_weather: usize,
}

/// `T×C×h×w → T×(h·w)×C`.
fn to_seq(x: &Tensor) -> Tensor {
    let (t_n, c, hw) = (x.dim(0), x.dim(1), x.dim(2) * x.dim(3));
    let mut out = Tensor::zeros(&[t_n, hw, c]);
    for t in 0..t_n {
        let (src, dst) = (x.outer(t), out.outer_mut(t));
        for ch in 0..c {
            for k in 0..hw {
                dst[k * c + ch] = src[ch * hw + k];
            }
        }
    }
    out
}

/// `T×(h·w)×C → T×C×h×w`.
fn from_seq(seq: &Tensor, h: usize, w: usize) -> Tensor {
    let (t_n, hw, c) = (seq.dim(0), seq.dim(1), seq.dim(2));
    let mut out = Tensor::zeros(&[t_n, c, h, w]);
    for t in 0..t_n {
        let (src, dst) = (seq.outer(t), out.outer_mut(t));
        for k in 0..hw {
            for ch in 0..c {
                dst[ch * hw + k] = src[k * c + ch];
            }
        }
    }
    out
}

fn as_batch1(x: &Tensor) -> Tensor {
    let mut shape = vec![1];
    shape.extend_from_slice(x.shape());
    x.clone().reshape(&shape).expect("same length")
}

fn drop_batch1(x: Tensor) -> Tensor {
    let shape = x.shape()[1..].to_vec();
    x.reshape(&shape).expect("same length")
}

impl Model {
    /// Fresh parameters: uniform `±1/√fan_in` for convolutions,
    /// `±1/√Dh` for LSTMs, zero attention weights (uniform initial α).
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut store = ParamStore::new();
        for (k, spec) in param_specs(&config).into_iter().enumerate() {
            let mut r = SplitMix64::derive(seed, k as u64);
            let n = spec.shape.iter().product();
            let data = match spec.init {
                Init::Uniform(b) => (0..n).map(|_| r.uniform(-b, b)).collect(),
                Init::Zeros => vec![0.0; n],
            };
            store.insert(&spec.name, Tensor::from_vec(&spec.shape, data)?)?;
        }
        Self::from_params(config, store)
    }

    /// Wraps an existing store; names, order and shapes must match the
    /// configuration exactly.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self, ModelError> {
        config.validate()?;
        let specs = param_specs(&config);
        if specs.len() != params.len() {
            return Err(ModelError::Config(format!("expected {} parameters, store has {}", specs.len(), params.len())));
        }
        for (spec, p) in specs.iter().zip(params.params()) {
            if spec.name != p.name || spec.shape != p.value.shape() {
                return Err(ModelError::Config(format!(
                    "parameter {} {:?} does not match expected {} {:?}",
                    p.name,
                    p.value.shape(),
                    spec.name,
                    spec.shape
                )));
            }
        }
        let idx = Indices::resolve(&config, &params)?;
        Ok(Model { config, params, idx })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn p(&self, i: usize) -> &Tensor {
        &self.params.params()[i].value
    }

    fn lstm(&self, ids: &[usize; 8]) -> LstmParams {
        LstmParams {
            wz: std::array::from_fn(|g| self.p(ids[g]).clone()),
            wh: std::array::from_fn(|g| self.p(ids[4 + g]).clone()),
        }
    }

    fn check_sat(&self, sat: &Tensor) -> Result<(), ModelError> {
        let c = &self.config;
        let div = 1 << c.levels();
        if sat.ndim() != 4 || sat.dim(0) == 0 || sat.dim(1) != c.sat_channels {
            return Err(ModelError::Input(format!("satellite must be T×{}×P×P, got {:?}", c.sat_channels, sat.shape())));
        }
        if sat.dim(2) % div != 0 || sat.dim(3) % div != 0 || sat.dim(2) == 0 || sat.dim(3) == 0 {
            return Err(ModelError::Input(format!("patch {}×{} not divisible by 2^{}", sat.dim(2), sat.dim(3), c.levels())));
        }
        Ok(())
    }

    fn weather_2d(&self, weather: &Tensor) -> Result<Tensor, ModelError> {
        let cw = self.config.weather_channels;
        if weather.ndim() < 2 || weather.dim(1) != cw || weather.len() != weather.dim(0) * cw || weather.dim(0) == 0 {
            return Err(ModelError::Input(format!("weather must be T_w×{cw}(×1×1), got {:?}", weather.shape())));
        }
        Ok(weather.clone().reshape(&[weather.dim(0), cw])?)
    }

    /// Shared-weight conv stack per timestamp, then the per-pixel BiLSTM.
    /// Returns `H_S: T×2Dh×H'×W'` and the skip features of every level
    /// (level 0 is the input itself).
    pub fn encode_satellite(&self, sat: &Tensor) -> Result<(Tensor, Vec<Tensor>), ModelError> {
        let (h_s, skips, _, _) = self.encode_satellite_cached(sat)?;
        Ok((h_s, skips))
    }

    fn encode_satellite_cached(&self, sat: &Tensor) -> Result<(Tensor, Vec<Tensor>, Vec<Tensor>, BiLstmCache), ModelError> {
        self.check_sat(sat)?;
        let mut skips = Vec::with_capacity(self.config.levels());
        let mut outs = Vec::with_capacity(self.config.levels());
        let mut x = sat.clone();
        for &(w, b) in &self.idx.enc {
            let y = pointwise(Activation::Relu, &conv2d(&x, self.p(w), Some(self.p(b)), 2, 1)?);
            skips.push(x);
            outs.push(y.clone());
            x = y;
        }
        let (h, w) = (x.dim(2), x.dim(3));
        let [fwd, bwd] = self.idx.sat_lstm;
        let (seq_out, cache) = bilstm(&to_seq(&x), &self.lstm(&fwd), &self.lstm(&bwd))?;
        Ok((from_seq(&seq_out, h, w), skips, outs, cache))
    }

    /// BiLSTM over the daily weather vectors: `T_w×C_w → T_w×2Dh_wx`.
    pub fn encode_weather(&self, weather: &Tensor) -> Result<Tensor, ModelError> {
        Ok(self.encode_weather_cached(weather)?.0)
    }

    fn encode_weather_cached(&self, weather: &Tensor) -> Result<(Tensor, BiLstmCache), ModelError> {
        let ids = self.idx.wx_lstm.ok_or_else(|| ModelError::Config("statt_ablation model has no weather encoder".into()))?;
        let w2 = self.weather_2d(weather)?;
        let seq = w2.clone().reshape(&[w2.dim(0), 1, w2.dim(1)])?;
        let (out, cache) = bilstm(&seq, &self.lstm(&ids[0]), &self.lstm(&ids[1]))?;
        let (t_w, d) = (out.dim(0), out.dim(2));
        Ok((out.reshape(&[t_w, d])?, cache))
    }

    /// Decoder from the aggregated bottleneck `C_SW: D×H'×W'` and the
    /// aggregated skips (level 0 first) to `V×P×P` logits.
    pub fn decode(&self, c_sw: &Tensor, agg_skips: &[Tensor]) -> Result<Tensor, ModelError> {
        Ok(self.decode_cached(c_sw, agg_skips)?.0)
    }

    #[allow(clippy::type_complexity)]
    fn decode_cached(&self, c_sw: &Tensor, agg_skips: &[Tensor]) -> Result<(Tensor, Vec<Tensor>, Vec<Tensor>), ModelError> {
        let levels = self.config.levels();
        if agg_skips.len() != levels {
            return Err(ModelError::Input(format!("decoder needs {levels} skip levels, got {}", agg_skips.len())));
        }
        let mut dec_in = vec![Tensor::zeros(&[0]); levels];
        let mut dec_out = vec![Tensor::zeros(&[0]); levels];
        let mut x = c_sw.clone();
        for l in (0..levels).rev() {
            let skip = &agg_skips[l];
            if skip.ndim() != 3 {
                return Err(ModelError::Input(format!("aggregated skip {l} must be C×H×W, got {:?}", skip.shape())));
            }
            let up = nearest_upsample(&x, skip.dim(1), skip.dim(2))?;
            let cat = concat_channels(&as_batch1(&up), &as_batch1(skip))?;
            let (w, b) = self.idx.dec[l];
            let y = pointwise(Activation::Relu, &conv2d(&cat, self.p(w), Some(self.p(b)), 1, 1)?);
            dec_in[l] = cat;
            dec_out[l] = y.clone();
            x = drop_batch1(y);
        }
        let (w, b) = self.idx.head;
        let logits = drop_batch1(conv2d(&as_batch1(&x), self.p(w), Some(self.p(b)), 1, 0)?);
        Ok((logits, dec_in, dec_out))
    }

    /// Full pass. `weather` is required in wstatt mode and ignored in
    /// statt_ablation mode.
    pub fn forward(&self, sat: &Tensor, weather: Option<&Tensor>) -> Result<Forward, ModelError> {
        let (h_s, skips, enc_out, sat_cache) = self.encode_satellite_cached(sat)?;
        let t_s = h_s.dim(0);
        let (h_sw, weather_state) = match self.config.mode {
            Mode::StattAblation => (h_s, None),
            Mode::Wstatt => {
                let weather = weather.ok_or_else(|| ModelError::Input("wstatt mode needs weather input".into()))?;
                let (h_w, cache) = self.encode_weather_cached(weather)?;
                let t_w = h_w.dim(0);
                let (hs_w, idx) = align_weather(&h_w, t_s)?;
                (fuse(&h_s, &hs_w)?, Some(WeatherState { cache, idx, t_w }))
            }
        };
        let alpha = attend(&h_sw, self.p(self.idx.attn))?;
        let c_sw = aggregate(&h_sw, &alpha)?;
        let agg_skips = aggregate_skips(&skips, &alpha)?;
        let (logits, dec_in, dec_out) = self.decode_cached(&c_sw, &agg_skips)?;
        let probs = softmax_axis(&logits, 0)?;
        Ok(Forward { logits, probs, alpha, skips, enc_out, sat_cache, weather: weather_state, h_sw, agg_skips, dec_in, dec_out })
    }

    /// Parameter gradients given `dL/dlogits` (`V×P×P`).
    pub fn backward(&self, fwd: &Forward, d_logits: &Tensor) -> Result<Grads, ModelError> {
        if d_logits.shape() != fwd.logits.shape() {
            return Err(ModelError::Input(format!("logit gradient {:?} vs logits {:?}", d_logits.shape(), fwd.logits.shape())));
        }
        let mut grads = self.params.zero_grad_buffers();
        let levels = self.config.levels();

        // Decoder, from the head back to the bottleneck.
        let (w, _) = self.idx.head;
        let g = conv2d_backward(&as_batch1(&drop_batch1(fwd.dec_out[0].clone())), self.p(w), true, 1, 0, &as_batch1(d_logits))?;
        grads[self.idx.head.0].add_assign(&g.weight);
        grads[self.idx.head.1].add_assign(g.bias.as_ref().expect("bias"));
        let mut dx = g.input;
        let mut d_agg = vec![Tensor::zeros(&[0]); levels];
        for l in 0..levels {
            let d_pre = pointwise_backward(Activation::Relu, &fwd.dec_out[l], &dx);
            let (w, b) = self.idx.dec[l];
            let g = conv2d_backward(&fwd.dec_in[l], self.p(w), true, 1, 1, &d_pre)?;
            grads[w].add_assign(&g.weight);
            grads[b].add_assign(g.bias.as_ref().expect("bias"));
            let skip_c = fwd.agg_skips[l].dim(0);
            let up_c = fwd.dec_in[l].dim(1) - skip_c;
            let (d_up, d_skip) = split_channels(&g.input, up_c)?;
            d_agg[l] = drop_batch1(d_skip);
            let (h_below, w_below) = if l + 1 < levels {
                (fwd.dec_out[l + 1].dim(2), fwd.dec_out[l + 1].dim(3))
            } else {
                (fwd.alpha.dim(1), fwd.alpha.dim(2))
            };
            dx = as_batch1(&nearest_upsample_backward(&drop_batch1(d_up), h_below, w_below)?);
        }
        let d_c = drop_batch1(dx);

        // Attention-weighted sums.
        let (mut d_skips, mut d_alpha) = aggregate_skips_backward(&fwd.skips, &fwd.alpha, &d_agg)?;
        let (mut d_hsw, d_alpha_c) = aggregate_backward(&fwd.h_sw, &fwd.alpha, &d_c)?;
        d_alpha.add_assign(&d_alpha_c);
        let (d_hsw_attn, d_attn) = attend_backward(&fwd.h_sw, self.p(self.idx.attn), &fwd.alpha, &d_alpha)?;
        d_hsw.add_assign(&d_hsw_attn);
        grads[self.idx.attn].add_assign(&d_attn);

        // Weather branch.
        let d_hs = match (&fwd.weather, self.idx.wx_lstm) {
            (Some(ws), Some(ids)) => {
                let (d_hs, d_hsw_w) = fuse_backward(&d_hsw, 2 * self.config.lstm_hidden)?;
                let dw = d_hsw_w.dim(1);
                let mut d_hw = Tensor::zeros(&[ws.t_w, 1, dw]);
                for (t, &i) in ws.idx.iter().enumerate() {
                    for (a, b) in d_hw.outer_mut(i).iter_mut().zip(d_hsw_w.outer(t)) {
                        *a += b;
                    }
                }
                let (f, b) = (self.lstm(&ids[0]), self.lstm(&ids[1]));
                let (_, gf, gb) = bilstm_backward(&ws.cache, &f, &b, &d_hw);
                scatter_lstm(&mut grads, &ids, [gf, gb]);
                d_hs
            }
            _ => d_hsw,
        };

        // Satellite BiLSTM and encoder.
        let bottleneck = fwd.enc_out.last().expect("at least one level");
        let (h, w) = (bottleneck.dim(2), bottleneck.dim(3));
        let ids = self.idx.sat_lstm;
        let (d_seq, gf, gb) = bilstm_backward(&fwd.sat_cache, &self.lstm(&ids[0]), &self.lstm(&ids[1]), &to_seq(&d_hs));
        scatter_lstm(&mut grads, &ids, [gf, gb]);
        let mut dy = from_seq(&d_seq, h, w);
        for l in (0..levels).rev() {
            let d_pre = pointwise_backward(Activation::Relu, &fwd.enc_out[l], &dy);
            let (w, b) = self.idx.enc[l];
            let g = conv2d_backward(&fwd.skips[l], self.p(w), true, 2, 1, &d_pre)?;
            grads[w].add_assign(&g.weight);
            grads[b].add_assign(g.bias.as_ref().expect("bias"));
            if l > 0 {
                dy = g.input;
                dy.add_assign(&std::mem::replace(&mut d_skips[l], Tensor::zeros(&[0])));
            }
        }
        Ok(grads)
    }

    /// Masked cross-entropy of one patch and its parameter gradients.
    pub fn loss_and_grads(&self, sat: &Tensor, weather: Option<&Tensor>, targets: &[u16], mask: &[bool]) -> Result<(f64, Grads), ModelError> {
        let fwd = self.forward(sat, weather)?;
        let (loss, d_logits) = cross_entropy_masked(&fwd.probs, targets, mask)?;
        Ok((loss, self.backward(&fwd, &d_logits)?))
    }

    /// Truncates both modalities to the first `months` months (satellite at
    /// `sat_step_days`, weather daily, both starting on day 0) and runs the
    /// network on what remains.
    pub fn predict_early(&self, sat_full: &Tensor, weather_full: Option<&Tensor>, months: u32) -> Result<EarlyPrediction, ModelError> {
        if !(1..=12).contains(&months) {
            return Err(crate::raster::RasterError::Months(months).into());
        }
        self.check_sat(sat_full)?;
        let t_sat = months_horizon_len(sat_full.dim(0), self.config.sat_step_days, 0, months);
        if t_sat == 0 {
            return Err(crate::raster::RasterError::EmptyTruncation { months, step_days: self.config.sat_step_days }.into());
        }
        let sat = sat_full.slice_outer(0, t_sat);
        let weather = match (self.config.mode, weather_full) {
            (Mode::Wstatt, Some(w)) => {
                let t_w = months_horizon_len(w.dim(0), 1, 0, months);
                if t_w == 0 {
                    return Err(crate::raster::RasterError::EmptyTruncation { months, step_days: 1 }.into());
                }
                Some(w.slice_outer(0, t_w))
            }
            _ => None,
        };
        let fwd = self.forward(&sat, weather.as_ref())?;
        Ok(EarlyPrediction {
            labels: argmax_classes(&fwd.probs),
            t_weather: weather.as_ref().map_or(0, |w| w.dim(0)),
            probs: fwd.probs,
            alpha: fwd.alpha,
            t_sat,
        })
    }
}

fn scatter_lstm(grads: &mut Grads, ids: &[[usize; 8]; 2], g: [LstmParams; 2]) {
    for (d, gd) in g.iter().enumerate() {
        for k in 0..4 {
            grads[ids[d][k]].add_assign(&gd.wz[k]);
            grads[ids[d][4 + k]].add_assign(&gd.wh[k]);
        }
    }
}

/// Per-pixel argmax over the leading class axis; ties go to the lower id.
pub(crate) fn argmax_classes(probs: &Tensor) -> Vec<u16> {
    let v = probs.dim(0);
    let hw = probs.len() / v;
    (0..hw)
        .map(|k| {
            let mut best = 0;
            for c in 1..v {
                if probs.data()[c * hw + k] > probs.data()[best * hw + k] {
                    best = c;
                }
            }
            best as u16
        })
        .collect()
}
