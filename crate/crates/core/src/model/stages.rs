//! Parameter-light stages between the encoders and the decoder.

use super::ModelError;
use crate::nn::{concat_channels, nearest_upsample, nearest_upsample_backward, softmax_axis, softmax_axis_backward, split_channels};
use crate::Tensor;

fn input_err<T>(msg: String) -> Result<T, ModelError> {
    Err(ModelError::Input(msg))
}

/// Daily indices matched to `t_s` satellite timestamps: stride
/// `s = ⌊t_w / t_s⌋`, index `min((t+1)·s − 1, t_w − 1)`.
pub fn align_indices(t_w: usize, t_s: usize) -> Result<Vec<usize>, ModelError> {
    if t_s == 0 || t_w < t_s {
        return input_err(format!("cannot align {t_w} weather steps to {t_s} satellite steps"));
    }
    let s = t_w / t_s;
    Ok((0..t_s).map(|t| ((t + 1) * s - 1).min(t_w - 1)).collect())
}

/// Selects the aligned rows of `h_w: T_w × D`.
pub fn align_weather(h_w: &Tensor, t_s: usize) -> Result<(Tensor, Vec<usize>), ModelError> {
    if h_w.ndim() != 2 {
        return input_err(format!("weather embedding must be T_w×D, got {:?}", h_w.shape()));
    }
    let idx = align_indices(h_w.dim(0), t_s)?;
    let data = idx.iter().flat_map(|&i| h_w.outer(i).iter().copied()).collect();
    Ok((Tensor::from_vec(&[t_s, h_w.dim(1)], data)?, idx))
}

/// Broadcasts each `hs_w[t]` over the `h×w` grid of `h_s: T×Ds×h×w` and
/// appends it as extra channels.
pub fn fuse(h_s: &Tensor, hs_w: &Tensor) -> Result<Tensor, ModelError> {
    if h_s.ndim() != 4 || hs_w.ndim() != 2 || hs_w.dim(0) != h_s.dim(0) {
        return input_err(format!("fuse: {:?} with {:?}", h_s.shape(), hs_w.shape()));
    }
    let (t_n, h, w, dw) = (h_s.dim(0), h_s.dim(2), h_s.dim(3), hs_w.dim(1));
    let mut planes = Vec::with_capacity(t_n * dw * h * w);
    for t in 0..t_n {
        let cell = Tensor::from_vec(&[dw, 1, 1], hs_w.outer(t).to_vec())?;
        planes.extend_from_slice(nearest_upsample(&cell, h, w)?.data());
    }
    Ok(concat_channels(h_s, &Tensor::from_vec(&[t_n, dw, h, w], planes)?)?)
}

/// Splits the fused gradient into `(dH_S, dHs_W)`, summing the broadcast
/// weather part over the grid.
pub fn fuse_backward(d_fused: &Tensor, ds: usize) -> Result<(Tensor, Tensor), ModelError> {
    let (d_s, d_w) = split_channels(d_fused, ds)?;
    let (t_n, dw, h, w) = (d_w.dim(0), d_w.dim(1), d_w.dim(2), d_w.dim(3));
    let mut out = Tensor::zeros(&[t_n, dw]);
    for t in 0..t_n {
        let cell = nearest_upsample_backward(&Tensor::from_vec(&[dw, h, w], d_w.outer(t).to_vec())?, 1, 1)?;
        out.outer_mut(t).copy_from_slice(cell.data());
    }
    Ok((d_s, out))
}

fn attend_logits(h_sw: &Tensor, weight: &Tensor) -> Result<Tensor, ModelError> {
    if h_sw.ndim() != 4 || weight.shape() != [1, h_sw.dim(1)] {
        return input_err(format!("attend: embeddings {:?} with weight {:?}", h_sw.shape(), weight.shape()));
    }
    let (t_n, d, h, w) = (h_sw.dim(0), h_sw.dim(1), h_sw.dim(2), h_sw.dim(3));
    let hw = h * w;
    let mut logits = Tensor::zeros(&[t_n, h, w]);
    for t in 0..t_n {
        let src = h_sw.outer(t);
        let dst = logits.outer_mut(t);
        for (c, &a) in weight.data().iter().enumerate().take(d) {
            for (o, &x) in dst.iter_mut().zip(&src[c * hw..(c + 1) * hw]) {
                *o += a * x;
            }
        }
    }
    Ok(logits)
}

/// Attention weights `α: T×h×w`: a per-pixel linear score of each
/// timestamp's channel vector, softmax-normalized over time.
pub fn attend(h_sw: &Tensor, weight: &Tensor) -> Result<Tensor, ModelError> {
    Ok(softmax_axis(&attend_logits(h_sw, weight)?, 0)?)
}

/// Given `dα`, returns `(dH_SW, dW_attn)`.
pub fn attend_backward(h_sw: &Tensor, weight: &Tensor, alpha: &Tensor, d_alpha: &Tensor) -> Result<(Tensor, Tensor), ModelError> {
    let d_logits = softmax_axis_backward(alpha, d_alpha, 0)?;
    let (t_n, d, h, w) = (h_sw.dim(0), h_sw.dim(1), h_sw.dim(2), h_sw.dim(3));
    let hw = h * w;
    let mut d_h = Tensor::zeros(h_sw.shape());
    let mut d_w = Tensor::zeros(&[1, d]);
    for t in 0..t_n {
        let g = d_logits.outer(t);
        let src = h_sw.outer(t);
        let dst = d_h.outer_mut(t);
        for c in 0..d {
            let a = weight.data()[c];
            let mut acc = 0.0;
            for k in 0..hw {
                acc += g[k] * src[c * hw + k];
                dst[c * hw + k] = a * g[k];
            }
            d_w.data_mut()[c] += acc;
        }
    }
    Ok((d_h, d_w))
}

fn check_alpha(x: &Tensor, alpha: &Tensor) -> Result<(), ModelError> {
    if x.ndim() != 4 || alpha.ndim() != 3 || x.dim(0) != alpha.dim(0) || x.shape()[2..] != alpha.shape()[1..] {
        return input_err(format!("aggregate: features {:?} with attention {:?}", x.shape(), alpha.shape()));
    }
    Ok(())
}

/// `C(c,i,j) = Σ_t α_t(i,j)·x_t(c,i,j)` for `x: T×D×h×w`.
pub fn aggregate(x: &Tensor, alpha: &Tensor) -> Result<Tensor, ModelError> {
    check_alpha(x, alpha)?;
    let (t_n, d, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
    let hw = h * w;
    let mut out = Tensor::zeros(&[d, h, w]);
    for t in 0..t_n {
        let a = alpha.outer(t);
        let src = x.outer(t);
        for c in 0..d {
            for k in 0..hw {
                out.data_mut()[c * hw + k] += a[k] * src[c * hw + k];
            }
        }
    }
    Ok(out)
}

/// Given `dC: D×h×w`, returns `(dx, dα)`.
pub fn aggregate_backward(x: &Tensor, alpha: &Tensor, d_c: &Tensor) -> Result<(Tensor, Tensor), ModelError> {
    check_alpha(x, alpha)?;
    let (t_n, d, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
    let hw = h * w;
    let mut dx = Tensor::zeros(x.shape());
    let mut da = Tensor::zeros(alpha.shape());
    for t in 0..t_n {
        let a = alpha.outer(t).to_vec();
        let src = x.outer(t);
        let dst = dx.outer_mut(t);
        let mut dat = vec![0.0; hw];
        for c in 0..d {
            for k in 0..hw {
                let g = d_c.data()[c * hw + k];
                dst[c * hw + k] = a[k] * g;
                dat[k] += g * src[c * hw + k];
            }
        }
        da.outer_mut(t).copy_from_slice(&dat);
    }
    Ok((dx, da))
}

fn upsampled_alpha(alpha: &Tensor, h: usize, w: usize) -> Result<Tensor, ModelError> {
    Ok(nearest_upsample(alpha, h, w)?)
}

/// Aggregates every skip level `T×c_l×H_l×W_l` with `α` nearest-upsampled
/// to that level's grid.
pub fn aggregate_skips(skips: &[Tensor], alpha: &Tensor) -> Result<Vec<Tensor>, ModelError> {
    skips
        .iter()
        .map(|s| {
            if s.ndim() != 4 {
                return input_err(format!("skip must be 4-D, got {:?}", s.shape()));
            }
            aggregate(s, &upsampled_alpha(alpha, s.dim(2), s.dim(3))?)
        })
        .collect()
}

/// Returns per-level skip gradients and the summed `dα` at attention
/// resolution.
pub fn aggregate_skips_backward(skips: &[Tensor], alpha: &Tensor, d_agg: &[Tensor]) -> Result<(Vec<Tensor>, Tensor), ModelError> {
    let mut d_alpha = Tensor::zeros(alpha.shape());
    let mut d_skips = Vec::with_capacity(skips.len());
    for (s, g) in skips.iter().zip(d_agg) {
        let up = upsampled_alpha(alpha, s.dim(2), s.dim(3))?;
        let (ds, da_up) = aggregate_backward(s, &up, g)?;
        d_alpha.add_assign(&nearest_upsample_backward(&da_up, alpha.dim(1), alpha.dim(2))?);
        d_skips.push(ds);
    }
    Ok((d_skips, d_alpha))
}
