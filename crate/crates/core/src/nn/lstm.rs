//! Bias-free LSTM cell and bidirectional sequence wrapper.
//!
//! Gate order everywhere is forget, input, output, candidate (`F, I, O, G`):
//!
//! ```text
//! F = σ(W_H^F h + W_Z^F z)    I = σ(W_H^I h + W_Z^I z)
//! O = σ(W_H^O h + W_Z^O z)    G = tanh(W_H^G h + W_Z^G z)
//! c' = F ⊙ c + I ⊙ G          h' = O ⊙ tanh(c')
//! ```

use super::activation::{sigmoid, Activation};
use super::gemm::{gemm, Layout};
use super::{shape_err, NnError};
use crate::Tensor;

pub const GATE_NAMES: [&str; 4] = ["f", "i", "o", "g"];

/// The eight weight blocks of one direction: `wz[g]` is `Dh×Din`, `wh[g]`
/// is `Dh×Dh`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub wz: [Tensor; 4],
    pub wh: [Tensor; 4],
}

impl LstmParams {
    pub fn zeros(din: usize, dh: usize) -> Self {
        LstmParams {
            wz: std::array::from_fn(|_| Tensor::zeros(&[dh, din])),
            wh: std::array::from_fn(|_| Tensor::zeros(&[dh, dh])),
        }
    }

    pub fn din(&self) -> usize {
        self.wz[0].dim(1)
    }

    pub fn dh(&self) -> usize {
        self.wz[0].dim(0)
    }

    fn validate(&self) -> Result<(), NnError> {
        let (din, dh) = (self.din(), self.dh());
        for g in 0..4 {
            if self.wz[g].shape() != [dh, din] || self.wh[g].shape() != [dh, dh] {
                return shape_err(format!(
                    "lstm gate {}: wz {:?}, wh {:?} for Din={din}, Dh={dh}",
                    GATE_NAMES[g],
                    self.wz[g].shape(),
                    self.wh[g].shape()
                ));
            }
        }
        Ok(())
    }
}

pub type LstmGrads = LstmParams;

/// Forward values kept for the backward pass of one step.
#[derive(Debug, Clone)]
pub struct LstmCache {
    z: Tensor,
    h_prev: Tensor,
    c_prev: Tensor,
    gates: [Tensor; 4],
    tanh_c: Tensor,
}

/// One step for a batch: `z: B×Din`, `h_prev, c_prev: B×Dh`.
pub fn lstm_cell(z: &Tensor, h_prev: &Tensor, c_prev: &Tensor, p: &LstmParams) -> Result<(Tensor, Tensor, LstmCache), NnError> {
    p.validate()?;
    let (din, dh) = (p.din(), p.dh());
    if z.ndim() != 2 || z.dim(1) != din {
        return shape_err(format!("lstm: z {:?}, expected [B, {din}]", z.shape()));
    }
    let b = z.dim(0);
    if h_prev.shape() != [b, dh] || c_prev.shape() != [b, dh] {
        return shape_err(format!("lstm: state {:?}/{:?}, expected [{b}, {dh}]", h_prev.shape(), c_prev.shape()));
    }
    let gates: [Tensor; 4] = std::array::from_fn(|g| {
        let mut a = Tensor::zeros(&[b, dh]);
        gemm(b, din, dh, 1.0, z.data(), Layout::N, p.wz[g].data(), Layout::T, 0.0, a.data_mut());
        gemm(b, dh, dh, 1.0, h_prev.data(), Layout::N, p.wh[g].data(), Layout::T, 1.0, a.data_mut());
        if g == 3 {
            a.map(f64::tanh)
        } else {
            a.map(sigmoid)
        }
    });
    let [f, i, o, gg] = &gates;
    let mut c = Tensor::zeros(&[b, dh]);
    let mut tanh_c = Tensor::zeros(&[b, dh]);
    let mut h = Tensor::zeros(&[b, dh]);
    for k in 0..b * dh {
        let ck = f.data()[k] * c_prev.data()[k] + i.data()[k] * gg.data()[k];
        c.data_mut()[k] = ck;
        tanh_c.data_mut()[k] = ck.tanh();
        h.data_mut()[k] = o.data()[k] * tanh_c.data()[k];
    }
    let cache = LstmCache { z: z.clone(), h_prev: h_prev.clone(), c_prev: c_prev.clone(), gates, tanh_c };
    Ok((h, c, cache))
}

/// Backward of one step. Accumulates weight gradients into `grads` and
/// returns `(dz, dh_prev, dc_prev)`.
pub fn lstm_cell_backward(
    cache: &LstmCache,
    p: &LstmParams,
    dh: &Tensor,
    dc: &Tensor,
    grads: &mut LstmGrads,
) -> (Tensor, Tensor, Tensor) {
    let (din, hd) = (p.din(), p.dh());
    let b = cache.z.dim(0);
    let [f, i, o, g] = &cache.gates;
    let mut da: [Tensor; 4] = std::array::from_fn(|_| Tensor::zeros(&[b, hd]));
    let mut dc_prev = Tensor::zeros(&[b, hd]);
    for k in 0..b * hd {
        let (fk, ik, ok, gk, tc) = (f.data()[k], i.data()[k], o.data()[k], g.data()[k], cache.tanh_c.data()[k]);
        let dhk = dh.data()[k];
        let dct = dc.data()[k] + dhk * ok * (1.0 - tc * tc);
        da[0].data_mut()[k] = dct * cache.c_prev.data()[k] * Activation::Sigmoid.derivative_from_output(fk);
        da[1].data_mut()[k] = dct * gk * Activation::Sigmoid.derivative_from_output(ik);
        da[2].data_mut()[k] = dhk * tc * Activation::Sigmoid.derivative_from_output(ok);
        da[3].data_mut()[k] = dct * ik * Activation::Tanh.derivative_from_output(gk);
        dc_prev.data_mut()[k] = dct * fk;
    }
    let mut dz = Tensor::zeros(&[b, din]);
    let mut dh_prev = Tensor::zeros(&[b, hd]);
    for gate in 0..4 {
        let d = da[gate].data();
        gemm(hd, b, din, 1.0, d, Layout::T, cache.z.data(), Layout::N, 1.0, grads.wz[gate].data_mut());
        gemm(hd, b, hd, 1.0, d, Layout::T, cache.h_prev.data(), Layout::N, 1.0, grads.wh[gate].data_mut());
        gemm(b, hd, din, 1.0, d, Layout::N, p.wz[gate].data(), Layout::N, 1.0, dz.data_mut());
        gemm(b, hd, hd, 1.0, d, Layout::N, p.wh[gate].data(), Layout::N, 1.0, dh_prev.data_mut());
    }
    (dz, dh_prev, dc_prev)
}

/// Per-step caches of both directions, indexed by timestamp.
#[derive(Debug, Clone)]
pub struct BiLstmCache {
    fwd: Vec<LstmCache>,
    bwd: Vec<LstmCache>,
}

fn step_slice(seq: &Tensor, t: usize) -> Tensor {
    Tensor::from_vec(&[seq.dim(1), seq.dim(2)], seq.outer(t).to_vec()).expect("step shape")
}

/// Runs `fwd` left to right and `bwd` right to left over `seq: T×B×Din`
/// from zero initial states; output `T×B×2Dh` holds `[h_fwd ; h_bwd]`.
pub fn bilstm(seq: &Tensor, fwd: &LstmParams, bwd: &LstmParams) -> Result<(Tensor, BiLstmCache), NnError> {
    if seq.ndim() != 3 || seq.dim(0) == 0 {
        return shape_err(format!("bilstm: sequence {:?}, expected non-empty T×B×Din", seq.shape()));
    }
    if fwd.dh() != bwd.dh() || fwd.din() != bwd.din() {
        return shape_err("bilstm: direction shapes differ");
    }
    let (t_n, b, dh) = (seq.dim(0), seq.dim(1), fwd.dh());
    let mut out = Tensor::zeros(&[t_n, b, 2 * dh]);
    let mut run = |p: &LstmParams, order: &mut dyn Iterator<Item = usize>, half: usize| -> Result<Vec<Option<LstmCache>>, NnError> {
        let mut caches: Vec<Option<LstmCache>> = vec![None; t_n];
        let mut h = Tensor::zeros(&[b, dh]);
        let mut c = Tensor::zeros(&[b, dh]);
        for t in order {
            let (h2, c2, cache) = lstm_cell(&step_slice(seq, t), &h, &c, p)?;
            let dst = out.outer_mut(t);
            for r in 0..b {
                dst[r * 2 * dh + half * dh..][..dh].copy_from_slice(&h2.data()[r * dh..(r + 1) * dh]);
            }
            caches[t] = Some(cache);
            h = h2;
            c = c2;
        }
        Ok(caches)
    };
    let f = run(fwd, &mut (0..t_n), 0)?;
    let r = run(bwd, &mut (0..t_n).rev(), 1)?;
    let unwrap = |v: Vec<Option<LstmCache>>| v.into_iter().map(|c| c.expect("every step visited")).collect();
    Ok((out, BiLstmCache { fwd: unwrap(f), bwd: unwrap(r) }))
}

/// Backward of [`bilstm`]: returns `(dseq, grads_fwd, grads_bwd)`.
pub fn bilstm_backward(cache: &BiLstmCache, fwd: &LstmParams, bwd: &LstmParams, dout: &Tensor) -> (Tensor, LstmGrads, LstmGrads) {
    let t_n = cache.fwd.len();
    let (din, dh) = (fwd.din(), fwd.dh());
    let b = dout.dim(1);
    let mut dseq = Tensor::zeros(&[t_n, b, din]);
    let mut grads = [LstmParams::zeros(din, dh), LstmParams::zeros(din, dh)];
    let directions: [(&LstmParams, &Vec<LstmCache>, Vec<usize>); 2] =
        [(fwd, &cache.fwd, (0..t_n).rev().collect()), (bwd, &cache.bwd, (0..t_n).collect())];
    for (half, (p, caches, order)) in directions.into_iter().enumerate() {
        let mut dh_next = Tensor::zeros(&[b, dh]);
        let mut dc_next = Tensor::zeros(&[b, dh]);
        for t in order {
            let src = dout.outer(t);
            for r in 0..b {
                for k in 0..dh {
                    dh_next.data_mut()[r * dh + k] += src[r * 2 * dh + half * dh + k];
                }
            }
            let (dz, dhp, dcp) = lstm_cell_backward(&caches[t], p, &dh_next, &dc_next, &mut grads[half]);
            for (a, v) in dseq.outer_mut(t).iter_mut().zip(dz.data()) {
                *a += v;
            }
            dh_next = dhp;
            dc_next = dcp;
        }
    }
    let [gf, gb] = grads;
    (dseq, gf, gb)
}
