use super::{shape_err, NnError};
use crate::Tensor;

fn check_same_outer(a: &Tensor, b: &Tensor) -> Result<(), NnError> {
    if a.ndim() != 4 || b.ndim() != 4 || a.dim(0) != b.dim(0) || a.shape()[2..] != b.shape()[2..] {
        return shape_err(format!("concat_channels: {:?} vs {:?}", a.shape(), b.shape()));
    }
    Ok(())
}

/// `T×Ca×H×W ++ T×Cb×H×W → T×(Ca+Cb)×H×W`.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
    check_same_outer(a, b)?;
    let (t, ca, cb) = (a.dim(0), a.dim(1), b.dim(1));
    let mut data = Vec::with_capacity(a.len() + b.len());
    for i in 0..t {
        data.extend_from_slice(a.outer(i));
        data.extend_from_slice(b.outer(i));
    }
    Tensor::from_vec(&[t, ca + cb, a.dim(2), a.dim(3)], data)
}

/// Inverse of [`concat_channels`]: the first `ca` channels, then the rest.
/// Also serves as its backward.
pub fn split_channels(x: &Tensor, ca: usize) -> Result<(Tensor, Tensor), NnError> {
    if x.ndim() != 4 || ca > x.dim(1) {
        return shape_err(format!("split_channels: {:?} at {ca}", x.shape()));
    }
    let (t, c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
    let split = ca * h * w;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for i in 0..t {
        let o = x.outer(i);
        a.extend_from_slice(&o[..split]);
        b.extend_from_slice(&o[split..]);
    }
    Ok((Tensor::from_vec(&[t, ca, h, w], a)?, Tensor::from_vec(&[t, c - ca, h, w], b)?))
}

fn check_up(x: &Tensor, h: usize, w: usize) -> Result<(usize, usize, usize), NnError> {
    if x.ndim() != 3 || h < x.dim(1) || w < x.dim(2) || x.dim(1) == 0 || x.dim(2) == 0 {
        return shape_err(format!("nearest_upsample: {:?} to {h}x{w}", x.shape()));
    }
    Ok((x.dim(0), x.dim(1), x.dim(2)))
}

/// `out[c,i,j] = x[c, ⌊i·h/H⌋, ⌊j·w/W⌋]`.
pub fn nearest_upsample(x: &Tensor, h_out: usize, w_out: usize) -> Result<Tensor, NnError> {
    let (c, h, w) = check_up(x, h_out, w_out)?;
    let mut out = Tensor::zeros(&[c, h_out, w_out]);
    for k in 0..c {
        for i in 0..h_out {
            let si = i * h / h_out;
            for j in 0..w_out {
                out.data_mut()[(k * h_out + i) * w_out + j] = x.data()[(k * h + si) * w + j * w / w_out];
            }
        }
    }
    Ok(out)
}

/// Sums `dy: C×H×W` over the cells each source pixel was copied to.
pub fn nearest_upsample_backward(dy: &Tensor, h: usize, w: usize) -> Result<Tensor, NnError> {
    if dy.ndim() != 3 || h == 0 || w == 0 || h > dy.dim(1) || w > dy.dim(2) {
        return shape_err(format!("nearest_upsample_backward: {:?} to {h}x{w}", dy.shape()));
    }
    let (c, h_out, w_out) = (dy.dim(0), dy.dim(1), dy.dim(2));
    let mut dx = Tensor::zeros(&[c, h, w]);
    for k in 0..c {
        for i in 0..h_out {
            let si = i * h / h_out;
            for j in 0..w_out {
                dx.data_mut()[(k * h + si) * w + j * w / w_out] += dy.data()[(k * h_out + i) * w_out + j];
            }
        }
    }
    Ok(dx)
}
