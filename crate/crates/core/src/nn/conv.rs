use super::gemm::{gemm, Layout};
use super::{shape_err, NnError};
use crate::{par, Tensor};

/// Output extent `floor((n + 2·pad − k) / stride) + 1`.
///
/// Stride-2 layers on even inputs do not divide exactly; the trailing
/// partial window is dropped, as in common deep-learning frameworks. Fails
/// only when not even one window fits.
pub fn conv_out_dim(n: usize, k: usize, stride: usize, pad: usize) -> Result<usize, NnError> {
    if stride == 0 {
        return shape_err("stride must be positive");
    }
    if n + 2 * pad < k {
        return shape_err(format!("kernel {k} does not fit input {n} with pad {pad}"));
    }
    Ok((n + 2 * pad - k) / stride + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2dGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

struct Geometry {
    n: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    k: usize,
    ho: usize,
    wo: usize,
    stride: usize,
    pad: usize,
}

impl Geometry {
    fn new(input: &Tensor, weight: &Tensor, stride: usize, pad: usize) -> Result<Self, NnError> {
        if input.ndim() != 4 || weight.ndim() != 4 {
            return shape_err(format!("conv2d expects 4-D input and kernels, got {:?} and {:?}", input.shape(), weight.shape()));
        }
        let (n, cin, h, w) = (input.dim(0), input.dim(1), input.dim(2), input.dim(3));
        let (cout, wc, k, k2) = (weight.dim(0), weight.dim(1), weight.dim(2), weight.dim(3));
        if wc != cin {
            return shape_err(format!("kernel expects {wc} input channels, input has {cin}"));
        }
        if k != k2 || k == 0 {
            return shape_err(format!("kernel must be square and non-empty, got {k}x{k2}"));
        }
        let ho = conv_out_dim(h, k, stride, pad)?;
        let wo = conv_out_dim(w, k, stride, pad)?;
        Ok(Geometry { n, cin, h, w, cout, k, ho, wo, stride, pad })
    }

    fn patch_len(&self) -> usize {
        self.cin * self.k * self.k
    }

    fn out_len(&self) -> usize {
        self.ho * self.wo
    }

    /// `(cin·k·k) × (ho·wo)` column matrix of one image.
    fn im2col(&self, x: &[f64]) -> Vec<f64> {
        let (k, hw) = (self.k, self.out_len());
        let mut cols = vec![0.0; self.patch_len() * hw];
        for c in 0..self.cin {
            let plane = &x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = &mut cols[((c * k + ki) * k + kj) * hw..][..hw];
                    for oy in 0..self.ho {
                        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                        if iy < 0 || iy as usize >= self.h {
                            continue;
                        }
                        let src = &plane[iy as usize * self.w..][..self.w];
                        for ox in 0..self.wo {
                            let ix = (ox * self.stride + kj) as isize - self.pad as isize;
                            if ix >= 0 && (ix as usize) < self.w {
                                row[oy * self.wo + ox] = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[f64], dx: &mut [f64]) {
        let (k, hw) = (self.k, self.out_len());
        for c in 0..self.cin {
            let plane = &mut dx[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = &cols[((c * k + ki) * k + kj) * hw..][..hw];
                    for oy in 0..self.ho {
                        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                        if iy < 0 || iy as usize >= self.h {
                            continue;
                        }
                        for ox in 0..self.wo {
                            let ix = (ox * self.stride + kj) as isize - self.pad as isize;
                            if ix >= 0 && (ix as usize) < self.w {
                                plane[iy as usize * self.w + ix as usize] += row[oy * self.wo + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn check_bias(bias: Option<&Tensor>, cout: usize) -> Result<(), NnError> {
    match bias {
        Some(b) if b.shape() != [cout] => shape_err(format!("bias shape {:?}, expected [{cout}]", b.shape())),
        _ => Ok(()),
    }
}

/// Cross-correlation of `N×Cin×H×W` input with `Cout×Cin×k×k` kernels.
pub fn conv2d(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>, stride: usize, pad: usize) -> Result<Tensor, NnError> {
    let g = Geometry::new(input, weight, stride, pad)?;
    check_bias(bias, g.cout)?;
    let in_len = g.cin * g.h * g.w;
    let hw = g.out_len();
    let images = par::map_range(g.n, |i| {
        let cols = g.im2col(&input.data()[i * in_len..(i + 1) * in_len]);
        let mut out = vec![0.0; g.cout * hw];
        if let Some(b) = bias {
            for (co, row) in out.chunks_mut(hw).enumerate() {
                row.fill(b.data()[co]);
            }
        }
        gemm(g.cout, g.patch_len(), hw, 1.0, weight.data(), Layout::N, &cols, Layout::N, 1.0, &mut out);
        out
    });
    Tensor::from_vec(&[g.n, g.cout, g.ho, g.wo], images.concat())
}

/// Gradients of a [`conv2d`] call given the upstream gradient `grad_out`.
pub fn conv2d_backward(
    input: &Tensor,
    weight: &Tensor,
    with_bias: bool,
    stride: usize,
    pad: usize,
    grad_out: &Tensor,
) -> Result<Conv2dGrads, NnError> {
    let g = Geometry::new(input, weight, stride, pad)?;
    if grad_out.shape() != [g.n, g.cout, g.ho, g.wo] {
        return shape_err(format!("grad_out shape {:?}, expected {:?}", grad_out.shape(), [g.n, g.cout, g.ho, g.wo]));
    }
    let in_len = g.cin * g.h * g.w;
    let hw = g.out_len();
    let kl = g.patch_len();
    let parts = par::map_range(g.n, |i| {
        let cols = g.im2col(&input.data()[i * in_len..(i + 1) * in_len]);
        let dy = &grad_out.data()[i * g.cout * hw..(i + 1) * g.cout * hw];
        let mut dw = vec![0.0; g.cout * kl];
        gemm(g.cout, hw, kl, 1.0, dy, Layout::N, &cols, Layout::T, 0.0, &mut dw);
        let mut dcols = vec![0.0; kl * hw];
        gemm(kl, g.cout, hw, 1.0, weight.data(), Layout::T, dy, Layout::N, 0.0, &mut dcols);
        let mut dx = vec![0.0; in_len];
        g.col2im(&dcols, &mut dx);
        (dx, dw)
    });
    let mut dweight = Tensor::zeros(weight.shape());
    let mut dinput = Vec::with_capacity(g.n * in_len);
    for (dx, dw) in parts {
        dinput.extend_from_slice(&dx);
        for (a, b) in dweight.data_mut().iter_mut().zip(&dw) {
            *a += b;
        }
    }
    let bias = with_bias.then(|| {
        let mut db = vec![0.0; g.cout];
        for i in 0..g.n {
            for (co, d) in db.iter_mut().enumerate() {
                *d += grad_out.data()[(i * g.cout + co) * hw..][..hw].iter().sum::<f64>();
            }
        }
        Tensor::from_vec(&[g.cout], db).expect("bias shape")
    });
    Ok(Conv2dGrads { input: Tensor::from_vec(input.shape(), dinput)?, weight: dweight, bias })
}
