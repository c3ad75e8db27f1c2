//! Central finite-difference verification of analytic gradients.

use super::{
    bilstm, bilstm_backward, concat_channels, conv2d, conv2d_backward, cross_entropy_masked, linear, linear_backward,
    lstm_cell, lstm_cell_backward, nearest_upsample, nearest_upsample_backward, pointwise, pointwise_backward,
    softmax_axis, softmax_axis_backward, split_channels, Activation, LstmParams, NnError,
};
use crate::rng::SplitMix64;
use crate::Tensor;

pub const DEFAULT_STEP: f64 = 1e-5;

pub const REL_ERR_FLOOR: f64 = 1e-8;

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    rel_err_floored(analytic, numeric, REL_ERR_FLOOR)
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn rel_err_floored(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckReport {
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compares `analytic` against `(f(x+h) − f(x−h)) / 2h` at every coordinate.
pub fn gradcheck<F>(f: F, x: &[f64], analytic: &[f64], h: f64) -> Result<GradcheckReport, NnError>
where
    F: FnMut(&[f64]) -> f64,
{
    let all: Vec<usize> = (0..x.len()).collect();
    gradcheck_at(f, x, analytic, h, &all)
}

/// Like [`gradcheck`], restricted to the coordinates in `indices`.
pub fn gradcheck_at<F>(f: F, x: &[f64], analytic: &[f64], h: f64, indices: &[usize]) -> Result<GradcheckReport, NnError>
where
    F: FnMut(&[f64]) -> f64,
{
    gradcheck_floored(f, x, analytic, h, indices, REL_ERR_FLOOR)
}

/// Like [`gradcheck_at`] with a custom denominator floor for the relative
/// error. Central differences carry round-off of roughly `1e-16·|f|/h`, so
/// gradients much smaller than that cannot be resolved relatively; a floor
/// above the round-off level turns the check into an absolute one there.
pub fn gradcheck_floored<F>(mut f: F, x: &[f64], analytic: &[f64], h: f64, indices: &[usize], floor: f64) -> Result<GradcheckReport, NnError>
where
    F: FnMut(&[f64]) -> f64,
{
    if x.len() != analytic.len() {
        return Err(NnError::Shape(format!("{} inputs but {} gradient entries", x.len(), analytic.len())));
    }
    let mut report = GradcheckReport { max_rel_err: 0.0, worst_index: 0, analytic: 0.0, numeric: 0.0, checked: 0 };
    let mut probe = x.to_vec();
    for &i in indices {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(NnError::NonFinite(format!("objective at coordinate {i}")));
        }
        let numeric = (up - down) / (2.0 * h);
        let e = rel_err_floored(analytic[i], numeric, floor);
        if e > report.max_rel_err || report.checked == 0 {
            report.max_rel_err = e;
            report.worst_index = i;
            report.analytic = analytic[i];
            report.numeric = numeric;
        }
        report.checked += 1;
    }
    Ok(report)
}

/// Outcome of one kernel in [`kernel_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheck {
    pub name: String,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl KernelCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

fn randn(shape: &[usize], r: &mut SplitMix64, scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| scale * r.normal()).collect()).expect("shape")
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn with_data(t: &Tensor, data: &[f64]) -> Tensor {
    Tensor::from_vec(t.shape(), data.to_vec()).expect("shape")
}

/// Checks the backward pass of every kernel against finite differences on
/// random inputs drawn from `seed`. Each objective is `<r, op(x)>` for a
/// fixed random projection `r`.
pub fn kernel_suite(seed: u64) -> Result<Vec<KernelCheck>, NnError> {
    let mut r = SplitMix64::derive(seed, 0x4743);
    let h = DEFAULT_STEP;
    let mut out = Vec::new();
    let mut push = |name: &str, rep: GradcheckReport, tol: f64| {
        out.push(KernelCheck { name: name.to_string(), max_rel_err: rep.max_rel_err, tolerance: tol });
    };

    // conv2d: input, kernels and bias, at stride 1 and 2.
    for (stride, tag) in [(1, "s1"), (2, "s2")] {
        let x = randn(&[1, 2, 5, 5], &mut r, 1.0);
        let w = randn(&[3, 2, 3, 3], &mut r, 0.5);
        let b = randn(&[3], &mut r, 0.5);
        let y = conv2d(&x, &w, Some(&b), stride, 1)?;
        let proj = randn(y.shape(), &mut r, 1.0);
        let g = conv2d_backward(&x, &w, true, stride, 1, &proj)?;
        let rep = gradcheck(|v| dot(&proj, &conv2d(&with_data(&x, v), &w, Some(&b), stride, 1).unwrap()), x.data(), g.input.data(), h)?;
        push(&format!("conv2d.{tag}.input"), rep, 1e-6);
        let rep = gradcheck(|v| dot(&proj, &conv2d(&x, &with_data(&w, v), Some(&b), stride, 1).unwrap()), w.data(), g.weight.data(), h)?;
        push(&format!("conv2d.{tag}.weight"), rep, 1e-6);
        let db = g.bias.expect("bias grad");
        let rep = gradcheck(|v| dot(&proj, &conv2d(&x, &w, Some(&with_data(&b, v)), stride, 1).unwrap()), b.data(), db.data(), h)?;
        push(&format!("conv2d.{tag}.bias"), rep, 1e-6);
    }

    // pointwise activations; relu inputs are kept away from the kink.
    for (f, name) in [(Activation::Sigmoid, "sigmoid"), (Activation::Tanh, "tanh"), (Activation::Relu, "relu")] {
        let mut x = randn(&[3, 4], &mut r, 1.5);
        if f == Activation::Relu {
            x = x.map(|v| if v.abs() < 0.1 { v + 0.2 } else { v });
        }
        let proj = randn(x.shape(), &mut r, 1.0);
        let g = pointwise_backward(f, &pointwise(f, &x), &proj);
        let rep = gradcheck(|v| dot(&proj, &pointwise(f, &with_data(&x, v))), x.data(), g.data(), h)?;
        push(&format!("pointwise.{name}"), rep, 1e-6);
    }

    // linear
    {
        let x = randn(&[4, 3], &mut r, 1.0);
        let w = randn(&[2, 3], &mut r, 1.0);
        let b = randn(&[2], &mut r, 1.0);
        let proj = randn(&[4, 2], &mut r, 1.0);
        let g = linear_backward(&x, &w, true, &proj)?;
        let rep = gradcheck(|v| dot(&proj, &linear(&with_data(&x, v), &w, Some(&b)).unwrap()), x.data(), g.input.data(), h)?;
        push("linear.input", rep, 1e-6);
        let rep = gradcheck(|v| dot(&proj, &linear(&x, &with_data(&w, v), Some(&b)).unwrap()), w.data(), g.weight.data(), h)?;
        push("linear.weight", rep, 1e-6);
        let rep = gradcheck(|v| dot(&proj, &linear(&x, &w, Some(&with_data(&b, v))).unwrap()), b.data(), g.bias.unwrap().data(), h)?;
        push("linear.bias", rep, 1e-6);
    }

    // lstm_cell: B=2, Din=3, Dh=4, all eight matrices plus inputs and state.
    {
        let (b, din, dh) = (2, 3, 4);
        let mut p = LstmParams::zeros(din, dh);
        for t in p.wz.iter_mut().chain(p.wh.iter_mut()) {
            *t = randn(t.shape(), &mut r, 0.5);
        }
        let z = randn(&[b, din], &mut r, 1.0);
        let h0 = randn(&[b, dh], &mut r, 0.5);
        let c0 = randn(&[b, dh], &mut r, 0.5);
        let (ph, pc) = (randn(&[b, dh], &mut r, 1.0), randn(&[b, dh], &mut r, 1.0));
        let objective = |z: &Tensor, h0: &Tensor, c0: &Tensor, p: &LstmParams| {
            let (h1, c1, _) = lstm_cell(z, h0, c0, p).unwrap();
            dot(&ph, &h1) + dot(&pc, &c1)
        };
        let (_, _, cache) = lstm_cell(&z, &h0, &c0, &p)?;
        let mut grads = LstmParams::zeros(din, dh);
        let (dz, dhp, dcp) = lstm_cell_backward(&cache, &p, &ph, &pc, &mut grads);
        let mut worst: Option<GradcheckReport> = None;
        let mut keep = |rep: GradcheckReport| {
            if worst.is_none_or(|w| rep.max_rel_err > w.max_rel_err) {
                worst = Some(rep);
            }
        };
        keep(gradcheck(|v| objective(&with_data(&z, v), &h0, &c0, &p), z.data(), dz.data(), h)?);
        keep(gradcheck(|v| objective(&z, &with_data(&h0, v), &c0, &p), h0.data(), dhp.data(), h)?);
        keep(gradcheck(|v| objective(&z, &h0, &with_data(&c0, v), &p), c0.data(), dcp.data(), h)?);
        for gate in 0..4 {
            let rep = gradcheck(
                |v| {
                    let mut q = p.clone();
                    q.wz[gate] = with_data(&p.wz[gate], v);
                    objective(&z, &h0, &c0, &q)
                },
                p.wz[gate].data(),
                grads.wz[gate].data(),
                h,
            )?;
            keep(rep);
            let rep = gradcheck(
                |v| {
                    let mut q = p.clone();
                    q.wh[gate] = with_data(&p.wh[gate], v);
                    objective(&z, &h0, &c0, &q)
                },
                p.wh[gate].data(),
                grads.wh[gate].data(),
                h,
            )?;
            keep(rep);
        }
        push("lstm_cell", worst.expect("checked"), 1e-5);
    }

    // bilstm over T=4
    {
        let (t_n, b, din, dh) = (4, 2, 3, 3);
        let mut f = LstmParams::zeros(din, dh);
        let mut bw = LstmParams::zeros(din, dh);
        for t in f.wz.iter_mut().chain(f.wh.iter_mut()).chain(bw.wz.iter_mut()).chain(bw.wh.iter_mut()) {
            *t = randn(t.shape(), &mut r, 0.5);
        }
        let seq = randn(&[t_n, b, din], &mut r, 1.0);
        let proj = randn(&[t_n, b, 2 * dh], &mut r, 1.0);
        let (_, cache) = bilstm(&seq, &f, &bw)?;
        let (dseq, gf, gb) = bilstm_backward(&cache, &f, &bw, &proj);
        let rep = gradcheck(|v| dot(&proj, &bilstm(&with_data(&seq, v), &f, &bw).unwrap().0), seq.data(), dseq.data(), h)?;
        push("bilstm.input", rep, 1e-5);
        let rep = gradcheck(
            |v| {
                let mut q = f.clone();
                q.wh[3] = with_data(&f.wh[3], v);
                dot(&proj, &bilstm(&seq, &q, &bw).unwrap().0)
            },
            f.wh[3].data(),
            gf.wh[3].data(),
            h,
        )?;
        push("bilstm.fwd.wh_g", rep, 1e-5);
        let rep = gradcheck(
            |v| {
                let mut q = bw.clone();
                q.wz[0] = with_data(&bw.wz[0], v);
                dot(&proj, &bilstm(&seq, &f, &q).unwrap().0)
            },
            bw.wz[0].data(),
            gb.wz[0].data(),
            h,
        )?;
        push("bilstm.bwd.wz_f", rep, 1e-5);
    }

    // softmax over a middle axis
    {
        let x = randn(&[2, 5, 3], &mut r, 1.0);
        let proj = randn(x.shape(), &mut r, 1.0);
        let y = softmax_axis(&x, 1)?;
        let g = softmax_axis_backward(&y, &proj, 1)?;
        let rep = gradcheck(|v| dot(&proj, &softmax_axis(&with_data(&x, v), 1).unwrap()), x.data(), g.data(), h)?;
        push("softmax_axis", rep, 1e-6);
    }

    // cross entropy through a softmax over classes, 3×2×2
    {
        let logits = randn(&[3, 2, 2], &mut r, 1.0);
        let targets = [0u16, 2, 1, 2];
        let mask = [true, true, false, true];
        let loss = |l: &Tensor| cross_entropy_masked(&softmax_axis(l, 0).unwrap(), &targets, &mask).unwrap().0;
        let (_, g) = cross_entropy_masked(&softmax_axis(&logits, 0)?, &targets, &mask)?;
        let rep = gradcheck(|v| loss(&with_data(&logits, v)), logits.data(), g.data(), h)?;
        push("cross_entropy_masked", rep, 1e-6);
    }

    // concat_channels
    {
        let a = randn(&[2, 2, 2, 3], &mut r, 1.0);
        let b = randn(&[2, 3, 2, 3], &mut r, 1.0);
        let proj = randn(&[2, 5, 2, 3], &mut r, 1.0);
        let (ga, _) = split_channels(&proj, 2)?;
        let rep = gradcheck(|v| dot(&proj, &concat_channels(&with_data(&a, v), &b).unwrap()), a.data(), ga.data(), h)?;
        push("concat_channels", rep, 1e-6);
    }

    // nearest_upsample
    {
        let x = randn(&[2, 2, 3], &mut r, 1.0);
        let proj = randn(&[2, 5, 6], &mut r, 1.0);
        let g = nearest_upsample_backward(&proj, 2, 3)?;
        let rep = gradcheck(|v| dot(&proj, &nearest_upsample(&with_data(&x, v), 5, 6).unwrap()), x.data(), g.data(), h)?;
        push("nearest_upsample", rep, 1e-6);
    }

    Ok(out)
}
