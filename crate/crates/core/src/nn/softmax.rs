use super::{shape_err, NnError};
use crate::Tensor;

fn strides(x: &Tensor, axis: usize) -> Result<(usize, usize, usize), NnError> {
    if axis >= x.ndim() {
        return shape_err(format!("softmax axis {axis} out of range for {:?}", x.shape()));
    }
    let outer = x.shape()[..axis].iter().product();
    let inner = x.shape()[axis + 1..].iter().product();
    Ok((outer, x.dim(axis), inner))
}

/// Max-subtracted exponential normalization along `axis`.
pub fn softmax_axis(x: &Tensor, axis: usize) -> Result<Tensor, NnError> {
    let (outer, n, inner) = strides(x, axis)?;
    let mut y = x.clone();
    let d = y.data_mut();
    for o in 0..outer {
        for i in 0..inner {
            let at = |k: usize| (o * n + k) * inner + i;
            let max = (0..n).map(|k| d[at(k)]).fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for k in 0..n {
                let e = (d[at(k)] - max).exp();
                d[at(k)] = e;
                sum += e;
            }
            for k in 0..n {
                d[at(k)] /= sum;
            }
        }
    }
    Ok(y)
}

/// Gradient wrt the logits: `dx = y ⊙ (dy − Σ_axis y ⊙ dy)`.
pub fn softmax_axis_backward(y: &Tensor, dy: &Tensor, axis: usize) -> Result<Tensor, NnError> {
    if y.shape() != dy.shape() {
        return shape_err("softmax backward shape mismatch");
    }
    let (outer, n, inner) = strides(y, axis)?;
    let mut dx = Tensor::zeros(y.shape());
    for o in 0..outer {
        for i in 0..inner {
            let at = |k: usize| (o * n + k) * inner + i;
            let dot: f64 = (0..n).map(|k| y.data()[at(k)] * dy.data()[at(k)]).sum();
            for k in 0..n {
                dx.data_mut()[at(k)] = y.data()[at(k)] * (dy.data()[at(k)] - dot);
            }
        }
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits() {
        let y = softmax_axis(&Tensor::zeros(&[4]), 0).unwrap();
        assert_eq!(y.data(), &[0.25; 4]);
    }

    #[test]
    fn log_weights_recover_proportions() {
        let x = Tensor::from_vec(&[3], vec![1f64.ln(), 2f64.ln(), 3f64.ln()]).unwrap();
        let y = softmax_axis(&x, 0).unwrap();
        for (k, v) in y.data().iter().enumerate() {
            assert!((v - (k + 1) as f64 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn middle_axis() {
        // 2×3×2: normalize over the 3.
        let x = Tensor::from_vec(&[2, 3, 2], (0..12).map(|v| v as f64 * 0.3).collect()).unwrap();
        let y = softmax_axis(&x, 1).unwrap();
        for o in 0..2 {
            for i in 0..2 {
                let s: f64 = (0..3).map(|k| y.at(&[o, k, i])).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn positive_and_normalized(v in proptest::collection::vec(-300.0f64..300.0, 1..20), c in -100.0f64..100.0) {
            let x = Tensor::from_vec(&[v.len()], v.clone()).unwrap();
            let y = softmax_axis(&x, 0).unwrap();
            prop_assert!((y.sum() - 1.0).abs() < 1e-12);
            prop_assert!(y.data().iter().all(|&p| p > 0.0));
            let shifted = softmax_axis(&x.map(|a| a + c), 0).unwrap();
            prop_assert!(shifted.max_abs_diff(&y) < 1e-12);
        }
    }
}
