use super::gemm::{gemm, Layout};
use super::{shape_err, NnError};
use crate::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

fn dims(x: &Tensor, weight: &Tensor) -> Result<(usize, usize, usize), NnError> {
    if x.ndim() != 2 || weight.ndim() != 2 || x.dim(1) != weight.dim(1) {
        return shape_err(format!("linear: x {:?} incompatible with weight {:?}", x.shape(), weight.shape()));
    }
    Ok((x.dim(0), x.dim(1), weight.dim(0)))
}

/// `y = x·Wᵀ + b` for `x: N×Din`, `W: Dout×Din`.
pub fn linear(x: &Tensor, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor, NnError> {
    let (n, din, dout) = dims(x, weight)?;
    let mut y = Tensor::zeros(&[n, dout]);
    if let Some(b) = bias {
        if b.shape() != [dout] {
            return shape_err(format!("linear: bias {:?}, expected [{dout}]", b.shape()));
        }
        for row in y.data_mut().chunks_mut(dout) {
            row.copy_from_slice(b.data());
        }
    }
    gemm(n, din, dout, 1.0, x.data(), Layout::N, weight.data(), Layout::T, 1.0, y.data_mut());
    Ok(y)
}

pub fn linear_backward(x: &Tensor, weight: &Tensor, with_bias: bool, dy: &Tensor) -> Result<LinearGrads, NnError> {
    let (n, din, dout) = dims(x, weight)?;
    if dy.shape() != [n, dout] {
        return shape_err(format!("linear: dy {:?}, expected [{n}, {dout}]", dy.shape()));
    }
    let mut dx = Tensor::zeros(&[n, din]);
    gemm(n, dout, din, 1.0, dy.data(), Layout::N, weight.data(), Layout::N, 0.0, dx.data_mut());
    let mut dw = Tensor::zeros(&[dout, din]);
    gemm(dout, n, din, 1.0, dy.data(), Layout::T, x.data(), Layout::N, 0.0, dw.data_mut());
    let bias = with_bias.then(|| {
        let mut db = Tensor::zeros(&[dout]);
        for row in dy.data().chunks(dout) {
            for (a, b) in db.data_mut().iter_mut().zip(row) {
                *a += b;
            }
        }
        db
    });
    Ok(LinearGrads { input: dx, weight: dw, bias })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case() {
        let x = Tensor::from_vec(&[1, 2], vec![1., 2.]).unwrap();
        let w = Tensor::from_vec(&[1, 2], vec![3., 4.]).unwrap();
        let b = Tensor::from_vec(&[1], vec![5.]).unwrap();
        assert_eq!(linear(&x, &w, Some(&b)).unwrap().data(), &[16.0]);
    }

    #[test]
    fn identity_weight() {
        let x = Tensor::from_vec(&[2, 3], vec![1., -2., 3., 0.5, 0., 9.]).unwrap();
        let mut w = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            w.set(&[i, i], 1.0);
        }
        assert_eq!(linear(&x, &w, Some(&Tensor::zeros(&[3]))).unwrap(), x);
    }

    #[test]
    fn rejects_mismatch() {
        assert!(linear(&Tensor::zeros(&[2, 3]), &Tensor::zeros(&[4, 2]), None).is_err());
    }
}
