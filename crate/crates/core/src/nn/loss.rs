use super::{shape_err, NnError};
use crate::Tensor;

/// Probabilities are clamped to at least this before taking logs.
pub const CE_PROB_FLOOR: f64 = 1e-12;

/// Mean `−ln p[target]` over masked-in pixels of `probs: V×H×W`, and the
/// gradient wrt the logits that produced `probs` through a softmax over
/// `V`: `(p − onehot) / count` on masked-in pixels, zero elsewhere.
pub fn cross_entropy_masked(probs: &Tensor, targets: &[u16], mask: &[bool]) -> Result<(f64, Tensor), NnError> {
    if probs.ndim() != 3 {
        return shape_err(format!("cross entropy expects V×H×W probs, got {:?}", probs.shape()));
    }
    let (v, hw) = (probs.dim(0), probs.dim(1) * probs.dim(2));
    if targets.len() != hw || mask.len() != hw {
        return shape_err(format!("targets/mask length {}/{}, expected {hw}", targets.len(), mask.len()));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(NnError::EmptyMask);
    }
    let p = probs.data();
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(probs.shape());
    let scale = 1.0 / count as f64;
    for px in 0..hw {
        if !mask[px] {
            continue;
        }
        let t = targets[px] as usize;
        if t >= v {
            return shape_err(format!("target id {t} out of range for {v} classes"));
        }
        loss -= p[t * hw + px].max(CE_PROB_FLOOR).ln();
        for c in 0..v {
            let onehot = if c == t { 1.0 } else { 0.0 };
            grad.data_mut()[c * hw + px] = (p[c * hw + px] - onehot) * scale;
        }
    }
    Ok((loss * scale, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_four_class() {
        let p = Tensor::full(&[4, 2, 2], 0.25);
        let (l, _) = cross_entropy_masked(&p, &[0, 1, 2, 3], &[true; 4]).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-12);
        assert!((l - 1.386294).abs() < 1e-6);
    }

    #[test]
    fn onehot_probs_give_zero_loss() {
        let mut p = Tensor::zeros(&[3, 1, 2]);
        p.set(&[2, 0, 0], 1.0 - 1e-12);
        p.set(&[1, 0, 1], 1.0 - 1e-12);
        let (l, _) = cross_entropy_masked(&p, &[2, 1], &[true, true]).unwrap();
        assert!(l.abs() < 1e-11);
    }

    #[test]
    fn masked_pixels_do_not_contribute() {
        let p = Tensor::from_vec(&[2, 1, 2], vec![0.9, 0.2, 0.1, 0.8]).unwrap();
        let (l, g) = cross_entropy_masked(&p, &[0, 0], &[true, false]).unwrap();
        assert!((l + 0.9f64.ln()).abs() < 1e-15);
        assert_eq!(g.at(&[0, 0, 1]), 0.0);
        assert_eq!(g.at(&[1, 0, 1]), 0.0);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let p = Tensor::full(&[2, 1, 1], 0.5);
        assert_eq!(cross_entropy_masked(&p, &[0], &[false]).unwrap_err(), NnError::EmptyMask);
    }
}
