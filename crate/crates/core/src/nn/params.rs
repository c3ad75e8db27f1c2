use std::collections::HashMap;

use super::NnError;
use crate::Tensor;

/// A named parameter with its gradient and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub m: Tensor,
    pub v: Tensor,
}

/// Ordered collection of named parameters. Insertion order is the
/// serialization and gradient-accumulation order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<usize, NnError> {
        if self.index.contains_key(name) {
            return Err(NnError::DuplicateParam(name.to_string()));
        }
        let zeros = Tensor::zeros(value.shape());
        self.params.push(Param {
            name: name.to_string(),
            grad: zeros.clone(),
            m: zeros.clone(),
            v: zeros,
            value,
        });
        self.index.insert(name.to_string(), self.params.len() - 1);
        Ok(self.params.len() - 1)
    }

    pub fn index_of(&self, name: &str) -> Result<usize, NnError> {
        self.index.get(name).copied().ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, NnError> {
        Ok(&self.params[self.index_of(name)?].value)
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor, NnError> {
        let i = self.index_of(name)?;
        Ok(&mut self.params[i].value)
    }

    pub fn grad(&self, name: &str) -> Result<&Tensor, NnError> {
        Ok(&self.params[self.index_of(name)?].grad)
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Adds `grads` (one tensor per parameter, store order) into the
    /// stored gradients.
    pub fn accumulate(&mut self, grads: &[Tensor]) -> Result<(), NnError> {
        if grads.len() != self.params.len() {
            return Err(NnError::Shape(format!("{} gradients for {} parameters", grads.len(), self.params.len())));
        }
        for (p, g) in self.params.iter_mut().zip(grads) {
            if p.grad.shape() != g.shape() {
                return Err(NnError::Shape(format!("gradient for {} has shape {:?}, expected {:?}", p.name, g.shape(), p.grad.shape())));
            }
            p.grad.add_assign(g);
        }
        Ok(())
    }

    /// Zero tensors shaped like every parameter, in store order.
    pub fn zero_grad_buffers(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| Tensor::zeros(p.value.shape())).collect()
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for p in &mut self.params {
            p.grad.scale(factor);
        }
    }

    pub fn grads_finite(&self) -> bool {
        self.params.iter().all(|p| p.grad.all_finite())
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One Adam update with bias correction; `t` is the 1-based step count.
pub fn adam_step(store: &mut ParamStore, opt: &Adam, t: u64) {
    assert!(t >= 1, "adam step count is 1-based");
    let c1 = 1.0 - opt.beta1.powi(t as i32);
    let c2 = 1.0 - opt.beta2.powi(t as i32);
    for p in store.params_mut() {
        let (value, grad, m, v) = (p.value.data_mut(), p.grad.data(), p.m.data_mut(), p.v.data_mut());
        for k in 0..value.len() {
            let g = grad[k];
            m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * g;
            v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * g * g;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            value[k] -= opt.lr * m_hat / (v_hat.sqrt() + opt.eps);
        }
    }
}
