use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::tensor::{Scalar, Tensor};

static NEXT_KEY: AtomicU64 = AtomicU64::new(1);

/// A named model tensor with its gradient accumulator.
///
/// Non-trainable parameters (batch-norm running statistics) are carried for
/// checkpointing but never enter a tape as differentiable leaves.
#[derive(Debug)]
pub struct Param<T> {
    name: String,
    value: Arc<Tensor<T>>,
    grad: Tensor<T>,
    trainable: bool,
    key: u64,
}

impl<T: Scalar> Clone for Param<T> {
    /// Clones receive a fresh key so that two copies used on one tape stay
    /// distinct leaves.
    fn clone(&self) -> Self {
        Self {
            name: self.name.clone(),
            value: Arc::new(self.value.as_ref().clone()),
            grad: self.grad.clone(),
            trainable: self.trainable,
            key: NEXT_KEY.fetch_add(1, Ordering::Relaxed),
        }
    }
}

impl<T: Scalar> Param<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape().to_vec());
        Self {
            name: name.into(),
            value: Arc::new(value),
            grad,
            trainable: true,
            key: NEXT_KEY.fetch_add(1, Ordering::Relaxed),
        }
    }

    pub fn buffer(name: impl Into<String>, value: Tensor<T>) -> Self {
        Self {
            trainable: false,
            ..Self::new(name, value)
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor<T> {
        &self.value
    }

    /// Copies the value first if a live tape still shares it.
    pub fn value_mut(&mut self) -> &mut Tensor<T> {
        Arc::make_mut(&mut self.value)
    }

    pub(crate) fn shared_value(&self) -> Arc<Tensor<T>> {
        Arc::clone(&self.value)
    }

    pub fn grad(&self) -> &Tensor<T> {
        &self.grad
    }

    pub fn grad_mut(&mut self) -> &mut Tensor<T> {
        &mut self.grad
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().iter_mut().for_each(|g| *g = T::zero());
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub(crate) fn key(&self) -> u64 {
        self.key
    }
}

/// Anything that owns parameters. Visit order is stable and defines the
/// checkpoint layout and optimizer state order.
pub trait Module<T: Scalar> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| {
            if p.trainable() {
                n += p.value().len()
            }
        });
        n
    }

    fn zero_grad(&mut self) {
        self.visit_params_mut(&mut |p| p.zero_grad());
    }

    /// Moves gradients recorded on `tape` into the parameters.
    fn collect_grads(&mut self, tape: &crate::autograd::Tape<T>) {
        self.visit_params_mut(&mut |p| tape.accumulate_param_grads(p));
    }
}
