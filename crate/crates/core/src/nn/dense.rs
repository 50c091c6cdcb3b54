use rand::Rng;

use super::fan_in_bound;
use crate::autograd::{Module, Param, Tape, Var};
use crate::error::Result;
use crate::tensor::{Scalar, Tensor};

/// Fully connected layer `W·x + b` with `W: [out, in]`.
#[derive(Clone, Debug)]
pub struct Dense<T: Scalar> {
    pub weight: Param<T>,
    pub bias: Param<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(name: &str, inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = fan_in_bound(inputs);
        Self {
            weight: Param::new(
                format!("{name}.weight"),
                Tensor::uniform(vec![outputs, inputs], bound, rng),
            ),
            bias: Param::new(
                format!("{name}.bias"),
                Tensor::uniform(vec![outputs], bound, rng),
            ),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.value().shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.value().shape()[0]
    }

    pub fn forward<'t>(&self, tape: &'t Tape<T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        tape.param(&self.weight)
            .matvec(x)?
            .add(tape.param(&self.bias))
    }
}

impl<T: Scalar> Module<T> for Dense<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}
