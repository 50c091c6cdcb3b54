use rand::Rng;

use super::fan_in_bound;
use crate::autograd::{Module, Padding, Param, Tape, Var};
use crate::error::Result;
use crate::tensor::{Scalar, Tensor};

/// Stride-1 1-D convolution over `[in_ch, T]` inputs.
///
/// Computes cross-correlation: the kernel is not flipped.
#[derive(Clone, Debug)]
pub struct Conv1dLayer<T: Scalar> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    pub padding: Padding,
}

impl<T: Scalar> Conv1dLayer<T> {
    pub fn new(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        width: usize,
        padding: Padding,
        rng: &mut impl Rng,
    ) -> Self {
        let bound = fan_in_bound(in_ch * width);
        Self {
            weight: Param::new(
                format!("{name}.weight"),
                Tensor::uniform(vec![out_ch, in_ch, width], bound, rng),
            ),
            bias: Param::new(
                format!("{name}.bias"),
                Tensor::uniform(vec![out_ch], bound, rng),
            ),
            padding,
        }
    }

    pub fn width(&self) -> usize {
        self.weight.value().shape()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value().shape()[0]
    }

    pub fn output_len(&self, len: usize) -> usize {
        match self.padding {
            Padding::Same => len,
            Padding::Valid => len + 1 - self.width(),
        }
    }

    pub fn forward<'t>(&self, tape: &'t Tape<T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        x.conv1d(
            tape.param(&self.weight),
            Some(tape.param(&self.bias)),
            self.padding,
        )
    }
}

impl<T: Scalar> Module<T> for Conv1dLayer<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}
