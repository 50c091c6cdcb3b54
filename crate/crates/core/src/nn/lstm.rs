use rand::Rng;

use super::fan_in_bound;
use crate::autograd::{Module, Param, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// One direction of an LSTM. Gate rows are stacked in the order input,
/// forget, candidate, output.
#[derive(Clone, Debug)]
pub struct LstmDirection<T: Scalar> {
    /// `[4H, D]`
    pub w_ih: Param<T>,
    /// `[4H, H]`
    pub w_hh: Param<T>,
    /// `[4H]`
    pub bias: Param<T>,
}

impl<T: Scalar> LstmDirection<T> {
    /// Weights uniform in `±1/√H`; forget-gate bias 1, other biases 0.
    pub fn new(name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let bound = fan_in_bound(hidden);
        let mut bias = Tensor::zeros(vec![4 * hidden]);
        bias.data_mut()[hidden..2 * hidden]
            .iter_mut()
            .for_each(|b| *b = T::one());
        Self {
            w_ih: Param::new(
                format!("{name}.w_ih"),
                Tensor::uniform(vec![4 * hidden, input], bound, rng),
            ),
            w_hh: Param::new(
                format!("{name}.w_hh"),
                Tensor::uniform(vec![4 * hidden, hidden], bound, rng),
            ),
            bias: Param::new(format!("{name}.bias"), bias),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.value().shape()[1]
    }

    /// Runs over `x: [T, D]`, in reverse time order when `reverse` is set.
    /// Returns hidden states indexed by original time step.
    pub fn forward<'t>(
        &self,
        tape: &'t Tape<T>,
        x: Var<'t, T>,
        reverse: bool,
    ) -> Result<Vec<Var<'t, T>>> {
        let h = self.hidden();
        let shape = x.shape();
        if shape.len() != 2 || shape[0] == 0 {
            return Err(Error::EmptyTensor { op: "lstm" });
        }
        let steps = shape[0];
        // [T, 4H] input projections for all steps at once.
        let proj = x.matmul(tape.param(&self.w_ih).transpose()?)?;
        let w_hh = tape.param(&self.w_hh);
        let bias = tape.param(&self.bias);
        let mut hs = tape.constant(Tensor::zeros(vec![h]));
        let mut cs = tape.constant(Tensor::zeros(vec![h]));
        let mut out: Vec<Option<Var<'t, T>>> = vec![None; steps];
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..steps).rev())
        } else {
            Box::new(0..steps)
        };
        for t in order {
            let xt = proj.slice(0, t, 1)?.reshape(vec![4 * h])?;
            let gates = xt.add(w_hh.matvec(hs)?)?.add(bias)?;
            let i = gates.slice(0, 0, h)?.sigmoid()?;
            let f = gates.slice(0, h, h)?.sigmoid()?;
            let g = gates.slice(0, 2 * h, h)?.tanh()?;
            let o = gates.slice(0, 3 * h, h)?.sigmoid()?;
            cs = f.mul(cs)?.add(i.mul(g)?)?;
            hs = o.mul(cs.tanh()?)?;
            out[t] = Some(hs);
        }
        Ok(out
            .into_iter()
            .map(|v| v.expect("every step visited"))
            .collect())
    }
}

impl<T: Scalar> Module<T> for LstmDirection<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        f(&self.w_ih);
        f(&self.w_hh);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.w_ih);
        f(&mut self.w_hh);
        f(&mut self.bias);
    }
}

/// Bidirectional LSTM; step `t` of the output is `[h_fwd(t), h_bwd(t)]`.
#[derive(Clone, Debug)]
pub struct BiLstm<T: Scalar> {
    pub forward_dir: LstmDirection<T>,
    pub backward_dir: LstmDirection<T>,
}

impl<T: Scalar> BiLstm<T> {
    pub fn new(name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            forward_dir: LstmDirection::new(&format!("{name}.fwd"), input, hidden, rng),
            backward_dir: LstmDirection::new(&format!("{name}.bwd"), input, hidden, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.forward_dir.hidden()
    }

    /// `[T, D] -> [T, 2H]`
    pub fn forward<'t>(&self, tape: &'t Tape<T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        let h = self.hidden();
        let stack = |states: Vec<Var<'t, T>>| -> Result<Var<'t, T>> {
            let rows = states
                .into_iter()
                .map(|s| s.reshape(vec![1, h]))
                .collect::<Result<Vec<_>>>()?;
            Var::concat(&rows, 0)
        };
        let fwd = stack(self.forward_dir.forward(tape, x, false)?)?;
        let bwd = stack(self.backward_dir.forward(tape, x, true)?)?;
        Var::concat(&[fwd, bwd], 1)
    }
}

impl<T: Scalar> Module<T> for BiLstm<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        self.forward_dir.visit_params(f);
        self.backward_dir.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.forward_dir.visit_params_mut(f);
        self.backward_dir.visit_params_mut(f);
    }
}
