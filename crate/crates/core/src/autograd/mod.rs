//! Tape-based reverse-mode automatic differentiation.
//!
//! Every op appends a node to a [`Tape`]. Nodes are pushed after their
//! inputs, so the tape order is a topological order and
//! [`Tape::backward`] walks it once in reverse. Leaf gradients accumulate
//! across backward calls until the tape is dropped; parameter gradients are
//! moved out with [`Tape::accumulate_param_grads`].
//!
//! ```
//! use sincfuse::autograd::Tape;
//! use sincfuse::tensor::Tensor;
//!
//! let tape = Tape::<f64>::new();
//! let x = tape.leaf(Tensor::scalar(3.0));
//! let y = x.mul(x).unwrap();
//! tape.backward(y).unwrap();
//! assert_eq!(tape.grad(x).unwrap().data(), &[6.0]);
//! ```

mod kernels;
mod ops;
mod param;

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

pub use kernels::{conv1d, dot, ConvDims};
pub use ops::{softmax_in_place, BatchStats, Padding};
pub use param::{Module, Param};

use crate::error::{invalid, Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Backward rule for an op defined outside this module.
///
/// Returns one optional gradient per input, in input order.
pub trait Backward<T: Scalar> {
    fn backward(
        &self,
        grad: &Tensor<T>,
        inputs: &[&Tensor<T>],
        output: &Tensor<T>,
    ) -> Vec<Option<Tensor<T>>>;
}

pub(crate) enum Op<T: Scalar> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, T),
    MulConst(usize, Tensor<T>),
    MatMul(usize, usize),
    MatVec(usize, usize),
    Tanh(usize),
    Sigmoid(usize),
    LeakyRelu(usize, T),
    Abs(usize),
    Softmax(usize),
    Concat {
        inputs: Vec<usize>,
        axis: usize,
    },
    Slice {
        input: usize,
        axis: usize,
        start: usize,
    },
    Reshape(usize),
    Transpose(usize),
    SumAxis {
        input: usize,
        axis: usize,
        mean: bool,
    },
    MaxPool {
        input: usize,
        argmax: Vec<usize>,
    },
    Conv1d {
        input: usize,
        weight: usize,
        bias: Option<usize>,
        dims: ConvDims,
    },
    BatchNorm {
        input: usize,
        gamma: usize,
        beta: usize,
        xhat: Vec<T>,
        inv_std: Vec<T>,
    },
    ChannelAffine {
        input: usize,
        scale: usize,
        shift: usize,
    },
    CrossEntropy {
        logits: usize,
        label: usize,
        probs: Vec<T>,
    },
    Gather {
        table: usize,
        rows: Vec<Option<usize>>,
    },
    Custom {
        inputs: Vec<usize>,
        rule: Box<dyn Backward<T>>,
    },
}

pub(crate) struct Node<T: Scalar> {
    value: Arc<Tensor<T>>,
    op: Op<T>,
    requires_grad: bool,
    grad: Option<Tensor<T>>,
}

/// Recording context for one forward/backward computation.
pub struct Tape<T: Scalar> {
    nodes: RefCell<Vec<Node<T>>>,
    params: RefCell<HashMap<u64, usize>>,
    grad_enabled: bool,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T: Scalar> {
    tape: &'t Tape<T>,
    id: usize,
}

impl<T: Scalar> std::fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{} {:?}", self.id, self.value())
    }
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            params: RefCell::new(HashMap::new()),
            grad_enabled: true,
        }
    }

    /// A tape on which parameters enter as constants; nothing is
    /// differentiable.
    pub fn inference() -> Self {
        Self {
            grad_enabled: false,
            ..Self::new()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push_raw(value, Op::Leaf, false)
    }

    /// A differentiable leaf; its gradient is read back with [`Tape::grad`].
    pub fn leaf(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push_raw(value, Op::Leaf, self.grad_enabled)
    }

    /// Leaf for a model parameter. Repeated calls for the same parameter on
    /// one tape return the same node, so shared weights sum their
    /// gradients.
    pub fn param(&self, p: &Param<T>) -> Var<'_, T> {
        if let Some(&id) = self.params.borrow().get(&p.key()) {
            return Var { tape: self, id };
        }
        let v = self.push_shared(
            p.shared_value(),
            Op::Leaf,
            self.grad_enabled && p.trainable(),
        );
        self.params.borrow_mut().insert(p.key(), v.id);
        v
    }

    /// Records an op whose backward rule is supplied by the caller.
    pub fn custom<'t>(
        &'t self,
        inputs: &[Var<'t, T>],
        output: Tensor<T>,
        rule: Box<dyn Backward<T>>,
    ) -> Var<'t, T> {
        let ids = inputs.iter().map(|v| v.id).collect();
        self.push(output, Op::Custom { inputs: ids, rule })
    }

    fn push_raw(&self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var<'_, T> {
        self.push_shared(Arc::new(value), op, requires_grad)
    }

    fn push_shared(&self, value: Arc<Tensor<T>>, op: Op<T>, requires_grad: bool) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// Pushes an op result; the node requires grad when any input does.
    /// Ops with no differentiable input are stored as plain constants.
    pub(crate) fn push(&self, value: Tensor<T>, op: Op<T>) -> Var<'_, T> {
        let requires_grad = {
            let nodes = self.nodes.borrow();
            op.inputs().iter().any(|&i| nodes[i].requires_grad)
        };
        if requires_grad {
            self.push_raw(value, op, true)
        } else {
            self.push_raw(value, Op::Leaf, false)
        }
    }

    pub(crate) fn value_of(&self, id: usize) -> Arc<Tensor<T>> {
        Arc::clone(&self.nodes.borrow()[id].value)
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var<'_, T>) -> Option<Tensor<T>> {
        self.nodes.borrow()[v.id].grad.clone()
    }

    /// Adds this tape's gradient for `p` (if `p` was used) into `p.grad`.
    pub fn accumulate_param_grads(&self, p: &mut Param<T>) {
        if let Some(&id) = self.params.borrow().get(&p.key()) {
            if let Some(g) = &self.nodes.borrow()[id].grad {
                p.grad_mut().add_assign(g);
            }
        }
    }

    /// Reverse sweep from a scalar loss. Leaf gradients accumulate into the
    /// leaves' accumulators; calling twice doubles them.
    pub fn backward(&self, loss: Var<'_, T>) -> Result<()> {
        let mut leaf_grads = Vec::new();
        {
            let nodes = self.nodes.borrow();
            let root = &nodes[loss.id];
            if root.value.len() != 1 {
                return Err(invalid!(
                    "backward needs a scalar loss, got shape {:?}",
                    root.value.shape()
                ));
            }
            if !root.requires_grad {
                return Err(Error::Untaped);
            }
            let mut grads: Vec<Option<Tensor<T>>> = (0..=loss.id).map(|_| None).collect();
            grads[loss.id] = Some(Tensor::full(root.value.shape().to_vec(), T::one()));
            for id in (0..=loss.id).rev() {
                let Some(g) = grads[id].take() else { continue };
                let node = &nodes[id];
                if let Op::Leaf = node.op {
                    leaf_grads.push((id, g));
                    continue;
                }
                for (parent, pg) in node.op.backward(&g, node, &nodes) {
                    if !nodes[parent].requires_grad {
                        continue;
                    }
                    match &mut grads[parent] {
                        Some(acc) => acc.add_assign(&pg),
                        slot => *slot = Some(pg),
                    }
                }
            }
        }
        let mut nodes = self.nodes.borrow_mut();
        for (id, g) in leaf_grads {
            match &mut nodes[id].grad {
                Some(acc) => acc.add_assign(&g),
                slot => *slot = Some(g),
            }
        }
        Ok(())
    }
}

impl<'t, T: Scalar> Var<'t, T> {
    pub fn value(&self) -> Arc<Tensor<T>> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }
}
