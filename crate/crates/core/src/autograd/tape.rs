//! Operation tape for reverse-mode differentiation.
//!
//! Every op executed on [`Var`]s appends a node holding its output value and,
//! when any input requires a gradient, the rule that maps the output gradient
//! back onto the inputs. `backward` walks the nodes in reverse order.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use crate::error::{Result, TctnError};
use crate::tensor::{Scalar, Tensor};

/// Vector-Jacobian product of one recorded operation.
pub(crate) trait BackwardOp<T: Scalar> {
    /// Gradients for each input, in input order. Entries with `needs[i] ==
    /// false` may be `None`.
    fn backward(
        &self,
        grad: &Tensor<T>,
        inputs: &[&Tensor<T>],
        output: &Tensor<T>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<T>>>;
}

struct Record<T> {
    inputs: Vec<usize>,
    op: Box<dyn BackwardOp<T>>,
}

struct Node<T> {
    value: Rc<Tensor<T>>,
    requires_grad: bool,
    record: Option<Record<T>>,
}

pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
    leaf_grads: RefCell<BTreeMap<usize, Tensor<T>>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> fmt::Debug for Tape<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("nodes", &self.nodes.borrow().len())
            .finish()
    }
}

/// Handle to a value recorded on a [`Tape`].
pub struct Var<'t, T> {
    tape: &'t Tape<T>,
    id: usize,
}

impl<T> Clone for Var<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for Var<'_, T> {}

impl<T> fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var({})", self.id)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            leaf_grads: RefCell::new(BTreeMap::new()),
        }
    }

    /// Records an input tensor. Leaves with `requires_grad` receive gradients
    /// on `backward`.
    pub fn leaf(&self, value: Tensor<T>, requires_grad: bool) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            requires_grad,
            record: None,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.leaf(value, false)
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Clears accumulated leaf gradients.
    pub fn zero_grads(&self) {
        self.leaf_grads.borrow_mut().clear();
    }

    pub(crate) fn record(
        &self,
        name: &'static str,
        inputs: &[Var<'_, T>],
        output: Tensor<T>,
        op: impl BackwardOp<T> + 'static,
    ) -> Result<Var<'_, T>> {
        if !output.is_finite() {
            return Err(TctnError::Numeric {
                op: name,
                location: None,
            });
        }
        let mut nodes = self.nodes.borrow_mut();
        let requires_grad = inputs.iter().any(|v| nodes[v.id].requires_grad);
        let record = requires_grad.then(|| Record {
            inputs: inputs.iter().map(|v| v.id).collect(),
            op: Box::new(op) as Box<dyn BackwardOp<T>>,
        });
        nodes.push(Node {
            value: Rc::new(output),
            requires_grad,
            record,
        });
        Ok(Var {
            tape: self,
            id: nodes.len() - 1,
        })
    }

    fn backward_from(&self, loss: usize) -> Result<()> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss];
        if root.value.numel() != 1 {
            return Err(TctnError::shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        if !root.requires_grad {
            return Ok(());
        }

        let mut grads: Vec<Option<Tensor<T>>> = Vec::new();
        grads.resize_with(loss + 1, || None);
        grads[loss] = Some(Tensor::ones(root.value.shape()));

        let mut leaf_grads = self.leaf_grads.borrow_mut();
        for id in (0..=loss).rev() {
            let Some(grad) = grads[id].take() else {
                continue;
            };
            let node = &nodes[id];
            match &node.record {
                None => {
                    if node.requires_grad {
                        match leaf_grads.get_mut(&id) {
                            Some(acc) => add_into(acc, &grad),
                            None => {
                                leaf_grads.insert(id, grad);
                            }
                        }
                    }
                }
                Some(record) => {
                    let inputs: Vec<&Tensor<T>> = record
                        .inputs
                        .iter()
                        .map(|&i| nodes[i].value.as_ref())
                        .collect();
                    let needs: Vec<bool> = record
                        .inputs
                        .iter()
                        .map(|&i| nodes[i].requires_grad)
                        .collect();
                    let input_grads = record.op.backward(&grad, &inputs, &node.value, &needs);
                    for ((&input, g), need) in record.inputs.iter().zip(input_grads).zip(needs) {
                        let (Some(g), true) = (g, need) else { continue };
                        match &mut grads[input] {
                            Some(acc) => add_into(acc, &g),
                            slot => *slot = Some(g),
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn add_into<T: Scalar>(acc: &mut Tensor<T>, g: &Tensor<T>) {
    debug_assert_eq!(acc.shape(), g.shape());
    for (a, &b) in acc.data_mut().iter_mut().zip(g.data()) {
        *a += b;
    }
}

impl<'t, T: Scalar> Var<'t, T> {
    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn value(&self) -> Rc<Tensor<T>> {
        Rc::clone(&self.tape.nodes.borrow()[self.id].value)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self) -> Option<Tensor<T>> {
        self.tape.leaf_grads.borrow().get(&self.id).cloned()
    }

    pub(crate) fn same_tape(&self, other: &Var<'_, T>) -> bool {
        std::ptr::eq(self.tape, other.tape)
    }
}

/// Back-propagates from a scalar `loss`, adding into the gradients of every
/// `requires_grad` leaf it depends on. Repeated calls accumulate.
pub fn backward<T: Scalar>(loss: Var<'_, T>) -> Result<()> {
    loss.tape.backward_from(loss.id)
}
