use std::cell::{Ref, RefCell};
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;

use crate::error::{Result, TensorError};
use crate::ops::Op;

/// A dense row-major `f64` array that may take part in a differentiation graph.
///
/// Tensors are immutable once built. Every differentiable operation returns a
/// new tensor that remembers its operands, so the graph is rebuilt on each
/// forward pass and discarded when the last handle is dropped. Cloning a
/// `Tensor` clones the handle, not the buffer.
#[derive(Clone)]
pub struct Tensor(Rc<Node>);

pub(crate) struct Node {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<f64>>>,
    op: Option<Op>,
}

fn check_shape(shape: &[usize], len: usize) -> Result<()> {
    if shape.is_empty() {
        return Err(TensorError::InvalidShape {
            op: "tensor",
            shape: shape.to_vec(),
            reason: "rank must be at least 1",
        });
    }
    if shape.contains(&0) {
        return Err(TensorError::InvalidShape {
            op: "tensor",
            shape: shape.to_vec(),
            reason: "every dimension must be at least 1",
        });
    }
    let n: usize = shape.iter().product();
    if n != len {
        return Err(TensorError::Contract(format!(
            "shape {shape:?} holds {n} elements but {len} values were given"
        )));
    }
    Ok(())
}

impl Tensor {
    /// A constant (non-differentiable) tensor.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        check_shape(shape, data.len())?;
        Ok(Self::leaf(shape.to_vec(), data, false))
    }

    /// A leaf that collects gradients during [`Tensor::backward`].
    pub fn variable(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        check_shape(shape, data.len())?;
        Ok(Self::leaf(shape.to_vec(), data, true))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    /// Panics if `shape` has a zero dimension or is empty.
    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        check_shape(shape, n).expect("invalid shape");
        Self::leaf(shape.to_vec(), vec![value; n], false)
    }

    pub fn scalar(value: f64) -> Self {
        Self::leaf(vec![1], vec![value], false)
    }

    fn leaf(shape: Vec<usize>, data: Vec<f64>, requires_grad: bool) -> Self {
        Tensor(Rc::new(Node {
            shape,
            data,
            requires_grad,
            grad: RefCell::new(None),
            op: None,
        }))
    }

    /// Result of an operation. The op is only retained when some operand
    /// needs a gradient, so inference builds no graph.
    pub(crate) fn from_op(shape: Vec<usize>, data: Vec<f64>, op: Op) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let requires_grad = op.parents().iter().any(|p| p.requires_grad());
        Tensor(Rc::new(Node {
            shape,
            data,
            requires_grad,
            grad: RefCell::new(None),
            op: requires_grad.then_some(op),
        }))
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.0.data
    }

    pub fn len(&self) -> usize {
        self.0.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.data.is_empty()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.op.is_none()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        match self.0.data.as_slice() {
            [v] => Ok(*v),
            _ => Err(TensorError::Contract(format!(
                "item() needs exactly one element, shape is {:?}",
                self.shape()
            ))),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.data.clone()
    }

    /// Copy of the accumulated gradient, if any has been written.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.grad.borrow().clone()
    }

    pub fn grad_ref(&self) -> Ref<'_, Option<Vec<f64>>> {
        self.0.grad.borrow()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    /// A constant tensor holding the same values, cut off from the graph.
    pub fn detach(&self) -> Tensor {
        Self::leaf(self.0.shape.clone(), self.0.data.clone(), false)
    }

    /// Same buffer viewed with another shape of equal size.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        check_shape(shape, self.len())?;
        Ok(Tensor::from_op(
            shape.to_vec(),
            self.0.data.clone(),
            Op::Reshape(self.clone()),
        ))
    }

    /// Adds `f`'s contribution into this tensor's gradient buffer,
    /// allocating it on first use. No-op for tensors without gradients.
    pub(crate) fn accumulate_grad(&self, f: impl FnOnce(&mut [f64])) {
        if !self.0.requires_grad {
            return;
        }
        let mut slot = self.0.grad.borrow_mut();
        let buf = slot.get_or_insert_with(|| vec![0.0; self.0.data.len()]);
        f(buf);
    }

    /// Reverse-mode sweep from a scalar loss.
    ///
    /// Leaf gradients accumulate across calls; intermediate gradients are
    /// released as soon as they have been propagated.
    pub fn backward(&self) -> Result<()> {
        if self.len() != 1 {
            return Err(TensorError::Contract(format!(
                "backward() needs a scalar loss, got shape {:?}",
                self.shape()
            )));
        }
        if !self.requires_grad() {
            return Ok(());
        }
        let order = self.topological_order();
        self.accumulate_grad(|g| g[0] += 1.0);
        for node in order.iter().rev() {
            let Some(op) = &node.0.op else { continue };
            let grad = node.0.grad.borrow_mut().take();
            if let Some(grad) = grad {
                op.backward(node, &grad);
            }
        }
        Ok(())
    }

    /// Nodes reachable through differentiable edges, parents before children.
    fn topological_order(&self) -> Vec<Tensor> {
        let mut order = Vec::new();
        let mut seen: HashSet<*const Node> = HashSet::new();
        // (node, children already pushed)
        let mut stack = vec![(self.clone(), false)];
        while let Some((node, expanded)) = stack.pop() {
            if expanded {
                order.push(node);
                continue;
            }
            if !seen.insert(Rc::as_ptr(&node.0)) {
                continue;
            }
            stack.push((node.clone(), true));
            if let Some(op) = &node.0.op {
                for parent in op.parents() {
                    if parent.requires_grad() && !seen.contains(&Rc::as_ptr(&parent.0)) {
                        stack.push((parent.clone(), false));
                    }
                }
            }
        }
        order
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let preview: Vec<f64> = self.data().iter().take(8).copied().collect();
        f.debug_struct("Tensor")
            .field("shape", &self.shape())
            .field("requires_grad", &self.requires_grad())
            .field("data", &preview)
            .finish()
    }
}
