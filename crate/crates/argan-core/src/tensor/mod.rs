//! Dense n-dimensional tensors with reverse-mode automatic differentiation.
//!
//! Tensors are immutable after creation except for their gradient buffer
//! (and leaf parameter data, which optimizers update between graphs). Every
//! non-leaf tensor records the operation that produced it; `backward` walks
//! the resulting graph in reverse topological order.
//!
//! Float type is generic: f32 is the training element type, f64 is used for
//! gradient checking and oracle comparisons.

mod autograd;
mod ops;
mod scalar;

pub use autograd::{backward, grad_check, zero_grads, Graph};
pub use ops::{
    activation, concat, elementwise, matmul, narrow, reduce, reshape, ActivationKind,
    ElementwiseKind, ReduceKind,
};
pub use scalar::Scalar;

use crate::error::{ArganError, Result};
use std::cell::{Cell, Ref, RefCell, RefMut};
use std::rc::Rc;

thread_local! {
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Run `f` with graph recording disabled (inference and finite-difference
/// probes). Restores the previous state on exit.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    let prev = GRAD_ENABLED.with(|g| g.replace(false));
    let out = f();
    GRAD_ENABLED.with(|g| g.set(prev));
    out
}

pub(crate) fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

/// Backward rule: maps the upstream gradient to per-parent contributions.
/// The bool slice says which parents actually need a gradient; rules may
/// return `None` for the others to skip the work.
pub type BackwardFn<T> = Box<dyn Fn(&[T], &[bool]) -> Vec<Option<Vec<T>>>>;

pub(crate) struct OpNode<T: Scalar> {
    pub(crate) parents: Vec<Tensor<T>>,
    pub(crate) backward: BackwardFn<T>,
}

struct Inner<T: Scalar> {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<T>>,
    grad: RefCell<Option<Vec<T>>>,
    requires_grad: bool,
    op: Option<OpNode<T>>,
}

/// Handle to a shared tensor node; cloning is cheap.
pub struct Tensor<T: Scalar = f32> {
    inner: Rc<Inner<T>>,
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Rc::clone(&self.inner),
        }
    }
}

impl<T: Scalar> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Tensor(id={}, shape={:?}, requires_grad={})",
            self.inner.id, self.inner.shape, self.inner.requires_grad
        )
    }
}

fn next_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

impl<T: Scalar> Tensor<T> {
    fn build(
        data: Vec<T>,
        shape: Vec<usize>,
        requires_grad: bool,
        op: Option<OpNode<T>>,
    ) -> Self {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        Tensor {
            inner: Rc::new(Inner {
                id: next_id(),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad,
                op,
            }),
        }
    }

    /// Leaf tensor that does not track gradients.
    pub fn from_vec(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) || data.len() != numel {
            return Err(ArganError::Shape(format!(
                "tensor data length {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Self::build(data, shape.to_vec(), false, None))
    }

    /// Leaf tensor that accumulates gradients (a trainable parameter).
    pub fn param(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) || data.len() != numel {
            return Err(ArganError::Shape(format!(
                "tensor data length {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Self::build(data, shape.to_vec(), true, None))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel: usize = shape.iter().product();
        Self::build(vec![T::ZERO; numel], shape.to_vec(), false, None)
    }

    pub fn full(shape: &[usize], v: T) -> Self {
        let numel: usize = shape.iter().product();
        Self::build(vec![v; numel], shape.to_vec(), false, None)
    }

    pub fn scalar(v: T) -> Self {
        Self::build(vec![v], vec![1], false, None)
    }

    /// Interior node produced by an operation. Public so that layers (and
    /// tests that inject faulty rules) can define custom ops.
    pub fn from_op(
        data: Vec<T>,
        shape: &[usize],
        parents: Vec<Tensor<T>>,
        backward: BackwardFn<T>,
    ) -> Self {
        let track = grad_enabled() && parents.iter().any(|p| p.needs_grad());
        let op = if track {
            Some(OpNode { parents, backward })
        } else {
            None
        };
        Self::build(data, shape.to_vec(), false, op)
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn ndim(&self) -> usize {
        self.inner.shape.len()
    }

    pub fn data(&self) -> Ref<'_, Vec<T>> {
        self.inner.data.borrow()
    }

    /// Mutable access to leaf data; the sanctioned users are optimizers and
    /// checkpoint restore, between graph constructions.
    pub fn data_mut(&self) -> RefMut<'_, Vec<T>> {
        self.inner.data.borrow_mut()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.inner.data.borrow().clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.numel(), 1, "item() on non-scalar tensor");
        self.inner.data.borrow()[0]
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    /// True if backward must deliver a gradient here (leaf parameter or
    /// interior node on a path to one).
    pub fn needs_grad(&self) -> bool {
        self.inner.requires_grad || self.inner.op.is_some()
    }

    /// Accumulated gradient, if any. Absent means zero (e.g. a leaf that is
    /// disconnected from the loss).
    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// New leaf sharing no graph history with `self` (data is copied).
    pub fn detach(&self) -> Tensor<T> {
        Self::build(self.to_vec(), self.inner.shape.clone(), false, None)
    }

    pub(crate) fn accum_grad(&self, contrib: Vec<T>) {
        debug_assert_eq!(contrib.len(), self.numel());
        let mut g = self.inner.grad.borrow_mut();
        match g.as_mut() {
            Some(buf) => {
                for (d, s) in buf.iter_mut().zip(&contrib) {
                    *d += *s;
                }
            }
            None => *g = Some(contrib),
        }
    }

    pub(crate) fn take_grad(&self) -> Option<Vec<T>> {
        self.inner.grad.borrow_mut().take()
    }

    pub(crate) fn op(&self) -> Option<&OpNode<T>> {
        self.inner.op.as_ref()
    }

    pub(crate) fn ptr_key(&self) -> usize {
        Rc::as_ptr(&self.inner) as usize
    }

    pub fn has_nan(&self) -> bool {
        self.inner.data.borrow().iter().any(|v| v.is_nan())
    }
}
