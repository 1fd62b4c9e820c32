//! Graph traversal, backpropagation, and the finite-difference harness.

use super::{no_grad, Scalar, Tensor};
use crate::error::{ArganError, Result};
use std::collections::HashSet;

/// The computation graph reachable from one root, in topological order
/// (every node appears after all of its operation inputs).
pub struct Graph<T: Scalar> {
    order: Vec<Tensor<T>>,
}

impl<T: Scalar> Graph<T> {
    /// Collect the nodes that participate in gradient flow, via an
    /// iterative post-order walk. Traversal order is fully determined by
    /// graph construction order, so backward is deterministic.
    pub fn build(root: &Tensor<T>) -> Self {
        let mut order = Vec::new();
        let mut visited: HashSet<usize> = HashSet::new();
        let mut stack: Vec<(Tensor<T>, bool)> = vec![(root.clone(), false)];
        while let Some((node, expanded)) = stack.pop() {
            if expanded {
                order.push(node);
                continue;
            }
            if !visited.insert(node.ptr_key()) {
                continue;
            }
            stack.push((node.clone(), true));
            if let Some(op) = node.op() {
                for p in op.parents.iter().rev() {
                    if p.needs_grad() {
                        stack.push((p.clone(), false));
                    }
                }
            }
        }
        Graph { order }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Reverse-mode sweep from a scalar loss. Every reachable leaf with
/// requires_grad accumulates its exact gradient; repeated calls without
/// `zero_grad` keep accumulating.
pub fn backward<T: Scalar>(loss: &Tensor<T>) -> Result<()> {
    if loss.numel() != 1 {
        return Err(ArganError::Shape(format!(
            "backward requires a scalar loss, got shape {:?}",
            loss.shape()
        )));
    }
    let graph = Graph::build(loss);
    loss.accum_grad(vec![T::ONE]);
    for node in graph.order.iter().rev() {
        let Some(op) = node.op() else { continue };
        // Interior gradients are consumed here and freed immediately.
        let Some(up) = node.take_grad() else { continue };
        let needs: Vec<bool> = op.parents.iter().map(|p| p.needs_grad()).collect();
        let contribs = (op.backward)(&up, &needs);
        debug_assert_eq!(contribs.len(), op.parents.len());
        for (parent, contrib) in op.parents.iter().zip(contribs) {
            if let Some(c) = contrib {
                if parent.needs_grad() {
                    parent.accum_grad(c);
                }
            }
        }
    }
    Ok(())
}

/// Max relative disagreement between the analytic gradient of `f` at `x`
/// and central finite differences with step `eps`. Run in f64.
///
/// The error for component i is |a_i - n_i| / max(|a_i|, |n_i|, 1e-8).
pub fn grad_check<F>(f: F, x: &Tensor<f64>, eps: f64) -> Result<f64>
where
    F: Fn(&Tensor<f64>) -> Result<Tensor<f64>>,
{
    let x0 = x.to_vec();
    let shape = x.shape().to_vec();

    let leaf = Tensor::param(x0.clone(), &shape)?;
    let y = f(&leaf)?;
    if y.numel() != 1 {
        return Err(ArganError::Shape(format!(
            "grad_check requires a scalar-valued function, got {:?}",
            y.shape()
        )));
    }
    backward(&y)?;
    let analytic = leaf.grad().unwrap_or_else(|| vec![0.0; x0.len()]);

    let eval = |data: Vec<f64>| -> Result<f64> {
        no_grad(|| {
            let probe = Tensor::from_vec(data, &shape)?;
            Ok(f(&probe)?.item())
        })
    };

    let mut max_err = 0.0f64;
    for i in 0..x0.len() {
        let mut plus = x0.clone();
        plus[i] += eps;
        let mut minus = x0.clone();
        minus[i] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if err > max_err {
            max_err = err;
        }
    }
    Ok(max_err)
}

/// Reset the gradients of a parameter list (between optimizer steps).
pub fn zero_grads<T: Scalar>(params: &[Tensor<T>]) {
    for p in params {
        p.zero_grad();
    }
}
