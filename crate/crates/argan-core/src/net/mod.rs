//! The network topology: shadow attention detector, shadow removal
//! encoder-decoder, the N-step recurrent generator that alternates them,
//! and the spectrally normalized discriminator.

mod detector;
mod discriminator;
mod generator;
mod remover;

pub use detector::DetectorNet;
pub use discriminator::DiscriminatorNet;
pub use generator::{Generator, GeneratorArch, GeneratorState};
pub use remover::RemoverNet;

use crate::nn::{batchnorm2d, conv2d, BatchNormState, ConvParams, Mode};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};
use std::cell::RefCell;
use std::rc::Rc;

/// Default negative slope for every LeakyReLU in the topology.
pub const LRELU_SLOPE: f64 = 0.2;

/// One Conv + BN + LeakyReLU block.
pub struct ConvBnBlock<T: Scalar = f32> {
    pub conv: ConvParams<T>,
    pub bn: BatchNormState<T>,
}

impl<T: Scalar> ConvBnBlock<T> {
    fn new(rng: &mut Rng, in_ch: usize, out_ch: usize, k: usize, stride: usize, pad: usize) -> Self {
        ConvBnBlock {
            conv: crate::nn::conv_params(rng, out_ch, in_ch, k, stride, pad),
            bn: BatchNormState::new(out_ch),
        }
    }

    fn forward(&self, x: &Tensor<T>) -> crate::Result<Tensor<T>> {
        let y = conv2d(x, &self.conv)?;
        let y = batchnorm2d(&y, &self.bn)?;
        Ok(y.leaky_relu(LRELU_SLOPE))
    }
}

/// A named piece of persistent state, for checkpoints.
pub struct StateEntry<T: Scalar = f32> {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: EntryKind<T>,
}

pub enum EntryKind<T: Scalar> {
    /// Trainable parameter (or frozen weight) living in the graph.
    Param(Tensor<T>),
    /// Raw buffer: BN running statistics, spectral u vectors.
    Buffer(Rc<RefCell<Vec<T>>>),
}

impl<T: Scalar> StateEntry<T> {
    pub fn param(name: impl Into<String>, t: &Tensor<T>) -> Self {
        StateEntry {
            name: name.into(),
            shape: t.shape().to_vec(),
            kind: EntryKind::Param(t.clone()),
        }
    }

    pub fn buffer(name: impl Into<String>, buf: &Rc<RefCell<Vec<T>>>) -> Self {
        let len = buf.borrow().len();
        StateEntry {
            name: name.into(),
            shape: vec![len],
            kind: EntryKind::Buffer(Rc::clone(buf)),
        }
    }

    pub fn read(&self) -> Vec<T> {
        match &self.kind {
            EntryKind::Param(t) => t.to_vec(),
            EntryKind::Buffer(b) => b.borrow().clone(),
        }
    }

    pub fn write(&self, data: &[T]) {
        match &self.kind {
            EntryKind::Param(t) => t.data_mut().copy_from_slice(data),
            EntryKind::Buffer(b) => b.borrow_mut().copy_from_slice(data),
        }
    }
}

fn block_entries<T: Scalar>(prefix: &str, b: &ConvBnBlock<T>, out: &mut Vec<StateEntry<T>>) {
    out.push(StateEntry::param(format!("{prefix}.weight"), &b.conv.weight));
    out.push(StateEntry::param(format!("{prefix}.bias"), &b.conv.bias));
    out.push(StateEntry::param(format!("{prefix}.gamma"), &b.bn.gamma));
    out.push(StateEntry::param(format!("{prefix}.beta"), &b.bn.beta));
    out.push(StateEntry::buffer(
        format!("{prefix}.running_mean"),
        &b.bn.running_mean,
    ));
    out.push(StateEntry::buffer(
        format!("{prefix}.running_var"),
        &b.bn.running_var,
    ));
}

fn conv_entries<T: Scalar>(prefix: &str, c: &ConvParams<T>, out: &mut Vec<StateEntry<T>>) {
    out.push(StateEntry::param(format!("{prefix}.weight"), &c.weight));
    out.push(StateEntry::param(format!("{prefix}.bias"), &c.bias));
}

/// Trainable parameters of a state-entry list (grad-carrying tensors only).
pub fn trainable_params<T: Scalar>(entries: &[StateEntry<T>]) -> Vec<Tensor<T>> {
    entries
        .iter()
        .filter_map(|e| match &e.kind {
            EntryKind::Param(t) if t.requires_grad() => Some(t.clone()),
            _ => None,
        })
        .collect()
}

fn set_block_mode<T: Scalar>(b: &ConvBnBlock<T>, mode: Mode) {
    b.bn.set_mode(mode);
}
