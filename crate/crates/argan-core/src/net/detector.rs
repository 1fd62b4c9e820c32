//! Shadow attention detector: ten Conv+BN+LReLU layers, a convolutional
//! LSTM carrying memory across progressive steps, and a sigmoid head that
//! emits a single-channel attention map in [0,1].

use super::{block_entries, conv_entries, set_block_mode, ConvBnBlock, StateEntry};
use crate::error::{ArganError, Result};
use crate::nn::{conv2d, conv_lstm_step, ConvLstmParams, ConvLstmState, ConvParams, Mode};
use crate::rng::Rng;
use crate::tensor::{concat, Scalar, Tensor};

const CONV_LAYERS: usize = 10;

pub struct DetectorNet<T: Scalar = f32> {
    pub blocks: Vec<ConvBnBlock<T>>,
    pub lstm: ConvLstmParams<T>,
    pub head: ConvParams<T>,
    pub width: usize,
}

impl<T: Scalar> DetectorNet<T> {
    /// `width` is the conv-stack channel count and the LSTM hidden size
    /// (64 in the full-scale network).
    pub fn new(rng: &mut Rng, width: usize) -> Self {
        let mut blocks = Vec::with_capacity(CONV_LAYERS);
        // The first block sees the image plus the prior attention map.
        blocks.push(ConvBnBlock::new(rng, 4, width, 3, 1, 1));
        for _ in 1..CONV_LAYERS {
            blocks.push(ConvBnBlock::new(rng, width, width, 3, 1, 1));
        }
        DetectorNet {
            blocks,
            lstm: crate::nn::lstm_params(rng, width, width),
            head: crate::nn::conv_params(rng, 1, width, 3, 1, 1),
            width,
        }
    }

    /// One detection pass: attention map plus the advanced LSTM state.
    pub fn forward(
        &self,
        img: &Tensor<T>,
        prior_attention: &Tensor<T>,
        state: &ConvLstmState<T>,
    ) -> Result<(Tensor<T>, ConvLstmState<T>)> {
        if img.ndim() != 4 || img.shape()[1] != 3 {
            return Err(ArganError::Shape(format!(
                "detector expects a Bx3xHxW image, got {:?}",
                img.shape()
            )));
        }
        let (b, _, h, w) = (
            img.shape()[0],
            img.shape()[1],
            img.shape()[2],
            img.shape()[3],
        );
        if prior_attention.shape() != [b, 1, h, w] {
            return Err(ArganError::Shape(format!(
                "detector prior attention must be {:?}, got {:?}",
                [b, 1, h, w],
                prior_attention.shape()
            )));
        }
        if state.h.shape() != [b, self.width, h, w] {
            return Err(ArganError::Shape(format!(
                "detector LSTM state must be {:?}, got {:?}",
                [b, self.width, h, w],
                state.h.shape()
            )));
        }
        let mut x = concat(&[img.clone(), prior_attention.clone()], 1)?;
        for block in &self.blocks {
            x = block.forward(&x)?;
        }
        let (hidden, next_state) = conv_lstm_step(&x, state, &self.lstm)?;
        let attention = conv2d(&hidden, &self.head)?.sigmoid();
        Ok((attention, next_state))
    }

    pub fn zero_state(&self, batch: usize, h: usize, w: usize) -> ConvLstmState<T> {
        ConvLstmState::zeros(batch, self.width, h, w)
    }

    pub fn set_mode(&self, mode: Mode) {
        for b in &self.blocks {
            set_block_mode(b, mode);
        }
    }

    pub fn state_entries(&self, prefix: &str, out: &mut Vec<StateEntry<T>>) {
        for (i, b) in self.blocks.iter().enumerate() {
            block_entries(&format!("{prefix}.conv{i:02}"), b, out);
        }
        for (name, gate) in [
            ("lstm.input", &self.lstm.w_input),
            ("lstm.forget", &self.lstm.w_forget),
            ("lstm.output", &self.lstm.w_output),
            ("lstm.cell", &self.lstm.w_cell),
        ] {
            conv_entries(&format!("{prefix}.{name}"), gate, out);
        }
        conv_entries(&format!("{prefix}.head"), &self.head, out);
    }
}
