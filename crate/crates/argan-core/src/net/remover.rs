//! Shadow removal encoder-decoder: stride-2 conv encoder, mirrored
//! deconv decoder with skip concatenations, and a sigmoid tail whose output
//! is gated by the attention map to form a non-negative brightening
//! residual: O = clamp(O_prev + S*A, 0, 1).

use super::{block_entries, conv_entries, set_block_mode, ConvBnBlock, StateEntry, LRELU_SLOPE};
use crate::error::{ArganError, Result};
use crate::nn::{batchnorm2d, conv2d, deconv2d, BatchNormState, ConvParams, Mode};
use crate::rng::Rng;
use crate::tensor::{concat, Scalar, Tensor};

struct DeconvBnBlock<T: Scalar> {
    deconv: ConvParams<T>,
    bn: BatchNormState<T>,
}

impl<T: Scalar> DeconvBnBlock<T> {
    fn new(rng: &mut Rng, in_ch: usize, out_ch: usize) -> Self {
        DeconvBnBlock {
            deconv: crate::nn::deconv_params(rng, in_ch, out_ch, 4, 2, 1),
            bn: BatchNormState::new(out_ch),
        }
    }

    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = deconv2d(x, &self.deconv)?;
        let y = batchnorm2d(&y, &self.bn)?;
        Ok(y.leaky_relu(LRELU_SLOPE))
    }
}

pub struct RemoverNet<T: Scalar = f32> {
    encoder: Vec<ConvBnBlock<T>>,
    decoder: Vec<DeconvBnBlock<T>>,
    tail: [ConvBnBlock<T>; 2],
    tail_out: ConvParams<T>,
    pub depth: usize,
}

impl<T: Scalar> RemoverNet<T> {
    /// Channel schedule c_k = min(base*2^k, cap); the full-scale network
    /// uses depth 8, base 64, cap 512.
    pub fn new(rng: &mut Rng, depth: usize, base: usize, cap: usize) -> Self {
        assert!(depth >= 1, "remover depth must be at least 1");
        let ch = |k: usize| (base << k).min(cap);
        let mut encoder = Vec::with_capacity(depth);
        let mut in_ch = 3;
        for k in 0..depth {
            encoder.push(ConvBnBlock::new(rng, in_ch, ch(k), 3, 2, 1));
            in_ch = ch(k);
        }
        // Decoder j: deconv from the running feature to the mirror of
        // encoder block depth-2-j, concatenated with that encoder output.
        let mut decoder = Vec::with_capacity(depth);
        for j in 0..depth {
            let out_ch = if j + 1 == depth { 3 } else { ch(depth - 2 - j) };
            let in_ch = if j == 0 {
                ch(depth - 1)
            } else {
                2 * ch(depth - 1 - j)
            };
            decoder.push(DeconvBnBlock::new(rng, in_ch, out_ch));
        }
        let tail = [
            ConvBnBlock::new(rng, 3, 3, 3, 1, 1),
            ConvBnBlock::new(rng, 3, 3, 3, 1, 1),
        ];
        let tail_out = crate::nn::conv_params(rng, 3, 3, 3, 1, 1);
        RemoverNet {
            encoder,
            decoder,
            tail,
            tail_out,
            depth,
        }
    }

    /// Removal pass: (O, residual) with O = clamp(O_prev + residual, 0, 1)
    /// and residual = sigmoid_tail(unet(O_prev)) * A >= 0, so O >= O_prev.
    pub fn forward(
        &self,
        o_prev: &Tensor<T>,
        attention: &Tensor<T>,
    ) -> Result<(Tensor<T>, Tensor<T>)> {
        if o_prev.ndim() != 4 || o_prev.shape()[1] != 3 {
            return Err(ArganError::Shape(format!(
                "remover expects a Bx3xHxW image, got {:?}",
                o_prev.shape()
            )));
        }
        let (h, w) = (o_prev.shape()[2], o_prev.shape()[3]);
        let divisor = 1usize << self.depth;
        if h % divisor != 0 || w % divisor != 0 {
            return Err(ArganError::Shape(format!(
                "remover input {h}x{w} must be divisible by {divisor} (depth {})",
                self.depth
            )));
        }
        // Encoder, keeping every output for the skip connections.
        let mut enc_outs: Vec<Tensor<T>> = Vec::with_capacity(self.depth);
        let mut x = o_prev.clone();
        for block in &self.encoder {
            x = block.forward(&x)?;
            enc_outs.push(x.clone());
        }
        // Decoder with mirror skips; the last block upsamples to full
        // resolution without a skip (the mirror would be the input itself).
        let mut y = enc_outs[self.depth - 1].clone();
        for (j, block) in self.decoder.iter().enumerate() {
            y = block.forward(&y)?;
            if j + 1 < self.depth {
                let skip = &enc_outs[self.depth - 2 - j];
                y = concat(&[y, skip.clone()], 1)?;
            }
        }
        for block in &self.tail {
            y = block.forward(&y)?;
        }
        let s = conv2d(&y, &self.tail_out)?.sigmoid();
        let residual = s.mul(attention)?;
        let out = o_prev.add(&residual)?.clamp(T::ZERO, T::ONE);
        Ok((out, residual))
    }

    pub fn set_mode(&self, mode: Mode) {
        for b in &self.encoder {
            set_block_mode(b, mode);
        }
        for b in &self.decoder {
            b.bn.set_mode(mode);
        }
        for b in &self.tail {
            set_block_mode(b, mode);
        }
    }

    pub fn state_entries(&self, prefix: &str, out: &mut Vec<StateEntry<T>>) {
        for (i, b) in self.encoder.iter().enumerate() {
            block_entries(&format!("{prefix}.enc{i:02}"), b, out);
        }
        for (i, b) in self.decoder.iter().enumerate() {
            let p = format!("{prefix}.dec{i:02}");
            out.push(StateEntry::param(format!("{p}.weight"), &b.deconv.weight));
            out.push(StateEntry::param(format!("{p}.bias"), &b.deconv.bias));
            out.push(StateEntry::param(format!("{p}.gamma"), &b.bn.gamma));
            out.push(StateEntry::param(format!("{p}.beta"), &b.bn.beta));
            out.push(StateEntry::buffer(
                format!("{p}.running_mean"),
                &b.bn.running_mean,
            ));
            out.push(StateEntry::buffer(
                format!("{p}.running_var"),
                &b.bn.running_var,
            ));
        }
        for (i, b) in self.tail.iter().enumerate() {
            block_entries(&format!("{prefix}.tail{i}"), b, out);
        }
        conv_entries(&format!("{prefix}.tail_out"), &self.tail_out, out);
    }
}
