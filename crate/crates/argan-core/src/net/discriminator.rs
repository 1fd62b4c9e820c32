//! Binary real/fake discriminator: five spectrally normalized 4x4 stride-2
//! Conv+BN+LReLU blocks (channels 64, 128, 256, 512, 1) and a fully
//! connected layer from the flattened map to one probability.

use super::{StateEntry, LRELU_SLOPE};
use crate::error::{ArganError, Result};
use crate::nn::{
    batchnorm2d, conv2d, linear, spectral_normalize, BatchNormState, ConvParams, Mode,
    SpectralState,
};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

struct SnConvBlock<T: Scalar> {
    conv: ConvParams<T>,
    sn: SpectralState<T>,
    bn: BatchNormState<T>,
}

pub struct DiscriminatorNet<T: Scalar = f32> {
    blocks: Vec<SnConvBlock<T>>,
    pub fc_weight: Tensor<T>,
    pub fc_bias: Tensor<T>,
    input_size: usize,
    flat: usize,
}

pub const DEFAULT_CHANNELS: [usize; 5] = [64, 128, 256, 512, 1];

impl<T: Scalar> DiscriminatorNet<T> {
    pub fn new(rng: &mut Rng, input_size: usize) -> Result<Self> {
        Self::with_channels(rng, &DEFAULT_CHANNELS, input_size)
    }

    /// Reduced-depth variant for small-input tests; the default channel
    /// list is the published topology.
    pub fn with_channels(rng: &mut Rng, channels: &[usize], input_size: usize) -> Result<Self> {
        let divisor = 1usize << channels.len();
        if input_size % divisor != 0 {
            return Err(ArganError::Config(format!(
                "discriminator input size {input_size} must be divisible by {divisor}"
            )));
        }
        let mut blocks = Vec::with_capacity(channels.len());
        let mut in_ch = 3;
        for &out_ch in channels {
            blocks.push(SnConvBlock {
                conv: crate::nn::conv_params(rng, out_ch, in_ch, 4, 2, 1),
                sn: SpectralState::new(out_ch, 1, rng),
                bn: BatchNormState::new(out_ch),
            });
            in_ch = out_ch;
        }
        let spatial = input_size / divisor;
        let flat = in_ch * spatial * spatial;
        let (fc_weight, fc_bias) = crate::nn::linear_params(rng, 1, flat);
        Ok(DiscriminatorNet {
            blocks,
            fc_weight,
            fc_bias,
            input_size,
            flat,
        })
    }

    /// Probability in (0,1) that each batch image is a real shadow-free
    /// image. Every conv weight is spectrally normalized before use.
    pub fn forward(&self, img: &Tensor<T>) -> Result<Tensor<T>> {
        if img.ndim() != 4 || img.shape()[1] != 3 {
            return Err(ArganError::Shape(format!(
                "discriminator expects Bx3xHxW, got {:?}",
                img.shape()
            )));
        }
        let (h, w) = (img.shape()[2], img.shape()[3]);
        if h != self.input_size || w != self.input_size {
            return Err(ArganError::Shape(format!(
                "discriminator was built for {0}x{0} inputs, got {h}x{w}",
                self.input_size
            )));
        }
        let mut x = img.clone();
        for block in &self.blocks {
            let (w_sn, _sigma) = spectral_normalize(&block.conv.weight, &block.sn)?;
            let params = ConvParams {
                weight: w_sn,
                bias: block.conv.bias.clone(),
                stride: block.conv.stride,
                padding: block.conv.padding,
            };
            x = conv2d(&x, &params)?;
            x = batchnorm2d(&x, &block.bn)?;
            x = x.leaky_relu(LRELU_SLOPE);
        }
        let b = x.shape()[0];
        let flat = x.reshape(&[b, self.flat])?;
        Ok(linear(&flat, &self.fc_weight, &self.fc_bias)?.sigmoid())
    }

    pub fn set_mode(&self, mode: Mode) {
        for b in &self.blocks {
            b.bn.set_mode(mode);
        }
    }

    pub fn state_entries(&self, prefix: &str, out: &mut Vec<StateEntry<T>>) {
        for (i, b) in self.blocks.iter().enumerate() {
            let p = format!("{prefix}.conv{i}");
            out.push(StateEntry::param(format!("{p}.weight"), &b.conv.weight));
            out.push(StateEntry::param(format!("{p}.bias"), &b.conv.bias));
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
            out.push(StateEntry::buffer(format!("{p}.spectral_u"), &b.sn.u));
        }
        out.push(StateEntry::param(format!("{prefix}.fc.weight"), &self.fc_weight));
        out.push(StateEntry::param(format!("{prefix}.fc.bias"), &self.fc_bias));
    }
}
