//! Weight initialization: fan-in-scaled Gaussians for conv / deconv /
//! linear weights (std = sqrt(2 / fan_in)), zero biases, and a forget-gate
//! bias of 1 for the ConvLSTM.

use super::conv::ConvParams;
use super::lstm::ConvLstmParams;
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

pub fn gaussian_tensor<T: Scalar>(rng: &mut Rng, shape: &[usize], std: f64) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let data: Vec<T> = (0..n).map(|_| T::from_f64(rng.normal() * std)).collect();
    Tensor::param(data, shape).unwrap()
}

/// Convolution weights [out_ch, in_ch, k, k]; fan_in = in_ch * k^2.
pub fn conv_params<T: Scalar>(
    rng: &mut Rng,
    out_ch: usize,
    in_ch: usize,
    k: usize,
    stride: usize,
    padding: usize,
) -> ConvParams<T> {
    let std = (2.0 / (in_ch * k * k) as f64).sqrt();
    ConvParams {
        weight: gaussian_tensor(rng, &[out_ch, in_ch, k, k], std),
        bias: Tensor::param(vec![T::ZERO; out_ch], &[out_ch]).unwrap(),
        stride,
        padding,
    }
}

/// Transposed-convolution weights [in_ch, out_ch, k, k]; fan_in = in_ch * k^2.
pub fn deconv_params<T: Scalar>(
    rng: &mut Rng,
    in_ch: usize,
    out_ch: usize,
    k: usize,
    stride: usize,
    padding: usize,
) -> ConvParams<T> {
    let std = (2.0 / (in_ch * k * k) as f64).sqrt();
    ConvParams {
        weight: gaussian_tensor(rng, &[in_ch, out_ch, k, k], std),
        bias: Tensor::param(vec![T::ZERO; out_ch], &[out_ch]).unwrap(),
        stride,
        padding,
    }
}

/// Fully connected weights [out_features, in_features] plus zero bias.
pub fn linear_params<T: Scalar>(
    rng: &mut Rng,
    out_features: usize,
    in_features: usize,
) -> (Tensor<T>, Tensor<T>) {
    let std = (2.0 / in_features as f64).sqrt();
    (
        gaussian_tensor(rng, &[out_features, in_features], std),
        Tensor::param(vec![T::ZERO; out_features], &[out_features]).unwrap(),
    )
}

/// ConvLSTM gate convolutions over [x; h], kernel 3x3 stride 1 pad 1.
/// The forget gate's bias starts at 1 so early steps retain their memory.
pub fn lstm_params<T: Scalar>(rng: &mut Rng, in_ch: usize, hidden_ch: usize) -> ConvLstmParams<T> {
    let gate = |rng: &mut Rng| conv_params::<T>(rng, hidden_ch, in_ch + hidden_ch, 3, 1, 1);
    let w_input = gate(rng);
    let mut w_forget = gate(rng);
    w_forget.bias = Tensor::param(vec![T::ONE; hidden_ch], &[hidden_ch]).unwrap();
    let w_output = gate(rng);
    let w_cell = gate(rng);
    ConvLstmParams {
        w_input,
        w_forget,
        w_output,
        w_cell,
        hidden_ch,
    }
}
