//! Convolutional LSTM cell carrying spatial memory across progressive steps.
//!
//! All four gates are 3x3 stride-1 convolutions over the channel
//! concatenation [x; h]; no peephole connections. The step is composed from
//! differentiable primitives, so its backward pass needs no bespoke rule.

use super::conv::{conv2d, ConvParams};
use crate::error::{ArganError, Result};
use crate::tensor::{concat, narrow, Scalar, Tensor};

pub struct ConvLstmParams<T: Scalar = f32> {
    pub w_input: ConvParams<T>,
    pub w_forget: ConvParams<T>,
    pub w_output: ConvParams<T>,
    pub w_cell: ConvParams<T>,
    pub hidden_ch: usize,
}

#[derive(Clone, Debug)]
pub struct ConvLstmState<T: Scalar = f32> {
    pub h: Tensor<T>,
    pub c: Tensor<T>,
}

impl<T: Scalar> ConvLstmState<T> {
    /// All-zero state used at progressive step 1.
    pub fn zeros(batch: usize, hidden_ch: usize, h: usize, w: usize) -> Self {
        ConvLstmState {
            h: Tensor::zeros(&[batch, hidden_ch, h, w]),
            c: Tensor::zeros(&[batch, hidden_ch, h, w]),
        }
    }
}

/// One recurrence step: gates i,f,o = sigmoid(conv([x;h])), g = tanh(conv([x;h])),
/// c' = f*c + i*g, h' = o*tanh(c'). Returns (h', new state).
pub fn conv_lstm_step<T: Scalar>(
    x: &Tensor<T>,
    state: &ConvLstmState<T>,
    params: &ConvLstmParams<T>,
) -> Result<(Tensor<T>, ConvLstmState<T>)> {
    if x.ndim() != 4 || x.shape()[2..] != state.h.shape()[2..] || x.shape()[0] != state.h.shape()[0]
    {
        return Err(ArganError::Shape(format!(
            "conv_lstm_step: input {:?} does not align with state {:?}",
            x.shape(),
            state.h.shape()
        )));
    }
    let hd = params.hidden_ch;
    let xh = concat(&[x.clone(), state.h.clone()], 1)?;
    // One fused convolution over the stacked gate weights; each gate still
    // owns its separate parameters.
    let w_cat = concat(
        &[
            params.w_input.weight.clone(),
            params.w_forget.weight.clone(),
            params.w_output.weight.clone(),
            params.w_cell.weight.clone(),
        ],
        0,
    )?;
    let b_cat = concat(
        &[
            params.w_input.bias.clone(),
            params.w_forget.bias.clone(),
            params.w_output.bias.clone(),
            params.w_cell.bias.clone(),
        ],
        0,
    )?;
    let fused = ConvParams {
        weight: w_cat,
        bias: b_cat,
        stride: 1,
        padding: (params.w_input.kernel() - 1) / 2,
    };
    let gates = conv2d(&xh, &fused)?;
    let gate_i = narrow(&gates, 1, 0, hd)?.sigmoid();
    let gate_f = narrow(&gates, 1, hd, hd)?.sigmoid();
    let gate_o = narrow(&gates, 1, 2 * hd, hd)?.sigmoid();
    let gate_g = narrow(&gates, 1, 3 * hd, hd)?.tanh();

    let c_next = gate_f.mul(&state.c)?.add(&gate_i.mul(&gate_g)?)?;
    let h_next = gate_o.mul(&c_next.tanh())?;
    Ok((
        h_next.clone(),
        ConvLstmState {
            h: h_next,
            c: c_next,
        },
    ))
}
