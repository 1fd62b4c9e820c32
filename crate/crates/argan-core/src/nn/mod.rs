//! Parameterized neural layers: strided and transposed convolution, batch
//! normalization, a convolutional LSTM cell, spectral normalization, and a
//! fully connected layer.

mod batchnorm;
mod conv;
mod init;
mod linear;
mod lstm;
mod spectral;

pub use batchnorm::{batchnorm2d, BatchNormState, Mode};
pub use conv::{conv2d, deconv2d, ConvParams};
pub use init::{conv_params, deconv_params, gaussian_tensor, linear_params, lstm_params};
pub use linear::linear;
pub use lstm::{conv_lstm_step, ConvLstmParams, ConvLstmState};
pub use spectral::{spectral_normalize, SpectralState};
