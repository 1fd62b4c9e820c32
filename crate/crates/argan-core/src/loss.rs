//! Training objectives: beta-weighted detection MSE over all progressive
//! steps, removal accuracy + perceptual losses, and the supervised /
//! semi-supervised adversarial pair.

use crate::error::{ArganError, Result};
use crate::nn::{conv2d, ConvParams};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

/// Probabilities are clamped to [EPS, 1-EPS] before every log.
const LOG_CLAMP: f64 = 1e-7;

/// Step weight 0.7^(N-i+1): later steps weigh more, the last gets 0.7.
pub fn beta_weight(i: usize, n: usize) -> Result<f64> {
    if i < 1 || i > n {
        return Err(ArganError::Config(format!(
            "beta_weight: step {i} outside 1..={n}"
        )));
    }
    let mut w = 1.0f64;
    for _ in 0..(n - i + 1) {
        w *= 0.7;
    }
    Ok(w)
}

/// Detection loss: sum_i beta_i * MSE(A_i, M).
pub fn loss_det<T: Scalar>(attentions: &[Tensor<T>], matte: &Tensor<T>) -> Result<Tensor<T>> {
    if attentions.is_empty() {
        return Err(ArganError::Config("loss_det needs at least one step".into()));
    }
    let n = attentions.len();
    let mut acc: Option<Tensor<T>> = None;
    for (idx, a) in attentions.iter().enumerate() {
        if a.shape() != matte.shape() {
            return Err(ArganError::Shape(format!(
                "loss_det: attention {:?} vs matte {:?}",
                a.shape(),
                matte.shape()
            )));
        }
        let beta = T::from_f64(beta_weight(idx + 1, n)?);
        let term = a.mse(matte)?.scale(beta);
        acc = Some(match acc {
            None => term,
            Some(prev) => prev.add(&term)?,
        });
    }
    Ok(acc.unwrap())
}

/// Frozen random convolutional feature stack standing in for a pretrained
/// perceptual network: three stride-2 conv+LeakyReLU blocks with channels
/// 16/32/64. Weights are drawn once from a seeded stream and never receive
/// gradients, though gradients flow through to the input.
pub struct FeatureExtractor<T: Scalar = f32> {
    convs: Vec<ConvParams<T>>,
}

const FX_CHANNELS: [usize; 3] = [16, 32, 64];
const FX_SALT: u64 = 0xfea7;

impl<T: Scalar> FeatureExtractor<T> {
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = Rng::substream(seed, FX_SALT);
        let mut convs = Vec::with_capacity(3);
        let mut in_ch = 3;
        for &out_ch in &FX_CHANNELS {
            let std = (2.0 / (in_ch * 9) as f64).sqrt();
            let n = out_ch * in_ch * 9;
            let weight: Vec<T> = (0..n).map(|_| T::from_f64(rng.normal() * std)).collect();
            convs.push(ConvParams {
                weight: Tensor::from_vec(weight, &[out_ch, in_ch, 3, 3]).unwrap(),
                bias: Tensor::from_vec(vec![T::ZERO; out_ch], &[out_ch]).unwrap(),
                stride: 2,
                padding: 1,
            });
            in_ch = out_ch;
        }
        FeatureExtractor { convs }
    }

    /// Plug in external feature weights: three [out,in,3,3] tensors with
    /// matching biases, same stride-2 geometry.
    pub fn from_weights(weights: Vec<(Tensor<T>, Tensor<T>)>) -> Result<Self> {
        if weights.len() != 3 {
            return Err(ArganError::Config(format!(
                "feature extractor expects 3 conv layers, got {}",
                weights.len()
            )));
        }
        let mut convs = Vec::with_capacity(3);
        let mut in_ch = 3;
        for (i, (weight, bias)) in weights.into_iter().enumerate() {
            let out_ch = FX_CHANNELS[i];
            if weight.shape() != [out_ch, in_ch, 3, 3] {
                return Err(ArganError::Shape(format!(
                    "feature layer {i}: weight must be {:?}, got {:?}",
                    [out_ch, in_ch, 3, 3],
                    weight.shape()
                )));
            }
            if bias.shape() != [out_ch] {
                return Err(ArganError::Shape(format!(
                    "feature layer {i}: bias must be [{out_ch}], got {:?}",
                    bias.shape()
                )));
            }
            convs.push(ConvParams {
                weight: weight.detach(),
                bias: bias.detach(),
                stride: 2,
                padding: 1,
            });
            in_ch = out_ch;
        }
        Ok(FeatureExtractor { convs })
    }

    pub fn features(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut y = x.clone();
        for conv in &self.convs {
            y = conv2d(&y, conv)?.leaky_relu(0.2);
        }
        Ok(y)
    }

    pub fn state_entries(&self, prefix: &str, out: &mut Vec<crate::net::StateEntry<T>>) {
        for (i, c) in self.convs.iter().enumerate() {
            out.push(crate::net::StateEntry::param(
                format!("{prefix}.conv{i}.weight"),
                &c.weight,
            ));
            out.push(crate::net::StateEntry::param(
                format!("{prefix}.conv{i}.bias"),
                &c.bias,
            ));
        }
    }
}

/// Removal loss pair: (sum_i beta_i*MSE(O_i, F), sum_i MSE(fx(O_i), fx(F))).
/// The accuracy term carries the step weights; the perceptual one does not.
pub fn loss_rem<T: Scalar>(
    outputs: &[Tensor<T>],
    free: &Tensor<T>,
    fx: &FeatureExtractor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    if outputs.is_empty() {
        return Err(ArganError::Config("loss_rem needs at least one step".into()));
    }
    let n = outputs.len();
    let free_features = fx.features(free)?;
    let mut mse_acc: Option<Tensor<T>> = None;
    let mut per_acc: Option<Tensor<T>> = None;
    for (idx, o) in outputs.iter().enumerate() {
        if o.shape() != free.shape() {
            return Err(ArganError::Shape(format!(
                "loss_rem: output {:?} vs target {:?}",
                o.shape(),
                free.shape()
            )));
        }
        let beta = T::from_f64(beta_weight(idx + 1, n)?);
        let mse_term = o.mse(free)?.scale(beta);
        mse_acc = Some(match mse_acc {
            None => mse_term,
            Some(prev) => prev.add(&mse_term)?,
        });
        let per_term = fx.features(o)?.mse(&free_features)?;
        per_acc = Some(match per_acc {
            None => per_term,
            Some(prev) => prev.add(&per_term)?,
        });
    }
    Ok((mse_acc.unwrap(), per_acc.unwrap()))
}

fn mean_log<T: Scalar>(p: &Tensor<T>) -> Tensor<T> {
    p.clamp(T::from_f64(LOG_CLAMP), T::from_f64(1.0 - LOG_CLAMP))
        .ln()
        .mean()
}

fn mean_log_one_minus<T: Scalar>(p: &Tensor<T>) -> Tensor<T> {
    mean_log(&p.affine(-T::ONE, T::ONE))
}

/// Generator-side adversarial objective (non-saturating form):
/// -[lambda*mean(log D(fake)) + (1-lambda)*mean(log D(fake_unsup))].
/// At lambda == 1 the unsupervised term is skipped entirely, so the
/// semi-supervised loss reduces bitwise to the supervised one.
pub fn loss_adv_g<T: Scalar>(
    d_fake_sup: &Tensor<T>,
    d_fake_unsup: Option<&Tensor<T>>,
    lambda: f64,
) -> Result<Tensor<T>> {
    check_lambda(lambda)?;
    let sup = mean_log(d_fake_sup);
    match effective_unsup(d_fake_unsup, lambda) {
        Some(unsup_p) => {
            let unsup = mean_log(unsup_p);
            Ok(sup
                .scale(T::from_f64(lambda))
                .add(&unsup.scale(T::from_f64(1.0 - lambda)))?
                .scale(-T::ONE))
        }
        None => Ok(sup.scale(-T::ONE)),
    }
}

/// Both adversarial losses. The discriminator maximizes
/// lambda*E[log D(real) + log(1-D(fake))] + (1-lambda)*E[log(1-D(fake_unsup))],
/// so d_loss is its negation; g_loss is the non-saturating generator form.
pub fn loss_adv<T: Scalar>(
    d_real: &Tensor<T>,
    d_fake_sup: &Tensor<T>,
    d_fake_unsup: Option<&Tensor<T>>,
    lambda: f64,
) -> Result<(Tensor<T>, Tensor<T>)> {
    check_lambda(lambda)?;
    if d_real.shape() != d_fake_sup.shape() {
        return Err(ArganError::Shape(format!(
            "loss_adv: d_real {:?} vs d_fake {:?}",
            d_real.shape(),
            d_fake_sup.shape()
        )));
    }
    let sup = mean_log(d_real).add(&mean_log_one_minus(d_fake_sup))?;
    let d_loss = match effective_unsup(d_fake_unsup, lambda) {
        Some(unsup_p) => {
            let unsup = mean_log_one_minus(unsup_p);
            sup.scale(T::from_f64(lambda))
                .add(&unsup.scale(T::from_f64(1.0 - lambda)))?
                .scale(-T::ONE)
        }
        None => sup.scale(-T::ONE),
    };
    let g_loss = loss_adv_g(d_fake_sup, d_fake_unsup, lambda)?;
    Ok((d_loss, g_loss))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(ArganError::Config(format!(
            "lambda must lie in [0,1], got {lambda}"
        )));
    }
    Ok(())
}

fn effective_unsup<T: Scalar>(
    d_fake_unsup: Option<&Tensor<T>>,
    lambda: f64,
) -> Option<&Tensor<T>> {
    if lambda == 1.0 {
        None
    } else {
        d_fake_unsup
    }
}

/// Generator-side scalar losses for one iteration, kept as graph tensors so
/// the total can be backpropagated; `l_adv_d` belongs to the discriminator
/// step and stays out of the total.
pub struct LossBreakdown<T: Scalar = f32> {
    pub l_det: Tensor<T>,
    pub l_rem_mse: Tensor<T>,
    pub l_rem_per: Tensor<T>,
    pub l_adv_g: Tensor<T>,
    pub l_adv_d: Tensor<T>,
}

/// Total generator loss: detection + removal accuracy + perceptual +
/// generator-adversarial.
pub fn loss_total<T: Scalar>(parts: &LossBreakdown<T>) -> Result<Tensor<T>> {
    parts
        .l_det
        .add(&parts.l_rem_mse)?
        .add(&parts.l_rem_per)?
        .add(&parts.l_adv_g)
}
