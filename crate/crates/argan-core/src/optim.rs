//! Optimizers: classical momentum for the generator, Adam for the
//! discriminator (the alternating-update pairing used in training).

use crate::error::{ArganError, Result};
use crate::tensor::{Scalar, Tensor};

/// v' = mu*v + g; theta' = theta - lr*v'.
pub fn momentum_step<T: Scalar>(
    param: &Tensor<T>,
    grad: &[T],
    velocity: &mut [T],
    lr: T,
    mu: T,
) -> Result<()> {
    if grad.len() != param.numel() || velocity.len() != param.numel() {
        return Err(ArganError::Shape(format!(
            "momentum_step: param {:?} vs grad {} / velocity {}",
            param.shape(),
            grad.len(),
            velocity.len()
        )));
    }
    let mut data = param.data_mut();
    for i in 0..data.len() {
        velocity[i] = mu * velocity[i] + grad[i];
        data[i] = data[i] - lr * velocity[i];
    }
    Ok(())
}

/// Standard Adam with bias correction; `t` is the 1-based step count.
#[allow(clippy::too_many_arguments)]
pub fn adam_step<T: Scalar>(
    param: &Tensor<T>,
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    t: u64,
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
) -> Result<()> {
    if grad.len() != param.numel() || m.len() != param.numel() || v.len() != param.numel() {
        return Err(ArganError::Shape(format!(
            "adam_step: param {:?} vs grad {} / m {} / v {}",
            param.shape(),
            grad.len(),
            m.len(),
            v.len()
        )));
    }
    assert!(t >= 1, "adam step count is 1-based");
    let mut corr1 = T::ONE;
    let mut corr2 = T::ONE;
    for _ in 0..t {
        corr1 = corr1 * beta1;
        corr2 = corr2 * beta2;
    }
    let bias1 = T::ONE - corr1;
    let bias2 = T::ONE - corr2;
    let mut data = param.data_mut();
    for i in 0..data.len() {
        m[i] = beta1 * m[i] + (T::ONE - beta1) * grad[i];
        v[i] = beta2 * v[i] + (T::ONE - beta2) * grad[i] * grad[i];
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        data[i] = data[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Momentum over a fixed parameter list; a missing gradient counts as zero
/// (the velocity still decays).
pub struct MomentumOpt {
    pub params: Vec<Tensor<f32>>,
    pub velocities: Vec<Vec<f32>>,
    pub lr: f32,
    pub mu: f32,
}

impl MomentumOpt {
    pub fn new(params: Vec<Tensor<f32>>, lr: f32, mu: f32) -> Self {
        let velocities = params.iter().map(|p| vec![0.0; p.numel()]).collect();
        MomentumOpt {
            params,
            velocities,
            lr,
            mu,
        }
    }

    pub fn step(&mut self) -> Result<()> {
        for (p, v) in self.params.iter().zip(self.velocities.iter_mut()) {
            let grad = p.grad().unwrap_or_else(|| vec![0.0; p.numel()]);
            momentum_step(p, &grad, v, self.lr, self.mu)?;
        }
        Ok(())
    }
}

/// Adam over a fixed parameter list with a shared step counter.
pub struct AdamOpt {
    pub params: Vec<Tensor<f32>>,
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
    pub t: u64,
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl AdamOpt {
    pub fn new(params: Vec<Tensor<f32>>, lr: f32, beta1: f32, beta2: f32, eps: f32) -> Self {
        let m = params.iter().map(|p| vec![0.0; p.numel()]).collect();
        let v = params.iter().map(|p| vec![0.0; p.numel()]).collect();
        AdamOpt {
            params,
            m,
            v,
            t: 0,
            lr,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn step(&mut self) -> Result<()> {
        self.t += 1;
        for ((p, m), v) in self
            .params
            .iter()
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            let grad = p.grad().unwrap_or_else(|| vec![0.0; p.numel()]);
            adam_step(
                p, &grad, m, v, self.t, self.lr, self.beta1, self.beta2, self.eps,
            )?;
        }
        Ok(())
    }
}
