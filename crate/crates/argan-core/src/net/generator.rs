//! The N-step recurrent generator: each progressive step detects shadow
//! attention from the previous output and prior attention, then removes
//! shadow through the gated residual. Weights are shared across steps by
//! default; per-step independent weights sit behind a flag.

use super::{DetectorNet, RemoverNet, StateEntry};
use crate::error::{ArganError, Result};
use crate::nn::{ConvLstmState, Mode};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug)]
pub struct GeneratorArch {
    pub n_steps: usize,
    pub share_weights: bool,
    pub detector_width: usize,
    pub depth: usize,
    pub base_channels: usize,
    pub channel_cap: usize,
}

impl Default for GeneratorArch {
    fn default() -> Self {
        GeneratorArch {
            n_steps: 3,
            share_weights: true,
            detector_width: 64,
            depth: 5,
            base_channels: 64,
            channel_cap: 512,
        }
    }
}

/// Everything one progressive step produced.
#[derive(Debug)]
pub struct GeneratorState<T: Scalar = f32> {
    pub step: usize,
    pub attention: Tensor<T>,
    pub output: Tensor<T>,
    pub lstm_state: ConvLstmState<T>,
}

pub struct Generator<T: Scalar = f32> {
    pub detectors: Vec<DetectorNet<T>>,
    pub removers: Vec<RemoverNet<T>>,
    pub arch: GeneratorArch,
}

impl<T: Scalar> Generator<T> {
    pub fn new(rng: &mut Rng, arch: GeneratorArch) -> Self {
        assert!(arch.n_steps >= 1, "generator needs at least one step");
        let copies = if arch.share_weights { 1 } else { arch.n_steps };
        let mut detectors = Vec::with_capacity(copies);
        let mut removers = Vec::with_capacity(copies);
        for _ in 0..copies {
            detectors.push(DetectorNet::new(rng, arch.detector_width));
            removers.push(RemoverNet::new(
                rng,
                arch.depth,
                arch.base_channels,
                arch.channel_cap,
            ));
        }
        Generator {
            detectors,
            removers,
            arch,
        }
    }

    /// Run the configured number of steps.
    pub fn forward(&self, img: &Tensor<T>) -> Result<Vec<GeneratorState<T>>> {
        self.forward_steps(img, self.arch.n_steps)
    }

    /// Run `n` steps (every per-step state is returned: the losses need all
    /// A_i and O_i). With shared weights the step count is free; otherwise
    /// it is capped by the number of per-step copies.
    pub fn forward_steps(&self, img: &Tensor<T>, n: usize) -> Result<Vec<GeneratorState<T>>> {
        if n == 0 {
            return Err(ArganError::Config("generator step count must be >= 1".into()));
        }
        if !self.arch.share_weights && n > self.detectors.len() {
            return Err(ArganError::Config(format!(
                "generator holds {} per-step weight copies but {n} steps were requested",
                self.detectors.len()
            )));
        }
        if img.ndim() != 4 || img.shape()[1] != 3 {
            return Err(ArganError::Shape(format!(
                "generator expects a Bx3xHxW image, got {:?}",
                img.shape()
            )));
        }
        let (b, h, w) = (img.shape()[0], img.shape()[2], img.shape()[3]);
        let mut states = Vec::with_capacity(n);
        let mut output = img.clone();
        let mut attention = Tensor::zeros(&[b, 1, h, w]);
        let mut lstm = self.detectors[0].zero_state(b, h, w);
        for step in 1..=n {
            let idx = if self.arch.share_weights { 0 } else { step - 1 };
            let (a, next_lstm) = self.detectors[idx].forward(&output, &attention, &lstm)?;
            let (o, _residual) = self.removers[idx].forward(&output, &a)?;
            states.push(GeneratorState {
                step,
                attention: a.clone(),
                output: o.clone(),
                lstm_state: next_lstm.clone(),
            });
            attention = a;
            output = o;
            lstm = next_lstm;
        }
        Ok(states)
    }

    pub fn set_mode(&self, mode: Mode) {
        for d in &self.detectors {
            d.set_mode(mode);
        }
        for r in &self.removers {
            r.set_mode(mode);
        }
    }

    pub fn state_entries(&self, prefix: &str, out: &mut Vec<StateEntry<T>>) {
        for (i, d) in self.detectors.iter().enumerate() {
            d.state_entries(&format!("{prefix}.det{i}"), out);
        }
        for (i, r) in self.removers.iter().enumerate() {
            r.state_entries(&format!("{prefix}.rem{i}"), out);
        }
    }
}
