//! The alternating adversarial training loop, checkpoint-backed sessions,
//! and single-image inference.
//!
//! Per iteration: draw a labeled batch (plus an unlabeled one in
//! semi-supervised mode), update the discriminator by Adam on detached
//! generator outputs, then recompute the generator forward and update it by
//! momentum on the full objective. One CSV row is logged per iteration.

use crate::checkpoint::{load_checkpoint, save_checkpoint, NamedTensor};
use crate::config::ArganConfig;
use crate::data::{images_to_tensor, tensor_to_images, Image, SampleTriplet};
use crate::error::{ArganError, Result};
use crate::loss::{loss_adv, loss_adv_g, loss_det, loss_rem, loss_total, FeatureExtractor, LossBreakdown};
use crate::net::{trainable_params, DiscriminatorNet, Generator, GeneratorArch, StateEntry};
use crate::nn::Mode;
use crate::optim::{AdamOpt, MomentumOpt};
use crate::rng::Rng;
use crate::tensor::{backward, no_grad, zero_grads, Tensor};
use std::path::Path;

const SALT_LABELED: u64 = 0x1abe1;
const SALT_UNLABELED: u64 = 0x0171ab;

/// One logged training iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub iter: usize,
    pub l_det: f64,
    pub l_rem_mse: f64,
    pub l_rem_per: f64,
    pub l_adv_g: f64,
    pub l_adv_d: f64,
    pub d_real: f64,
    pub d_fake: f64,
}

pub const LOG_HEADER: &str = "iter,l_det,l_rem_mse,l_rem_per,l_adv_g,l_adv_d,d_real,d_fake";

pub fn format_log(rows: &[LogRow]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.iter, r.l_det, r.l_rem_mse, r.l_rem_per, r.l_adv_g, r.l_adv_d, r.d_real, r.d_fake
        ));
    }
    out
}

/// Model plus optimizer state; everything a checkpoint persists.
pub struct TrainSession {
    pub cfg: ArganConfig,
    pub generator: Generator<f32>,
    pub discriminator: DiscriminatorNet<f32>,
    pub fx: FeatureExtractor<f32>,
    pub g_opt: MomentumOpt,
    pub d_opt: AdamOpt,
}

impl std::fmt::Debug for TrainSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TrainSession(n={}, size={})", self.cfg.n, self.cfg.image_size)
    }
}

impl TrainSession {
    pub fn new(cfg: ArganConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = Rng::new(cfg.seed);
        let generator = Generator::new(
            &mut rng,
            GeneratorArch {
                n_steps: cfg.n,
                share_weights: cfg.share_weights,
                detector_width: 64,
                depth: cfg.depth,
                base_channels: cfg.base_channels,
                channel_cap: cfg.channel_cap,
            },
        );
        let discriminator = DiscriminatorNet::new(&mut rng, cfg.image_size)?;
        let fx = FeatureExtractor::from_seed(cfg.seed);
        let mut g_entries = Vec::new();
        generator.state_entries("g", &mut g_entries);
        let mut d_entries = Vec::new();
        discriminator.state_entries("d", &mut d_entries);
        let g_opt = MomentumOpt::new(
            trainable_params(&g_entries),
            cfg.lr as f32,
            cfg.momentum_mu as f32,
        );
        let d_opt = AdamOpt::new(
            trainable_params(&d_entries),
            cfg.lr as f32,
            cfg.adam_beta1 as f32,
            cfg.adam_beta2 as f32,
            cfg.adam_eps as f32,
        );
        Ok(TrainSession {
            cfg,
            generator,
            discriminator,
            fx,
            g_opt,
            d_opt,
        })
    }

    /// Model state entries in their canonical order.
    pub fn state_entries(&self) -> Vec<StateEntry<f32>> {
        let mut entries = Vec::new();
        self.generator.state_entries("g", &mut entries);
        self.discriminator.state_entries("d", &mut entries);
        self.fx.state_entries("fx", &mut entries);
        entries
    }

    fn named_tensors(&self) -> Vec<NamedTensor> {
        let mut out: Vec<NamedTensor> = self
            .state_entries()
            .iter()
            .map(|e| (e.name.clone(), e.shape.clone(), e.read()))
            .collect();
        for (i, v) in self.g_opt.velocities.iter().enumerate() {
            out.push((format!("optim.g.vel.{i:04}"), vec![v.len()], v.clone()));
        }
        for (i, m) in self.d_opt.m.iter().enumerate() {
            out.push((format!("optim.d.m.{i:04}"), vec![m.len()], m.clone()));
        }
        for (i, v) in self.d_opt.v.iter().enumerate() {
            out.push((format!("optim.d.v.{i:04}"), vec![v.len()], v.clone()));
        }
        out.push((
            "optim.d.t".to_string(),
            vec![1],
            vec![self.d_opt.t as f32],
        ));
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_checkpoint(path, &self.cfg, &self.named_tensors())
    }

    /// Rebuild a session from a checkpoint: nets are constructed from the
    /// stored config, then every tensor (parameters, BN statistics,
    /// spectral u vectors, optimizer state) is restored by name.
    pub fn load(path: &Path) -> Result<TrainSession> {
        let (cfg, tensors) = load_checkpoint(path)?;
        let mut session = TrainSession::new(cfg)?;
        let entries = session.state_entries();
        let mut by_name: std::collections::HashMap<&str, &StateEntry<f32>> =
            entries.iter().map(|e| (e.name.as_str(), e)).collect();
        for (name, shape, data) in &tensors {
            if let Some(entry) = by_name.remove(name.as_str()) {
                if entry.shape != *shape {
                    return Err(ArganError::Checkpoint(format!(
                        "tensor {name} has shape {shape:?} but the model expects {:?}",
                        entry.shape
                    )));
                }
                entry.write(data);
            } else if let Some(rest) = name.strip_prefix("optim.") {
                restore_optimizer(&mut session, rest, name, data)?;
            } else {
                return Err(ArganError::Checkpoint(format!(
                    "checkpoint contains unknown tensor {name}"
                )));
            }
        }
        if !by_name.is_empty() {
            let mut missing: Vec<&str> = by_name.keys().copied().collect();
            missing.sort();
            return Err(ArganError::Checkpoint(format!(
                "checkpoint is missing tensors: {}",
                missing.join(", ")
            )));
        }
        Ok(session)
    }

    pub fn set_mode(&self, mode: Mode) {
        self.generator.set_mode(mode);
        self.discriminator.set_mode(mode);
    }
}

fn restore_optimizer(
    session: &mut TrainSession,
    rest: &str,
    full_name: &str,
    data: &[f32],
) -> Result<()> {
    let bad_index = || ArganError::Checkpoint(format!("optimizer tensor {full_name} out of range"));
    let parse_idx = |s: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| ArganError::Checkpoint(format!("bad optimizer tensor name {full_name}")))
    };
    if let Some(idx) = rest.strip_prefix("g.vel.") {
        let i = parse_idx(idx)?;
        let slot = session.g_opt.velocities.get_mut(i).ok_or_else(bad_index)?;
        if slot.len() != data.len() {
            return Err(ArganError::Checkpoint(format!(
                "optimizer tensor {full_name} has {} values, expected {}",
                data.len(),
                slot.len()
            )));
        }
        slot.copy_from_slice(data);
    } else if let Some(idx) = rest.strip_prefix("d.m.") {
        let i = parse_idx(idx)?;
        let slot = session.d_opt.m.get_mut(i).ok_or_else(bad_index)?;
        if slot.len() != data.len() {
            return Err(ArganError::Checkpoint(format!(
                "optimizer tensor {full_name} has {} values, expected {}",
                data.len(),
                slot.len()
            )));
        }
        slot.copy_from_slice(data);
    } else if let Some(idx) = rest.strip_prefix("d.v.") {
        let i = parse_idx(idx)?;
        let slot = session.d_opt.v.get_mut(i).ok_or_else(bad_index)?;
        if slot.len() != data.len() {
            return Err(ArganError::Checkpoint(format!(
                "optimizer tensor {full_name} has {} values, expected {}",
                data.len(),
                slot.len()
            )));
        }
        slot.copy_from_slice(data);
    } else if rest == "d.t" {
        session.d_opt.t = data.first().copied().unwrap_or(0.0) as u64;
    } else {
        return Err(ArganError::Checkpoint(format!(
            "checkpoint contains unknown optimizer tensor {full_name}"
        )));
    }
    Ok(())
}

fn ensure_finite(name: &str, t: &Tensor<f32>) -> Result<()> {
    if t.has_nan() {
        return Err(ArganError::Numeric(format!(
            "NaN detected in {name}; aborting training"
        )));
    }
    Ok(())
}

fn batch_tensors(
    samples: &[SampleTriplet],
    indices: &[usize],
) -> Result<(Tensor<f32>, Tensor<f32>, Tensor<f32>)> {
    let shadows: Vec<&Image> = indices.iter().map(|&i| &samples[i].shadow).collect();
    let mattes: Vec<&Image> = indices
        .iter()
        .map(|&i| samples[i].matte.as_ref().expect("labeled sample"))
        .collect();
    let frees: Vec<&Image> = indices
        .iter()
        .map(|&i| samples[i].free.as_ref().expect("labeled sample"))
        .collect();
    Ok((
        images_to_tensor(&shadows)?,
        images_to_tensor(&mattes)?,
        images_to_tensor(&frees)?,
    ))
}

/// Run the configured number of alternating iterations. Checkpoints are
/// written to `ckpt_path` every `checkpoint_every` iterations and at the
/// end (a zero-iteration run checkpoints the initialization).
pub fn train(
    session: &mut TrainSession,
    labeled: &[SampleTriplet],
    unlabeled: Option<&[SampleTriplet]>,
    ckpt_path: Option<&Path>,
) -> Result<Vec<LogRow>> {
    let cfg = session.cfg.clone();
    if labeled.is_empty() {
        return Err(ArganError::Data("training needs at least one labeled sample".into()));
    }
    for (i, s) in labeled.iter().enumerate() {
        if !s.is_labeled() {
            return Err(ArganError::Data(format!(
                "labeled sample {i} is missing its matte or shadow-free image"
            )));
        }
        if s.shadow.width != cfg.image_size || s.shadow.height != cfg.image_size {
            return Err(ArganError::Data(format!(
                "labeled sample {i} is {}x{}, config expects {}",
                s.shadow.width, s.shadow.height, cfg.image_size
            )));
        }
    }
    let unsup_pool = match (cfg.semi_supervised, unlabeled) {
        (true, Some(u)) if !u.is_empty() => {
            for (i, s) in u.iter().enumerate() {
                if s.shadow.width != cfg.image_size || s.shadow.height != cfg.image_size {
                    return Err(ArganError::Data(format!(
                        "unlabeled sample {i} is {}x{}, config expects {}",
                        s.shadow.width, s.shadow.height, cfg.image_size
                    )));
                }
            }
            Some(u)
        }
        (true, _) => {
            return Err(ArganError::Config(
                "semi_supervised mode needs a non-empty unlabeled dataset".into(),
            ))
        }
        (false, _) => None,
    };
    // lambda == 1 makes the unsupervised term vanish; skipping it entirely
    // keeps the parameter trajectory bitwise equal to supervised mode.
    let use_unsup = unsup_pool.is_some() && cfg.lambda < 1.0;

    session.set_mode(Mode::Train);
    let mut labeled_rng = Rng::substream(cfg.seed, SALT_LABELED);
    let mut unlabeled_rng = Rng::substream(cfg.seed, SALT_UNLABELED);
    let mut rows = Vec::with_capacity(cfg.iterations);

    let g_params = session.g_opt.params.clone();
    let d_params = session.d_opt.params.clone();

    for iter in 1..=cfg.iterations {
        let indices: Vec<usize> = (0..cfg.batch_size)
            .map(|_| labeled_rng.below(labeled.len()))
            .collect();
        let (img, matte, free) = batch_tensors(labeled, &indices)?;
        let unsup_img = match (use_unsup, unsup_pool) {
            (true, Some(pool)) => {
                let idx: Vec<usize> = (0..cfg.batch_size)
                    .map(|_| unlabeled_rng.below(pool.len()))
                    .collect();
                let shadows: Vec<&Image> = idx.iter().map(|&i| &pool[i].shadow).collect();
                Some(images_to_tensor(&shadows)?)
            }
            _ => None,
        };

        // Discriminator step on detached generator outputs.
        let (fake_detached, fake_unsup_detached) = no_grad(|| -> Result<_> {
            let states = session.generator.forward(&img)?;
            let fake = states.last().unwrap().output.clone();
            let fake_unsup = match &unsup_img {
                Some(u) => {
                    let s = session.generator.forward(u)?;
                    Some(s.last().unwrap().output.clone())
                }
                None => None,
            };
            Ok((fake, fake_unsup))
        })?;
        zero_grads(&d_params);
        let d_real = session.discriminator.forward(&free)?;
        let d_fake = session.discriminator.forward(&fake_detached)?;
        let d_unsup = match &fake_unsup_detached {
            Some(f) => Some(session.discriminator.forward(f)?),
            None => None,
        };
        let (l_adv_d, _) = loss_adv(&d_real, &d_fake, d_unsup.as_ref(), cfg.lambda)?;
        ensure_finite("l_adv_d", &l_adv_d)?;
        backward(&l_adv_d)?;
        session.d_opt.step()?;
        let d_real_mean =
            d_real.data().iter().map(|&v| v as f64).sum::<f64>() / d_real.numel() as f64;
        let d_fake_mean =
            d_fake.data().iter().map(|&v| v as f64).sum::<f64>() / d_fake.numel() as f64;

        // Generator step: recompute the forward pass with the graph.
        zero_grads(&g_params);
        let states = session.generator.forward(&img)?;
        let attentions: Vec<Tensor<f32>> = states.iter().map(|s| s.attention.clone()).collect();
        let outputs: Vec<Tensor<f32>> = states.iter().map(|s| s.output.clone()).collect();
        let l_det = loss_det(&attentions, &matte)?;
        let (l_rem_mse, l_rem_per) = loss_rem(&outputs, &free, &session.fx)?;
        let d_fake_g = session.discriminator.forward(outputs.last().unwrap())?;
        let d_unsup_g = match &unsup_img {
            Some(u) => {
                let s = session.generator.forward(u)?;
                Some(session.discriminator.forward(&s.last().unwrap().output)?)
            }
            None => None,
        };
        let l_adv_g = loss_adv_g(&d_fake_g, d_unsup_g.as_ref(), cfg.lambda)?;
        let parts = LossBreakdown {
            l_det,
            l_rem_mse,
            l_rem_per,
            l_adv_g,
            l_adv_d,
        };
        for (name, t) in [
            ("l_det", &parts.l_det),
            ("l_rem_mse", &parts.l_rem_mse),
            ("l_rem_per", &parts.l_rem_per),
            ("l_adv_g", &parts.l_adv_g),
        ] {
            ensure_finite(name, t)?;
        }
        let total = loss_total(&parts)?;
        backward(&total)?;
        session.g_opt.step()?;

        rows.push(LogRow {
            iter,
            l_det: parts.l_det.item() as f64,
            l_rem_mse: parts.l_rem_mse.item() as f64,
            l_rem_per: parts.l_rem_per.item() as f64,
            l_adv_g: parts.l_adv_g.item() as f64,
            l_adv_d: parts.l_adv_d.item() as f64,
            d_real: d_real_mean,
            d_fake: d_fake_mean,
        });

        if let Some(path) = ckpt_path {
            if cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0 {
                session.save(path)?;
            }
        }
    }

    if let Some(path) = ckpt_path {
        session.save(path)?;
    }
    Ok(rows)
}

/// Per-step inference on one image in eval mode: returns the attention
/// maps A_1..A_N and outputs O_1..O_N.
pub fn infer_image(session: &TrainSession, img: &Image) -> Result<(Vec<Image>, Vec<Image>)> {
    let divisor = 1usize << session.cfg.depth;
    if img.width % divisor != 0 || img.height % divisor != 0 {
        return Err(ArganError::Data(format!(
            "input image {}x{} must have sides divisible by {divisor}",
            img.width, img.height
        )));
    }
    session.set_mode(Mode::Eval);
    let out = no_grad(|| -> Result<_> {
        let input = images_to_tensor(&[img])?;
        let states = session.generator.forward(&input)?;
        let mut attentions = Vec::with_capacity(states.len());
        let mut outputs = Vec::with_capacity(states.len());
        for st in &states {
            attentions.push(tensor_to_images(&st.attention)?.remove(0));
            outputs.push(tensor_to_images(&st.output)?.remove(0));
        }
        Ok((attentions, outputs))
    });
    session.set_mode(Mode::Train);
    out
}

#[cfg(test)]
mod tests;
