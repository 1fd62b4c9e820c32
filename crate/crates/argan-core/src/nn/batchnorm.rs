//! Per-channel batch normalization over NCHW tensors.

use crate::error::{ArganError, Result};
use crate::tensor::{BackwardFn, Scalar, Tensor};
use std::cell::{Cell, RefCell};
use std::rc::Rc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub struct BatchNormState<T: Scalar = f32> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Rc<RefCell<Vec<T>>>,
    pub running_var: Rc<RefCell<Vec<T>>>,
    /// Fraction of the old running statistic kept per update.
    pub momentum: T,
    pub eps: T,
    pub mode: Cell<Mode>,
}

impl<T: Scalar> BatchNormState<T> {
    pub fn new(channels: usize) -> Self {
        BatchNormState {
            gamma: Tensor::param(vec![T::ONE; channels], &[channels]).unwrap(),
            beta: Tensor::param(vec![T::ZERO; channels], &[channels]).unwrap(),
            running_mean: Rc::new(RefCell::new(vec![T::ZERO; channels])),
            running_var: Rc::new(RefCell::new(vec![T::ONE; channels])),
            momentum: T::from_f64(0.9),
            eps: T::from_f64(1e-5),
            mode: Cell::new(Mode::Train),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.numel()
    }

    pub fn set_mode(&self, mode: Mode) {
        self.mode.set(mode);
    }
}

/// Normalize per channel; train mode uses batch statistics and updates the
/// running ones (running <- momentum*running + (1-momentum)*batch), eval
/// mode is a pure function of the running statistics.
pub fn batchnorm2d<T: Scalar>(x: &Tensor<T>, s: &BatchNormState<T>) -> Result<Tensor<T>> {
    let _t = crate::threads::ScopedTimer::new(&crate::threads::T_BN);
    if x.ndim() != 4 {
        return Err(ArganError::Shape(format!(
            "batchnorm2d expects NCHW input, got {:?}",
            x.shape()
        )));
    }
    let (b, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    if c != s.channels() {
        return Err(ArganError::Shape(format!(
            "batchnorm2d channel mismatch: input has {c}, state has {}",
            s.channels()
        )));
    }
    let plane = h * w;
    let n = b * plane;
    let n_t = T::from_f64(n as f64);
    let mode = s.mode.get();

    // Pick normalization statistics.
    let (mean, invstd) = {
        let xd = x.data();
        match mode {
            Mode::Train => {
                let mut mean = vec![T::ZERO; c];
                let mut var = vec![T::ZERO; c];
                for ci in 0..c {
                    let mut acc = T::ZERO;
                    for bi in 0..b {
                        let base = (bi * c + ci) * plane;
                        for p in 0..plane {
                            acc += xd[base + p];
                        }
                    }
                    mean[ci] = acc / n_t;
                }
                for ci in 0..c {
                    let m = mean[ci];
                    let mut acc = T::ZERO;
                    for bi in 0..b {
                        let base = (bi * c + ci) * plane;
                        for p in 0..plane {
                            let d = xd[base + p] - m;
                            acc += d * d;
                        }
                    }
                    var[ci] = acc / n_t;
                }
                {
                    let mut rm = s.running_mean.borrow_mut();
                    let mut rv = s.running_var.borrow_mut();
                    let keep = s.momentum;
                    let take = T::ONE - keep;
                    for ci in 0..c {
                        rm[ci] = keep * rm[ci] + take * mean[ci];
                        rv[ci] = keep * rv[ci] + take * var[ci];
                    }
                }
                let invstd: Vec<T> = var.iter().map(|&v| T::ONE / (v + s.eps).sqrt()).collect();
                (mean, invstd)
            }
            Mode::Eval => {
                let mean = s.running_mean.borrow().clone();
                let invstd: Vec<T> = s
                    .running_var
                    .borrow()
                    .iter()
                    .map(|&v| T::ONE / (v + s.eps).sqrt())
                    .collect();
                (mean, invstd)
            }
        }
    };

    let mut out = vec![T::ZERO; b * c * plane];
    {
        let xd = x.data();
        let gd = s.gamma.data();
        let bd = s.beta.data();
        for bi in 0..b {
            for ci in 0..c {
                let base = (bi * c + ci) * plane;
                let (m, is, g, be) = (mean[ci], invstd[ci], gd[ci], bd[ci]);
                for p in 0..plane {
                    out[base + p] = g * (xd[base + p] - m) * is + be;
                }
            }
        }
    }

    let (xh, gh) = (x.clone(), s.gamma.clone());
    let (mean_c, invstd_c) = (mean, invstd);
    let backward: BackwardFn<T> = Box::new(move |up, needs| {
        let mut outs: Vec<Option<Vec<T>>> = vec![None, None, None];
        let xd = xh.data();
        let gd = gh.data();
        // Per-channel sums of upstream and upstream*xhat.
        let mut s1 = vec![T::ZERO; c];
        let mut s2 = vec![T::ZERO; c];
        for bi in 0..b {
            for ci in 0..c {
                let base = (bi * c + ci) * plane;
                let (m, is) = (mean_c[ci], invstd_c[ci]);
                for p in 0..plane {
                    let g = up[base + p];
                    s1[ci] += g;
                    s2[ci] += g * (xd[base + p] - m) * is;
                }
            }
        }
        if needs[0] {
            let mut dx = vec![T::ZERO; b * c * plane];
            match mode {
                Mode::Train => {
                    for bi in 0..b {
                        for ci in 0..c {
                            let base = (bi * c + ci) * plane;
                            let (m, is) = (mean_c[ci], invstd_c[ci]);
                            let coef = gd[ci] * is / n_t;
                            for p in 0..plane {
                                let xhat = (xd[base + p] - m) * is;
                                dx[base + p] =
                                    coef * (n_t * up[base + p] - s1[ci] - xhat * s2[ci]);
                            }
                        }
                    }
                }
                Mode::Eval => {
                    for bi in 0..b {
                        for ci in 0..c {
                            let base = (bi * c + ci) * plane;
                            let coef = gd[ci] * invstd_c[ci];
                            for p in 0..plane {
                                dx[base + p] = coef * up[base + p];
                            }
                        }
                    }
                }
            }
            outs[0] = Some(dx);
        }
        if needs[1] {
            outs[1] = Some(s2.clone());
        }
        if needs[2] {
            outs[2] = Some(s1.clone());
        }
        outs
    });

    Ok(Tensor::from_op(
        out,
        &[b, c, h, w],
        vec![x.clone(), s.gamma.clone(), s.beta.clone()],
        backward,
    ))
}
