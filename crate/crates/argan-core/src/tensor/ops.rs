//! Differentiable tensor operations.
//!
//! Elementwise arithmetic supports one broadcast pattern: a single-channel
//! NCHW operand against a multi-channel one (attention maps gating images).
//! Gradients over the broadcast operand are summed across channels.

use super::{Scalar, Tensor};
use crate::error::{ArganError, Result};
use crate::threads;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementwiseKind {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug)]
pub enum ActivationKind {
    Sigmoid,
    Tanh,
    /// Negative-side slope, conventionally 0.2 here.
    LeakyRelu(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceKind {
    Sum,
    Mean,
}

/// How the right operand lines up with the left one.
enum Align {
    Same,
    /// b is [B,1,H,W] against a [B,C,H,W]; (batch, channels, h*w).
    Channel(usize, usize, usize),
}

fn alignment<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, what: &str) -> Result<Align> {
    if a.shape() == b.shape() {
        return Ok(Align::Same);
    }
    let (sa, sb) = (a.shape(), b.shape());
    if sa.len() == 4
        && sb.len() == 4
        && sb[0] == sa[0]
        && sb[1] == 1
        && sb[2] == sa[2]
        && sb[3] == sa[3]
    {
        return Ok(Align::Channel(sa[0], sa[1], sa[2] * sa[3]));
    }
    Err(ArganError::Shape(format!(
        "elementwise {what}: lhs {sa:?} vs rhs {sb:?} (shapes must match or rhs must be a single-channel NCHW broadcast)"
    )))
}

fn sum_channels<T: Scalar>(src: &[T], b: usize, c: usize, hw: usize) -> Vec<T> {
    let mut out = vec![T::ZERO; b * hw];
    for bi in 0..b {
        for ci in 0..c {
            let base = (bi * c + ci) * hw;
            let obase = bi * hw;
            for p in 0..hw {
                out[obase + p] += src[base + p];
            }
        }
    }
    out
}

/// Elementwise add/sub/mul with the channel-broadcast rule above.
pub fn elementwise<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    kind: ElementwiseKind,
) -> Result<Tensor<T>> {
    let what = match kind {
        ElementwiseKind::Add => "add",
        ElementwiseKind::Sub => "sub",
        ElementwiseKind::Mul => "mul",
    };
    let align = alignment(a, b, what)?;
    let ad = a.data();
    let bd = b.data();
    let data: Vec<T> = match align {
        Align::Same => ad
            .iter()
            .zip(bd.iter())
            .map(|(&x, &y)| match kind {
                ElementwiseKind::Add => x + y,
                ElementwiseKind::Sub => x - y,
                ElementwiseKind::Mul => x * y,
            })
            .collect(),
        Align::Channel(nb, nc, hw) => {
            let mut out = vec![T::ZERO; nb * nc * hw];
            for bi in 0..nb {
                for ci in 0..nc {
                    let base = (bi * nc + ci) * hw;
                    let bbase = bi * hw;
                    for p in 0..hw {
                        let x = ad[base + p];
                        let y = bd[bbase + p];
                        out[base + p] = match kind {
                            ElementwiseKind::Add => x + y,
                            ElementwiseKind::Sub => x - y,
                            ElementwiseKind::Mul => x * y,
                        };
                    }
                }
            }
            out
        }
    };
    drop(ad);
    drop(bd);

    let shape = a.shape().to_vec();
    let (ah, bh) = (a.clone(), b.clone());
    let bcast = matches!(align, Align::Channel(..));
    let dims = match align {
        Align::Channel(nb, nc, hw) => (nb, nc, hw),
        Align::Same => (0, 0, 0),
    };
    let backward: super::BackwardFn<T> = Box::new(move |up, needs| {
        let mut out: Vec<Option<Vec<T>>> = vec![None, None];
        let (nb, nc, hw) = dims;
        match kind {
            ElementwiseKind::Add => {
                if needs[0] {
                    out[0] = Some(up.to_vec());
                }
                if needs[1] {
                    out[1] = Some(if bcast {
                        sum_channels(up, nb, nc, hw)
                    } else {
                        up.to_vec()
                    });
                }
            }
            ElementwiseKind::Sub => {
                if needs[0] {
                    out[0] = Some(up.to_vec());
                }
                if needs[1] {
                    let neg: Vec<T> = up.iter().map(|&g| -g).collect();
                    out[1] = Some(if bcast {
                        sum_channels(&neg, nb, nc, hw)
                    } else {
                        neg
                    });
                }
            }
            ElementwiseKind::Mul => {
                if needs[0] {
                    let bd = bh.data();
                    let da: Vec<T> = if bcast {
                        let mut v = vec![T::ZERO; up.len()];
                        for bi in 0..nb {
                            for ci in 0..nc {
                                let base = (bi * nc + ci) * hw;
                                let bbase = bi * hw;
                                for p in 0..hw {
                                    v[base + p] = up[base + p] * bd[bbase + p];
                                }
                            }
                        }
                        v
                    } else {
                        up.iter().zip(bd.iter()).map(|(&g, &y)| g * y).collect()
                    };
                    out[0] = Some(da);
                }
                if needs[1] {
                    let ad = ah.data();
                    let prod: Vec<T> = up.iter().zip(ad.iter()).map(|(&g, &x)| g * x).collect();
                    out[1] = Some(if bcast {
                        sum_channels(&prod, nb, nc, hw)
                    } else {
                        prod
                    });
                }
            }
        }
        out
    });
    Ok(Tensor::from_op(
        data,
        &shape,
        vec![a.clone(), b.clone()],
        backward,
    ))
}

/// Elementwise nonlinearity with its exact backward rule.
pub fn activation<T: Scalar>(x: &Tensor<T>, kind: ActivationKind) -> Tensor<T> {
    let _t = crate::threads::ScopedTimer::new(&crate::threads::T_ACT);
    let xd = x.data();
    let data: Vec<T> = match kind {
        ActivationKind::Sigmoid => xd
            .iter()
            .map(|&v| T::ONE / (T::ONE + (-v).exp()))
            .collect(),
        ActivationKind::Tanh => xd.iter().map(|&v| v.tanh()).collect(),
        ActivationKind::LeakyRelu(slope) => {
            let s = T::from_f64(slope);
            xd.iter()
                .map(|&v| if v >= T::ZERO { v } else { s * v })
                .collect()
        }
    };
    drop(xd);
    let shape = x.shape().to_vec();
    let backward: super::BackwardFn<T> = match kind {
        ActivationKind::Sigmoid => {
            let y = data.clone();
            Box::new(move |up, needs| {
                if !needs[0] {
                    return vec![None];
                }
                vec![Some(
                    up.iter()
                        .zip(&y)
                        .map(|(&g, &s)| g * s * (T::ONE - s))
                        .collect(),
                )]
            })
        }
        ActivationKind::Tanh => {
            let y = data.clone();
            Box::new(move |up, needs| {
                if !needs[0] {
                    return vec![None];
                }
                vec![Some(
                    up.iter()
                        .zip(&y)
                        .map(|(&g, &t)| g * (T::ONE - t * t))
                        .collect(),
                )]
            })
        }
        ActivationKind::LeakyRelu(slope) => {
            let xh = x.clone();
            let s = T::from_f64(slope);
            Box::new(move |up, needs| {
                if !needs[0] {
                    return vec![None];
                }
                let xd = xh.data();
                vec![Some(
                    up.iter()
                        .zip(xd.iter())
                        .map(|(&g, &v)| if v >= T::ZERO { g } else { g * s })
                        .collect(),
                )]
            })
        }
    };
    Tensor::from_op(data, &shape, vec![x.clone()], backward)
}

/// Natural log; inputs are expected to be clamped away from zero.
pub fn ln<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let data: Vec<T> = x.data().iter().map(|&v| v.ln()).collect();
    let shape = x.shape().to_vec();
    let xh = x.clone();
    let backward: super::BackwardFn<T> = Box::new(move |up, needs| {
        if !needs[0] {
            return vec![None];
        }
        let xd = xh.data();
        vec![Some(
            up.iter().zip(xd.iter()).map(|(&g, &v)| g / v).collect(),
        )]
    });
    Tensor::from_op(data, &shape, vec![x.clone()], backward)
}

/// Clamp to [lo, hi]; the gradient passes through wherever lo <= x <= hi.
pub fn clamp<T: Scalar>(x: &Tensor<T>, lo: T, hi: T) -> Tensor<T> {
    let data: Vec<T> = x
        .data()
        .iter()
        .map(|&v| v.maximum(lo).minimum(hi))
        .collect();
    let shape = x.shape().to_vec();
    let xh = x.clone();
    let backward: super::BackwardFn<T> = Box::new(move |up, needs| {
        if !needs[0] {
            return vec![None];
        }
        let xd = xh.data();
        vec![Some(
            up.iter()
                .zip(xd.iter())
                .map(|(&g, &v)| if v >= lo && v <= hi { g } else { T::ZERO })
                .collect(),
        )]
    });
    Tensor::from_op(data, &shape, vec![x.clone()], backward)
}

/// out = scale*x + offset with compile-time-constant coefficients.
pub fn affine<T: Scalar>(x: &Tensor<T>, scale: T, offset: T) -> Tensor<T> {
    let data: Vec<T> = x.data().iter().map(|&v| scale * v + offset).collect();
    let shape = x.shape().to_vec();
    let backward: super::BackwardFn<T> = Box::new(move |up, needs| {
        if !needs[0] {
            return vec![None];
        }
        vec![Some(up.iter().map(|&g| g * scale).collect())]
    });
    Tensor::from_op(data, &shape, vec![x.clone()], backward)
}

/// Standard 2-d matrix product.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.ndim() != 2 || b.ndim() != 2 {
        return Err(ArganError::Shape(format!(
            "matmul expects 2-d operands, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let (k2, n) = (b.shape()[0], b.shape()[1]);
    if k != k2 {
        return Err(ArganError::Shape(format!(
            "matmul inner extents differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut data = vec![T::ZERO; m * n];
    threads::gemm(
        false,
        false,
        m,
        k,
        n,
        T::ONE,
        &a.data(),
        &b.data(),
        T::ZERO,
        &mut data,
    );
    let (ah, bh) = (a.clone(), b.clone());
    let backward: super::BackwardFn<T> = Box::new(move |up, needs| {
        let mut out: Vec<Option<Vec<T>>> = vec![None, None];
        if needs[0] {
            // dA = dC · Bᵀ
            let mut da = vec![T::ZERO; m * k];
            threads::gemm(false, true, m, n, k, T::ONE, up, &bh.data(), T::ZERO, &mut da);
            out[0] = Some(da);
        }
        if needs[1] {
            // dB = Aᵀ · dC
            let mut db = vec![T::ZERO; k * n];
            threads::gemm(true, false, k, m, n, T::ONE, &ah.data(), up, T::ZERO, &mut db);
            out[1] = Some(db);
        }
        out
    });
    Ok(Tensor::from_op(
        data,
        &[m, n],
        vec![a.clone(), b.clone()],
        backward,
    ))
}

/// Full reduction to a single-element tensor.
pub fn reduce<T: Scalar>(x: &Tensor<T>, kind: ReduceKind) -> Tensor<T> {
    let n = x.numel();
    let mut acc = T::ZERO;
    for &v in x.data().iter() {
        acc += v;
    }
    let value = match kind {
        ReduceKind::Sum => acc,
        ReduceKind::Mean => acc / T::from_f64(n as f64),
    };
    let backward: super::BackwardFn<T> = Box::new(move |up, needs| {
        if !needs[0] {
            return vec![None];
        }
        let g = match kind {
            ReduceKind::Sum => up[0],
            ReduceKind::Mean => up[0] / T::from_f64(n as f64),
        };
        vec![Some(vec![g; n])]
    });
    Tensor::from_op(vec![value], &[1], vec![x.clone()], backward)
}

fn split_at_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let extent = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, extent, inner)
}

/// Concatenate along `axis` (0 for stacking weights, 1 for NCHW channels).
pub fn concat<T: Scalar>(parts: &[Tensor<T>], axis: usize) -> Result<Tensor<T>> {
    if parts.is_empty() {
        return Err(ArganError::Shape("concat of zero tensors".into()));
    }
    let ndim = parts[0].ndim();
    if axis >= ndim {
        return Err(ArganError::Shape(format!(
            "concat axis {axis} out of range for {ndim}-d tensors"
        )));
    }
    let mut out_shape = parts[0].shape().to_vec();
    for p in &parts[1..] {
        if p.ndim() != ndim
            || (0..ndim).any(|d| d != axis && p.shape()[d] != out_shape[d])
        {
            return Err(ArganError::Shape(format!(
                "concat: incompatible shapes {:?} vs {:?} along axis {axis}",
                parts[0].shape(),
                p.shape()
            )));
        }
    }
    out_shape[axis] = parts.iter().map(|p| p.shape()[axis]).sum();
    let (outer, total_extent, inner) = split_at_axis(&out_shape, axis);
    let mut data = vec![T::ZERO; outer * total_extent * inner];
    let mut offset = 0usize;
    let mut extents = Vec::with_capacity(parts.len());
    for p in parts {
        let e = p.shape()[axis];
        extents.push(e);
        let pd = p.data();
        for o in 0..outer {
            let src = &pd[o * e * inner..(o + 1) * e * inner];
            let dst_base = (o * total_extent + offset) * inner;
            data[dst_base..dst_base + e * inner].copy_from_slice(src);
        }
        offset += e;
    }
    let backward: super::BackwardFn<T> = Box::new(move |up, needs| {
        let mut outs: Vec<Option<Vec<T>>> = Vec::with_capacity(extents.len());
        let mut off = 0usize;
        for (idx, &e) in extents.iter().enumerate() {
            if needs[idx] {
                let mut g = vec![T::ZERO; outer * e * inner];
                for o in 0..outer {
                    let src_base = (o * total_extent + off) * inner;
                    g[o * e * inner..(o + 1) * e * inner]
                        .copy_from_slice(&up[src_base..src_base + e * inner]);
                }
                outs.push(Some(g));
            } else {
                outs.push(None);
            }
            off += e;
        }
        outs
    });
    Ok(Tensor::from_op(data, &out_shape, parts.to_vec(), backward))
}

/// Contiguous slice [start, start+len) along `axis`.
pub fn narrow<T: Scalar>(
    x: &Tensor<T>,
    axis: usize,
    start: usize,
    len: usize,
) -> Result<Tensor<T>> {
    if axis >= x.ndim() || start + len > x.shape()[axis] || len == 0 {
        return Err(ArganError::Shape(format!(
            "narrow: range {start}..{} out of bounds for axis {axis} of {:?}",
            start + len,
            x.shape()
        )));
    }
    let (outer, extent, inner) = split_at_axis(x.shape(), axis);
    let mut out_shape = x.shape().to_vec();
    out_shape[axis] = len;
    let xd = x.data();
    let mut data = vec![T::ZERO; outer * len * inner];
    for o in 0..outer {
        let src_base = (o * extent + start) * inner;
        data[o * len * inner..(o + 1) * len * inner]
            .copy_from_slice(&xd[src_base..src_base + len * inner]);
    }
    drop(xd);
    let total = x.numel();
    let backward: super::BackwardFn<T> = Box::new(move |up, needs| {
        if !needs[0] {
            return vec![None];
        }
        let mut g = vec![T::ZERO; total];
        for o in 0..outer {
            let dst_base = (o * extent + start) * inner;
            g[dst_base..dst_base + len * inner]
                .copy_from_slice(&up[o * len * inner..(o + 1) * len * inner]);
        }
        vec![Some(g)]
    });
    Ok(Tensor::from_op(data, &out_shape, vec![x.clone()], backward))
}

/// Same data, new shape (must preserve element count).
pub fn reshape<T: Scalar>(x: &Tensor<T>, new_shape: &[usize]) -> Result<Tensor<T>> {
    let numel: usize = new_shape.iter().product();
    if numel != x.numel() {
        return Err(ArganError::Shape(format!(
            "reshape {:?} -> {:?} changes element count",
            x.shape(),
            new_shape
        )));
    }
    let backward: super::BackwardFn<T> = Box::new(move |up, needs| {
        if !needs[0] {
            return vec![None];
        }
        vec![Some(up.to_vec())]
    });
    Ok(Tensor::from_op(
        x.to_vec(),
        new_shape,
        vec![x.clone()],
        backward,
    ))
}

impl<T: Scalar> Tensor<T> {
    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        elementwise(self, other, ElementwiseKind::Add)
    }
    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        elementwise(self, other, ElementwiseKind::Sub)
    }
    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        elementwise(self, other, ElementwiseKind::Mul)
    }
    pub fn sigmoid(&self) -> Tensor<T> {
        activation(self, ActivationKind::Sigmoid)
    }
    pub fn tanh(&self) -> Tensor<T> {
        activation(self, ActivationKind::Tanh)
    }
    pub fn leaky_relu(&self, slope: f64) -> Tensor<T> {
        activation(self, ActivationKind::LeakyRelu(slope))
    }
    pub fn ln(&self) -> Tensor<T> {
        ln(self)
    }
    pub fn clamp(&self, lo: T, hi: T) -> Tensor<T> {
        clamp(self, lo, hi)
    }
    pub fn scale(&self, c: T) -> Tensor<T> {
        affine(self, c, T::ZERO)
    }
    pub fn affine(&self, scale: T, offset: T) -> Tensor<T> {
        affine(self, scale, offset)
    }
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        matmul(self, other)
    }
    pub fn sum(&self) -> Tensor<T> {
        reduce(self, ReduceKind::Sum)
    }
    pub fn mean(&self) -> Tensor<T> {
        reduce(self, ReduceKind::Mean)
    }
    pub fn reshape(&self, new_shape: &[usize]) -> Result<Tensor<T>> {
        reshape(self, new_shape)
    }

    /// mean((self - other)^2), the workhorse of the training objectives.
    pub fn mse(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let diff = self.sub(other)?;
        Ok(diff.mul(&diff)?.mean())
    }
}
