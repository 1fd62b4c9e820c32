//! 2-d convolution and transposed convolution via im2col + gemm.
//!
//! Cross-correlation convention throughout (no kernel flipping). The
//! transposed convolution is exactly the adjoint of `conv2d` with shared
//! weights: <conv2d(x), y> == <x, deconv2d(y)>.
//!
//! The whole batch goes through one gemm per direction: the column matrix
//! holds per-item column blocks side by side, so the weight matrix is
//! packed and streamed once regardless of batch size.

use crate::error::{ArganError, Result};
use crate::tensor::{BackwardFn, Scalar, Tensor};
use crate::threads;

/// Convolution parameters. For `conv2d` the weight is
/// [out_ch, in_ch, k, k]; for `deconv2d` it is [in_ch, out_ch, k, k], so a
/// weight shared between the two maps out_ch back to in_ch.
pub struct ConvParams<T: Scalar = f32> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    pub padding: usize,
}

impl<T: Scalar> ConvParams<T> {
    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }
}

/// Output columns whose input tap stays inside [0, w): ox in [lo, hi).
#[inline]
fn valid_ox_range(w: usize, ow: usize, kj: usize, stride: usize, pad: usize) -> (usize, usize) {
    // ix = ox*stride + kj - pad must satisfy 0 <= ix < w.
    let lo = if kj >= pad {
        0
    } else {
        (pad - kj).div_ceil(stride)
    };
    let hi_excl = if w + pad > kj {
        ((w + pad - kj - 1) / stride + 1).min(ow)
    } else {
        0
    };
    (lo.min(ow), hi_excl.max(lo.min(ow)))
}

/// Unfold one [c, h, w] image into the column block starting at `col_base`
/// of a [c*k*k, row_len] matrix; out-of-image taps are zero. Row bounds are
/// hoisted out of the pixel loop and the stride-1 case degenerates to row
/// memcpys.
#[allow(clippy::too_many_arguments)]
fn im2col<T: Scalar>(
    x: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    col: &mut [T],
    row_len: usize,
    col_base: usize,
) {
    let _t = crate::threads::ScopedTimer::new(&crate::threads::T_IMCOL);
    let plane = oh * ow;
    debug_assert!(col_base + plane <= row_len);
    for ci in 0..c {
        let xbase = ci * h * w;
        for ki in 0..k {
            for kj in 0..k {
                let row = ((ci * k + ki) * k + kj) * row_len + col_base;
                let (lo, hi) = valid_ox_range(w, ow, kj, stride, pad);
                for oy in 0..oh {
                    let iy = (oy * stride + ki) as isize - pad as isize;
                    let out_row = row + oy * ow;
                    if iy < 0 || iy >= h as isize || lo >= hi {
                        col[out_row..out_row + ow].fill(T::ZERO);
                        continue;
                    }
                    let src_row = xbase + iy as usize * w;
                    col[out_row..out_row + lo].fill(T::ZERO);
                    col[out_row + hi..out_row + ow].fill(T::ZERO);
                    if stride == 1 {
                        let off = (lo + kj) as isize - pad as isize;
                        let src = &x[(src_row as isize + off) as usize..];
                        col[out_row + lo..out_row + hi].copy_from_slice(&src[..hi - lo]);
                    } else {
                        let mut ix = (lo * stride + kj) as isize - pad as isize;
                        for ox in lo..hi {
                            col[out_row + ox] = x[(src_row as isize + ix) as usize];
                            ix += stride as isize;
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of `im2col`: scatter-add one column block back into [c, h, w].
#[allow(clippy::too_many_arguments)]
fn col2im<T: Scalar>(
    col: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    x: &mut [T],
    row_len: usize,
    col_base: usize,
) {
    let _t = crate::threads::ScopedTimer::new(&crate::threads::T_IMCOL);
    debug_assert_eq!(x.len(), c * h * w);
    for ci in 0..c {
        let xbase = ci * h * w;
        for ki in 0..k {
            for kj in 0..k {
                let row = ((ci * k + ki) * k + kj) * row_len + col_base;
                let (lo, hi) = valid_ox_range(w, ow, kj, stride, pad);
                if lo >= hi {
                    continue;
                }
                for oy in 0..oh {
                    let iy = (oy * stride + ki) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst_row = xbase + iy as usize * w;
                    let src_row = row + oy * ow;
                    let mut ix = (lo * stride + kj) as isize - pad as isize;
                    if stride == 1 {
                        let dst = &mut x[(dst_row as isize + ix) as usize..][..hi - lo];
                        let src = &col[src_row + lo..src_row + hi];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += *s;
                        }
                    } else {
                        for ox in lo..hi {
                            x[(dst_row as isize + ix) as usize] += col[src_row + ox];
                            ix += stride as isize;
                        }
                    }
                }
            }
        }
    }
}

/// NCHW -> channel-major [c, b*plane] gather (column blocks per item).
fn to_channel_major<T: Scalar>(src: &[T], b: usize, c: usize, plane: usize, dst: &mut [T]) {
    debug_assert_eq!(dst.len(), b * c * plane);
    let row_len = b * plane;
    for bi in 0..b {
        for ci in 0..c {
            let s = &src[(bi * c + ci) * plane..(bi * c + ci + 1) * plane];
            dst[ci * row_len + bi * plane..ci * row_len + bi * plane + plane].copy_from_slice(s);
        }
    }
}

/// Inverse of `to_channel_major`, optionally adding a per-channel bias.
fn from_channel_major<T: Scalar>(
    src: &[T],
    b: usize,
    c: usize,
    plane: usize,
    bias: Option<&[T]>,
    dst: &mut [T],
) {
    debug_assert_eq!(src.len(), b * c * plane);
    let row_len = b * plane;
    for bi in 0..b {
        for ci in 0..c {
            let s = &src[ci * row_len + bi * plane..ci * row_len + bi * plane + plane];
            let d = &mut dst[(bi * c + ci) * plane..(bi * c + ci + 1) * plane];
            match bias {
                Some(bv) => {
                    let add = bv[ci];
                    for (dv, sv) in d.iter_mut().zip(s) {
                        *dv = *sv + add;
                    }
                }
                None => d.copy_from_slice(s),
            }
        }
    }
}


/// Pointer wrapper for disjoint per-item writes into a shared buffer.
#[derive(Clone, Copy)]
struct ColPtr<T>(*mut T, usize);
unsafe impl<T> Send for ColPtr<T> {}
unsafe impl<T> Sync for ColPtr<T> {}

/// im2col for every batch item, split across kernel threads; each item
/// writes its own column block, so any thread count gives the same bytes.
#[allow(clippy::too_many_arguments)]
fn im2col_batch<T: Scalar>(
    x: &[T],
    b: usize,
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    col: &mut [T],
) {
    let plane = oh * ow;
    let cols = b * plane;
    debug_assert_eq!(col.len(), c * k * k * cols);
    let cp = ColPtr(col.as_mut_ptr(), col.len());
    let mut tasks: Vec<Box<dyn FnOnce() + Send + '_>> = Vec::with_capacity(b);
    for bi in 0..b {
        let xb = &x[bi * c * h * w..(bi + 1) * c * h * w];
        tasks.push(Box::new(move || {
            let cp = cp; // capture the Send wrapper, not its raw field
            // Safety: items write disjoint column ranges of the shared
            // buffer; scoped_run joins before the borrow ends.
            let col_all = unsafe { std::slice::from_raw_parts_mut(cp.0, cp.1) };
            im2col(xb, c, h, w, k, stride, pad, oh, ow, col_all, cols, bi * plane);
        }));
    }
    crate::threads::scoped_run(tasks);
}

fn conv_out_size(h: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = h + 2 * pad;
    if padded < k {
        return None;
    }
    Some((padded - k) / stride + 1)
}

/// Strided 2-d convolution with bias; exact forward and backward with
/// respect to input, weight, and bias.
pub fn conv2d<T: Scalar>(x: &Tensor<T>, p: &ConvParams<T>) -> Result<Tensor<T>> {
    if x.ndim() != 4 || p.weight.ndim() != 4 {
        return Err(ArganError::Shape(format!(
            "conv2d expects NCHW input and OIKK weight, got {:?} and {:?}",
            x.shape(),
            p.weight.shape()
        )));
    }
    let (b, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (oc, ic, kh, kw) = (
        p.weight.shape()[0],
        p.weight.shape()[1],
        p.weight.shape()[2],
        p.weight.shape()[3],
    );
    if kh != kw {
        return Err(ArganError::Shape(format!(
            "conv2d kernels must be square, got {kh}x{kw}"
        )));
    }
    if c != ic {
        return Err(ArganError::Shape(format!(
            "conv2d channel mismatch: input has {c} channels, weight expects {ic}"
        )));
    }
    if p.bias.shape() != [oc] {
        return Err(ArganError::Shape(format!(
            "conv2d bias shape {:?} does not match {oc} output channels",
            p.bias.shape()
        )));
    }
    let (stride, pad, k) = (p.stride, p.padding, kh);
    let (oh, ow) = match (
        conv_out_size(h, k, stride, pad),
        conv_out_size(w, k, stride, pad),
    ) {
        (Some(oh), Some(ow)) if oh >= 1 && ow >= 1 => (oh, ow),
        _ => {
            return Err(ArganError::Shape(format!(
                "conv2d output would be empty for input {h}x{w}, kernel {k}, stride {stride}, pad {pad}"
            )))
        }
    };

    let ckk = c * k * k;
    let plane = oh * ow;
    let cols = b * plane;
    let mut out = vec![T::ZERO; b * oc * plane];
    {
        let xd = x.data();
        let wd = p.weight.data();
        let bd = p.bias.data();
        let mut col = threads::uninit_vec::<T>(ckk * cols);
        im2col_batch(&xd, b, c, h, w, k, stride, pad, oh, ow, &mut col);
        let mut out_cm = threads::uninit_vec::<T>(oc * cols);
        threads::gemm(false, false, oc, ckk, cols, T::ONE, &wd, &col, T::ZERO, &mut out_cm);
        from_channel_major(&out_cm, b, oc, plane, Some(&bd), &mut out);
    }

    let (xh, wh) = (x.clone(), p.weight.clone());
    let backward: BackwardFn<T> = Box::new(move |up, needs| {
        let mut outs: Vec<Option<Vec<T>>> = vec![None, None, None];
        let xd = xh.data();
        let wd = wh.data();
        let mut up_cm = threads::uninit_vec::<T>(oc * cols);
        to_channel_major(up, b, oc, plane, &mut up_cm);
        if needs[0] {
            // dX = col2im(Wᵀ · dY)
            let mut dcol = threads::uninit_vec::<T>(ckk * cols);
            threads::gemm(true, false, ckk, oc, cols, T::ONE, &wd, &up_cm, T::ZERO, &mut dcol);
            let mut dx = vec![T::ZERO; b * c * h * w];
            let dcol_ref = &dcol;
            threads::run_batched(&mut dx, c * h * w, b, |range, sub| {
                for (j, bi) in range.enumerate() {
                    col2im(
                        dcol_ref,
                        c,
                        h,
                        w,
                        k,
                        stride,
                        pad,
                        oh,
                        ow,
                        &mut sub[j * c * h * w..(j + 1) * c * h * w],
                        cols,
                        bi * plane,
                    );
                }
            });
            outs[0] = Some(dx);
        }
        if needs[1] {
            // dW = dY_cm · colᵀ, summing over the batch inside the gemm.
            let mut col = threads::uninit_vec::<T>(ckk * cols);
            im2col_batch(&xd, b, c, h, w, k, stride, pad, oh, ow, &mut col);
            let mut dw = threads::uninit_vec::<T>(oc * ckk);
            threads::gemm(false, true, oc, cols, ckk, T::ONE, &up_cm, &col, T::ZERO, &mut dw);
            outs[1] = Some(dw);
        }
        if needs[2] {
            let mut db = vec![T::ZERO; oc];
            for (o, dbo) in db.iter_mut().enumerate() {
                let row = &up_cm[o * cols..(o + 1) * cols];
                for &v in row {
                    *dbo += v;
                }
            }
            outs[2] = Some(db);
        }
        outs
    });

    Ok(Tensor::from_op(
        out,
        &[b, oc, oh, ow],
        vec![x.clone(), p.weight.clone(), p.bias.clone()],
        backward,
    ))
}

/// Transposed convolution: the forward pass is the input-gradient of
/// `conv2d` under the same weight. Output spatial size is
/// (H-1)*stride - 2*pad + k.
pub fn deconv2d<T: Scalar>(x: &Tensor<T>, p: &ConvParams<T>) -> Result<Tensor<T>> {
    if x.ndim() != 4 || p.weight.ndim() != 4 {
        return Err(ArganError::Shape(format!(
            "deconv2d expects NCHW input and IOKK weight, got {:?} and {:?}",
            x.shape(),
            p.weight.shape()
        )));
    }
    let (b, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (ic, oc, kh, kw) = (
        p.weight.shape()[0],
        p.weight.shape()[1],
        p.weight.shape()[2],
        p.weight.shape()[3],
    );
    if kh != kw {
        return Err(ArganError::Shape(format!(
            "deconv2d kernels must be square, got {kh}x{kw}"
        )));
    }
    if c != ic {
        return Err(ArganError::Shape(format!(
            "deconv2d channel mismatch: input has {c} channels, weight expects {ic}"
        )));
    }
    if p.bias.shape() != [oc] {
        return Err(ArganError::Shape(format!(
            "deconv2d bias shape {:?} does not match {oc} output channels",
            p.bias.shape()
        )));
    }
    let (stride, pad, k) = (p.stride, p.padding, kh);
    let oh_full = (h - 1) * stride + k;
    let ow_full = (w - 1) * stride + k;
    if oh_full <= 2 * pad || ow_full <= 2 * pad {
        return Err(ArganError::Shape(format!(
            "deconv2d output would be empty for input {h}x{w}, kernel {k}, stride {stride}, pad {pad}"
        )));
    }
    let (oh, ow) = (oh_full - 2 * pad, ow_full - 2 * pad);

    let okk = oc * k * k;
    let in_plane = h * w;
    let out_plane = oh * ow;
    let cols = b * in_plane;
    let mut out = vec![T::ZERO; b * oc * out_plane];
    {
        let xd = x.data();
        let wd = p.weight.data();
        let bd = p.bias.data();
        let mut x_cm = threads::uninit_vec::<T>(ic * cols);
        to_channel_major(&xd, b, ic, in_plane, &mut x_cm);
        // col = Wᵀ · x, with W viewed as [ic, oc*k*k]
        let mut col = threads::uninit_vec::<T>(okk * cols);
        threads::gemm(true, false, okk, ic, cols, T::ONE, &wd, &x_cm, T::ZERO, &mut col);
        let col_ref = &col;
        let bs: &[T] = &bd;
        threads::run_batched(&mut out, oc * out_plane, b, |range, sub| {
            for (j, bi) in range.enumerate() {
                let out_b = &mut sub[j * oc * out_plane..(j + 1) * oc * out_plane];
                col2im(
                    col_ref,
                    oc,
                    oh,
                    ow,
                    k,
                    stride,
                    pad,
                    h,
                    w,
                    out_b,
                    cols,
                    bi * in_plane,
                );
                for o in 0..oc {
                    let bias = bs[o];
                    for v in &mut out_b[o * out_plane..(o + 1) * out_plane] {
                        *v += bias;
                    }
                }
            }
        });
    }

    let (xh, wh) = (x.clone(), p.weight.clone());
    let backward: BackwardFn<T> = Box::new(move |up, needs| {
        let mut outs: Vec<Option<Vec<T>>> = vec![None, None, None];
        let xd = xh.data();
        let wd = wh.data();
        // im2col over dY feeds both dX and dW.
        let mut col = threads::uninit_vec::<T>(okk * cols);
        if needs[0] || needs[1] {
            im2col_batch(up, b, oc, oh, ow, k, stride, pad, h, w, &mut col);
        }
        if needs[0] {
            // dX = W · im2col(dY): the adjoint direction is a plain conv.
            let mut dx_cm = threads::uninit_vec::<T>(ic * cols);
            threads::gemm(false, false, ic, okk, cols, T::ONE, &wd, &col, T::ZERO, &mut dx_cm);
            let mut dx = vec![T::ZERO; b * c * in_plane];
            from_channel_major(&dx_cm, b, ic, in_plane, None, &mut dx);
            outs[0] = Some(dx);
        }
        if needs[1] {
            // dW = x_cm · im2col(dY)ᵀ, summing over the batch inside the gemm.
            let mut x_cm = threads::uninit_vec::<T>(ic * cols);
            to_channel_major(&xd, b, ic, in_plane, &mut x_cm);
            let mut dw = threads::uninit_vec::<T>(ic * okk);
            threads::gemm(false, true, ic, cols, okk, T::ONE, &x_cm, &col, T::ZERO, &mut dw);
            outs[1] = Some(dw);
        }
        if needs[2] {
            let mut db = vec![T::ZERO; oc];
            for bi in 0..b {
                for o in 0..oc {
                    let base = (bi * oc + o) * out_plane;
                    for pix in 0..out_plane {
                        db[o] += up[base + pix];
                    }
                }
            }
            outs[2] = Some(db);
        }
        outs
    });

    Ok(Tensor::from_op(
        out,
        &[b, oc, oh, ow],
        vec![x.clone(), p.weight.clone(), p.bias.clone()],
        backward,
    ))
}
