//! Fully connected layer: y = x·Wᵀ + b.

use crate::error::{ArganError, Result};
use crate::tensor::{BackwardFn, Scalar, Tensor};
use crate::threads;

pub fn linear<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    if x.ndim() != 2 || weight.ndim() != 2 {
        return Err(ArganError::Shape(format!(
            "linear expects 2-d input and weight, got {:?} and {:?}",
            x.shape(),
            weight.shape()
        )));
    }
    let (b, n) = (x.shape()[0], x.shape()[1]);
    let (m, n2) = (weight.shape()[0], weight.shape()[1]);
    if n != n2 || bias.shape() != [m] {
        return Err(ArganError::Shape(format!(
            "linear extents disagree: x {:?}, weight {:?}, bias {:?}",
            x.shape(),
            weight.shape(),
            bias.shape()
        )));
    }
    let mut out = vec![T::ZERO; b * m];
    threads::gemm(
        false,
        true,
        b,
        n,
        m,
        T::ONE,
        &x.data(),
        &weight.data(),
        T::ZERO,
        &mut out,
    );
    {
        let bd = bias.data();
        for bi in 0..b {
            for mi in 0..m {
                out[bi * m + mi] += bd[mi];
            }
        }
    }
    let (xh, wh) = (x.clone(), weight.clone());
    let backward: BackwardFn<T> = Box::new(move |up, needs| {
        let mut outs: Vec<Option<Vec<T>>> = vec![None, None, None];
        if needs[0] {
            let mut dx = vec![T::ZERO; b * n];
            threads::gemm(false, false, b, m, n, T::ONE, up, &wh.data(), T::ZERO, &mut dx);
            outs[0] = Some(dx);
        }
        if needs[1] {
            let mut dw = vec![T::ZERO; m * n];
            threads::gemm(true, false, m, b, n, T::ONE, up, &xh.data(), T::ZERO, &mut dw);
            outs[1] = Some(dw);
        }
        if needs[2] {
            let mut db = vec![T::ZERO; m];
            for bi in 0..b {
                for mi in 0..m {
                    db[mi] += up[bi * m + mi];
                }
            }
            outs[2] = Some(db);
        }
        outs
    });
    Ok(Tensor::from_op(
        out,
        &[b, m],
        vec![x.clone(), weight.clone(), bias.clone()],
        backward,
    ))
}
