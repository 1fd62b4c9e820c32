//! Spectral normalization by power iteration.
//!
//! The weight is viewed as an out_ch x (rest) matrix; the estimated largest
//! singular value divides the weight before use. The estimate is treated as
//! a constant in backward, and the left vector u persists across calls.

use crate::error::Result;
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};
use std::cell::RefCell;
use std::rc::Rc;

pub struct SpectralState<T: Scalar = f32> {
    /// Unit-norm left singular vector estimate, length out_ch.
    pub u: Rc<RefCell<Vec<T>>>,
    pub n_power_iters: usize,
}

impl<T: Scalar> SpectralState<T> {
    pub fn new(out_dim: usize, n_power_iters: usize, rng: &mut Rng) -> Self {
        assert!(n_power_iters >= 1, "n_power_iters must be positive");
        let mut u: Vec<T> = (0..out_dim).map(|_| T::from_f64(rng.normal())).collect();
        normalize(&mut u);
        SpectralState {
            u: Rc::new(RefCell::new(u)),
            n_power_iters,
        }
    }
}

/// In-place L2 normalization; vectors below 1e-12 are left untouched so the
/// persistent u stays a unit vector even for a zero weight matrix.
fn normalize<T: Scalar>(v: &mut [T]) -> bool {
    let mut sq = T::ZERO;
    for &x in v.iter() {
        sq += x * x;
    }
    let norm = sq.sqrt();
    if norm.to_f64() < 1e-12 {
        return false;
    }
    for x in v.iter_mut() {
        *x = *x / norm;
    }
    true
}

/// Returns the normalized weight (weight / sigma) and the sigma estimate.
/// The state's u vector is advanced in place.
pub fn spectral_normalize<T: Scalar>(
    weight: &Tensor<T>,
    s: &SpectralState<T>,
) -> Result<(Tensor<T>, T)> {
    let out_dim = weight.shape()[0];
    let rest: usize = weight.numel() / out_dim;
    let wd = weight.data();
    let mut u = s.u.borrow_mut();
    debug_assert_eq!(u.len(), out_dim);

    let mut v = vec![T::ZERO; rest];
    for _ in 0..s.n_power_iters {
        // v <- normalize(Wᵀ u)
        for x in v.iter_mut() {
            *x = T::ZERO;
        }
        for o in 0..out_dim {
            let uo = u[o];
            let row = &wd[o * rest..(o + 1) * rest];
            for (vx, &wx) in v.iter_mut().zip(row) {
                *vx += wx * uo;
            }
        }
        if !normalize(&mut v) {
            break;
        }
        // u <- normalize(W v)
        let mut u_new = vec![T::ZERO; out_dim];
        for o in 0..out_dim {
            let row = &wd[o * rest..(o + 1) * rest];
            let mut acc = T::ZERO;
            for (&wx, &vx) in row.iter().zip(&v) {
                acc += wx * vx;
            }
            u_new[o] = acc;
        }
        if normalize(&mut u_new) {
            u.copy_from_slice(&u_new);
        }
    }

    // sigma = uᵀ W v with the final u, v.
    let mut sigma = T::ZERO;
    for o in 0..out_dim {
        let row = &wd[o * rest..(o + 1) * rest];
        let mut acc = T::ZERO;
        for (&wx, &vx) in row.iter().zip(&v) {
            acc += wx * vx;
        }
        sigma += u[o] * acc;
    }
    drop(wd);
    drop(u);

    let sigma_eff = sigma.maximum(T::from_f64(1e-12));
    Ok((weight.scale(T::ONE / sigma_eff), sigma))
}
