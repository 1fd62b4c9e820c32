//! Independent reference implementations used to cross-check the fast
//! kernels, plus the self-check battery behind the `selfcheck` CLI command.
//!
//! Nothing here shares code with the im2col/gemm path: the convolution is a
//! literal quadruple loop and the singular value comes from a Jacobi
//! eigensolver, so agreement is meaningful evidence.

use crate::error::Result;

/// Quadruple-loop cross-correlation oracle, [B,C,H,W] x [O,C,k,k] -> NCHW.
#[allow(clippy::too_many_arguments)]
pub fn naive_conv2d(
    x: &[f64],
    b: usize,
    c: usize,
    h: usize,
    w: usize,
    weight: &[f64],
    oc: usize,
    k: usize,
    stride: usize,
    pad: usize,
    bias: &[f64],
) -> Vec<f64> {
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let mut out = vec![0.0; b * oc * oh * ow];
    for bi in 0..b {
        for o in 0..oc {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias[o];
                    for ci in 0..c {
                        for ki in 0..k {
                            let iy = (oy * stride + ki) as isize - pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kj in 0..k {
                                let ix = (ox * stride + kj) as isize - pad as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                acc += x[((bi * c + ci) * h + iy as usize) * w + ix as usize]
                                    * weight[((o * c + ci) * k + ki) * k + kj];
                            }
                        }
                    }
                    out[((bi * oc + o) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    out
}

/// Largest singular value of a rows x cols matrix via a cyclic Jacobi
/// eigensolver on the Gram matrix (brute force, independent of power
/// iteration).
pub fn svd_sigma_max(matrix: &[f64], rows: usize, cols: usize) -> f64 {
    // Work on the smaller Gram matrix.
    let n = rows.min(cols);
    let mut g = vec![0.0f64; n * n];
    if cols <= rows {
        // G = MᵀM
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for r in 0..rows {
                    acc += matrix[r * cols + i] * matrix[r * cols + j];
                }
                g[i * n + j] = acc;
            }
        }
    } else {
        // G = MMᵀ
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for cidx in 0..cols {
                    acc += matrix[i * cols + cidx] * matrix[j * cols + cidx];
                }
                g[i * n + j] = acc;
            }
        }
    }

    // Cyclic Jacobi sweeps until the off-diagonal mass is negligible.
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += g[p * n + q] * g[p * n + q];
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = g[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = g[p * n + p];
                let aqq = g[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cos = 1.0 / (t * t + 1.0).sqrt();
                let sin = t * cos;
                for i in 0..n {
                    let gip = g[i * n + p];
                    let giq = g[i * n + q];
                    g[i * n + p] = cos * gip - sin * giq;
                    g[i * n + q] = sin * gip + cos * giq;
                }
                for i in 0..n {
                    let gpi = g[p * n + i];
                    let gqi = g[q * n + i];
                    g[p * n + i] = cos * gpi - sin * gqi;
                    g[q * n + i] = sin * gpi + cos * gqi;
                }
            }
        }
    }
    let mut lambda_max = 0.0f64;
    for i in 0..n {
        lambda_max = lambda_max.max(g[i * n + i]);
    }
    lambda_max.max(0.0).sqrt()
}

/// One self-check outcome: name, pass flag, and a short detail string.
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail,
    }
}

/// The oracle battery behind `argan selfcheck`: gradient checks, conv vs
/// naive loop, the deconv adjoint identity, spectral norm vs SVD, and the
/// LAB gray-level round trip. `inject_fault` adds a deliberately corrupted
/// backward rule that must be caught (harness sensitivity probe).
pub fn run_selfcheck_default() -> Result<Vec<CheckOutcome>> {
    run_selfcheck(false)
}

pub fn run_selfcheck(inject_fault: bool) -> Result<Vec<CheckOutcome>> {
    use crate::nn::{self, conv2d, deconv2d, spectral_normalize, SpectralState};
    use crate::rng::Rng;
    use crate::tensor::{grad_check, no_grad, Tensor};

    let mut out = Vec::new();
    let mut rng = Rng::new(0xa5e1f);

    // Gradient checks over every differentiable op family, small f64 cases.
    {
        let randn =
            |rng: &mut Rng, shape: &[usize]| -> Tensor<f64> {
                let n: usize = shape.iter().product();
                Tensor::from_vec((0..n).map(|_| rng.normal()).collect(), shape).unwrap()
            };
        let x = randn(&mut rng, &[2, 3, 4, 4]);
        let gate = randn(&mut rng, &[2, 1, 4, 4]);
        let err_elem = grad_check(|t| Ok(t.mul(&gate)?.sigmoid().mean()), &x, 1e-4)?;
        out.push(check(
            "grad elementwise/activation",
            err_elem <= 1e-4,
            format!("max rel err {err_elem:.2e}"),
        ));

        let a = randn(&mut rng, &[4, 5]);
        let b = randn(&mut rng, &[5, 3]);
        let err_mm = grad_check(|t| Ok(t.matmul(&b)?.tanh().mean()), &a, 1e-4)?;
        out.push(check(
            "grad matmul/reduce",
            err_mm <= 1e-4,
            format!("max rel err {err_mm:.2e}"),
        ));

        let xin = randn(&mut rng, &[1, 2, 6, 6]);
        let conv = nn::conv_params::<f64>(&mut rng, 3, 2, 3, 1, 1);
        let bn = nn::BatchNormState::<f64>::new(3);
        let err_conv = grad_check(
            |t| {
                let y = conv2d(t, &conv)?;
                let y = nn::batchnorm2d(&y, &bn)?;
                Ok(y.leaky_relu(0.2).mean())
            },
            &xin,
            1e-4,
        )?;
        out.push(check(
            "grad conv+bn+lrelu",
            err_conv <= 1e-4,
            format!("max rel err {err_conv:.2e}"),
        ));

        let xd = randn(&mut rng, &[1, 2, 3, 3]);
        let dec = nn::deconv_params::<f64>(&mut rng, 2, 2, 4, 2, 1);
        let err_dec = grad_check(|t| Ok(deconv2d(t, &dec)?.sigmoid().mean()), &xd, 1e-4)?;
        out.push(check(
            "grad deconv",
            err_dec <= 1e-4,
            format!("max rel err {err_dec:.2e}"),
        ));

        let lstm = nn::lstm_params::<f64>(&mut rng, 2, 3);
        let xl = randn(&mut rng, &[1, 2, 4, 4]);
        let err_lstm = grad_check(
            |t| {
                // Two chained steps so gradients flow through the carried state.
                let st = nn::ConvLstmState::zeros(1, 3, 4, 4);
                let (_, st) = nn::conv_lstm_step(t, &st, &lstm)?;
                let (h2, _) = nn::conv_lstm_step(t, &st, &lstm)?;
                Ok(h2.mean())
            },
            &xl,
            1e-4,
        )?;
        out.push(check(
            "grad conv-lstm",
            err_lstm <= 1e-4,
            format!("max rel err {err_lstm:.2e}"),
        ));

        if inject_fault {
            let bad = |x: &Tensor<f64>| -> Tensor<f64> {
                let data: Vec<f64> = x.data().iter().map(|v| v.tanh()).collect();
                let shape = x.shape().to_vec();
                let y = data.clone();
                Tensor::from_op(
                    data,
                    &shape,
                    vec![x.clone()],
                    Box::new(move |up, needs| {
                        if !needs[0] {
                            return vec![None];
                        }
                        vec![Some(
                            up.iter()
                                .zip(&y)
                                .map(|(g, t)| g * (1.0 - t * t) + 0.05)
                                .collect(),
                        )]
                    }),
                )
            };
            let xf = randn(&mut rng, &[4]);
            let err_fault = grad_check(|t| Ok(bad(t).mean()), &xf, 1e-4)?;
            out.push(check(
                "fault injection caught",
                err_fault >= 1e-2,
                format!("max rel err {err_fault:.2e} (must be >= 1e-2)"),
            ));
        }
    }

    // conv2d against the quadruple loop.
    {
        let (b, c, h, w, oc, k, s, p) = (2, 3, 8, 8, 4, 4, 2, 1);
        let x: Vec<f64> = (0..b * c * h * w).map(|_| rng.normal()).collect();
        let wt: Vec<f64> = (0..oc * c * k * k).map(|_| rng.normal()).collect();
        let bias: Vec<f64> = (0..oc).map(|_| rng.normal()).collect();
        let want = naive_conv2d(&x, b, c, h, w, &wt, oc, k, s, p, &bias);
        let got = no_grad(|| -> Result<Vec<f64>> {
            let xt = Tensor::from_vec(x.clone(), &[b, c, h, w])?;
            let params = nn::ConvParams {
                weight: Tensor::from_vec(wt.clone(), &[oc, c, k, k])?,
                bias: Tensor::from_vec(bias.clone(), &[oc])?,
                stride: s,
                padding: p,
            };
            Ok(conv2d(&xt, &params)?.to_vec())
        })?;
        let max_abs = got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        out.push(check(
            "conv2d vs naive loop",
            max_abs <= 1e-12,
            format!("max abs diff {max_abs:.2e}"),
        ));
    }

    // Adjoint identity <conv(x), y> == <x, deconv(y)>.
    {
        let (c, h, w, oc, k, s, p) = (3, 8, 8, 4, 4, 2, 1);
        let oh = (h + 2 * p - k) / s + 1;
        let x: Vec<f64> = (0..c * h * w).map(|_| rng.normal()).collect();
        let y: Vec<f64> = (0..oc * oh * oh).map(|_| rng.normal()).collect();
        let wt: Vec<f64> = (0..oc * c * k * k).map(|_| rng.normal()).collect();
        let (lhs, rhs) = no_grad(|| -> Result<(f64, f64)> {
            let zero_oc = Tensor::from_vec(vec![0.0; oc], &[oc])?;
            let zero_c = Tensor::from_vec(vec![0.0; c], &[c])?;
            let weight = Tensor::from_vec(wt.clone(), &[oc, c, k, k])?;
            let conv = nn::ConvParams {
                weight: weight.clone(),
                bias: zero_oc,
                stride: s,
                padding: p,
            };
            let dec = nn::ConvParams {
                weight,
                bias: zero_c,
                stride: s,
                padding: p,
            };
            let xt = Tensor::from_vec(x.clone(), &[1, c, h, w])?;
            let yt = Tensor::from_vec(y.clone(), &[1, oc, oh, oh])?;
            let cx = conv2d(&xt, &conv)?;
            let dy = deconv2d(&yt, &dec)?;
            let lhs: f64 = cx.data().iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = dy.data().iter().zip(&x).map(|(a, b)| a * b).sum();
            Ok((lhs, rhs))
        })?;
        let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-12);
        out.push(check(
            "deconv adjoint identity",
            rel <= 1e-10,
            format!("rel diff {rel:.2e}"),
        ));
    }

    // Spectral normalization against the Jacobi SVD oracle.
    {
        let n = 16;
        let wt: Vec<f64> = (0..n * n).map(|_| rng.normal()).collect();
        let sigma_ref = svd_sigma_max(&wt, n, n);
        let weight = Tensor::from_vec(wt, &[n, n])?;
        let state = SpectralState::<f64>::new(n, 200, &mut rng);
        let (_, sigma) = spectral_normalize(&weight, &state)?;
        let diff = (sigma - sigma_ref).abs();
        out.push(check(
            "spectral norm vs SVD",
            diff <= 1e-6,
            format!("sigma {sigma:.6} vs oracle {sigma_ref:.6}"),
        ));
    }

    // LAB round trip over every 8-bit gray level.
    {
        let mut worst = 0.0f64;
        for g in 0..=255u8 {
            let v = g as f64 / 255.0;
            let (l, a, bb) = crate::metrics::rgb_to_lab(v, v, v);
            let (r2, g2, b2) = crate::metrics::lab_to_rgb(l, a, bb);
            for c in [r2, g2, b2] {
                worst = worst.max((c - v).abs());
            }
        }
        out.push(check(
            "lab gray round trip",
            worst <= 0.5 / 255.0,
            format!("max abs err {worst:.2e}"),
        ));
    }

    Ok(out)
}
