//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them).
//!
//! The overfit criteria (6 and 7) train a real model and take tens of
//! minutes; everything else finishes in seconds. Run the whole suite with
//!   cargo test --test acceptance -- --test-threads=1 --nocapture
//! (the training tests serialize themselves through a lock either way).

use argan_core::config::ArganConfig;
use argan_core::data::{
    binarize_mask, gen_synthetic_sample, images_to_tensor, tensor_to_images, SampleTriplet,
};
use argan_core::loss::{beta_weight, loss_adv, loss_det, loss_rem, loss_total, FeatureExtractor, LossBreakdown};
use argan_core::metrics::{ber, lab_to_rgb, rgb_to_lab, rmse_lab, Region};
use argan_core::net::{DiscriminatorNet, Generator, GeneratorArch};
use argan_core::nn::{
    self, batchnorm2d, conv2d, conv_lstm_step, deconv2d, linear, spectral_normalize,
    BatchNormState, ConvLstmState, ConvParams, Mode, SpectralState,
};
use argan_core::rng::Rng;
use argan_core::tensor::{grad_check, no_grad, Tensor};
use argan_core::train::{infer_image, train, TrainSession};
use argan_core::verify::{naive_conv2d, svd_sigma_max};
use std::sync::{Mutex, OnceLock};

/// Heavy trainings must not share the two-ish cores of a CI box.
fn train_lock() -> std::sync::MutexGuard<'static, ()> {
    static LOCK: OnceLock<Mutex<()>> = OnceLock::new();
    let lock = LOCK.get_or_init(|| Mutex::new(()));
    lock.lock().unwrap_or_else(|p| p.into_inner())
}

fn report(criterion: &str, passed: bool, detail: &str) {
    println!(
        "[acceptance] {} criterion {criterion}: {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "criterion {criterion} failed: {detail}");
}

fn randn(rng: &mut Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    Tensor::from_vec((0..n).map(|_| rng.normal()).collect(), shape).unwrap()
}

fn rand_unit(rng: &mut Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    Tensor::from_vec((0..n).map(|_| rng.next_f64()).collect(), shape).unwrap()
}

// -------------------------------------------------------------------------
// Criterion 1: gradient suite, every op, 20 seeds, <= 1e-4 relative, f64.
// -------------------------------------------------------------------------
#[test]
fn criterion_1_gradient_suite() {
    let start = std::time::Instant::now();
    let mut worst: (f64, &str) = (0.0, "none");
    let mut track = |name: &'static str, err: f64| {
        assert!(err <= 1e-4, "{name} grad err {err}");
        if err > worst.0 {
            worst = (err, name);
        }
    };
    // eps 1e-5: wide central-difference steps straddle the LeakyReLU and
    // clamp corners that batch normalization centers activations on.
    let eps = 1e-5;
    for seed in 0..20u64 {
        let mut rng = Rng::new(9000 + seed);

        // Elementwise add/sub/mul (with channel broadcast on mul).
        let a0 = randn(&mut rng, &[2, 3, 3, 3]);
        let b = randn(&mut rng, &[2, 3, 3, 3]);
        let gate = randn(&mut rng, &[2, 1, 3, 3]);
        track("elementwise", {
            grad_check(
                |t| {
                    let sum = t.add(&b)?;
                    let dif = sum.sub(&b)?;
                    Ok(dif.mul(&gate)?.mul(&b)?.mean())
                },
                &a0,
                eps,
            )
            .unwrap()
        });

        // Activations.
        let x0 = randn(&mut rng, &[3, 4]);
        track("sigmoid", grad_check(|t| Ok(t.sigmoid().mean()), &x0, eps).unwrap());
        track("tanh", grad_check(|t| Ok(t.tanh().mean()), &x0, eps).unwrap());
        track(
            "leaky_relu",
            grad_check(|t| Ok(t.leaky_relu(0.2).mul(t)?.mean()), &x0, eps).unwrap(),
        );

        // Matmul and reductions.
        let m0 = randn(&mut rng, &[4, 5]);
        let mb = randn(&mut rng, &[5, 3]);
        track(
            "matmul",
            grad_check(|t| Ok(t.matmul(&mb)?.tanh().mean()), &m0, eps).unwrap(),
        );
        track("sum", grad_check(|t| Ok(t.mul(t)?.sum()), &x0, eps).unwrap());
        track("mean", grad_check(|t| Ok(t.mul(t)?.mean()), &x0, eps).unwrap());

        // conv2d (input, weight, bias routes).
        let ximg = randn(&mut rng, &[1, 2, 6, 6]);
        let conv = nn::conv_params::<f64>(&mut rng, 3, 2, 3, 2, 1);
        track(
            "conv2d",
            grad_check(|t| Ok(conv2d(t, &conv)?.sigmoid().mean()), &ximg, eps).unwrap(),
        );
        let w0 = randn(&mut rng, &[3, 2, 3, 3]);
        let cbias = Tensor::from_vec(vec![0.1, -0.2, 0.3], &[3]).unwrap();
        track("conv2d_w", {
            grad_check(
                |wt| {
                    let p = ConvParams {
                        weight: wt.clone(),
                        bias: cbias.clone(),
                        stride: 1,
                        padding: 1,
                    };
                    Ok(conv2d(&ximg, &p)?.tanh().mean())
                },
                &w0,
                eps,
            )
            .unwrap()
        });

        // deconv2d.
        let xd = randn(&mut rng, &[1, 2, 3, 3]);
        let dec = nn::deconv_params::<f64>(&mut rng, 2, 2, 4, 2, 1);
        track(
            "deconv2d",
            grad_check(|t| Ok(deconv2d(t, &dec)?.sigmoid().mean()), &xd, eps).unwrap(),
        );

        // batchnorm (train mode).
        let bn = BatchNormState::<f64>::new(2);
        let xb = randn(&mut rng, &[2, 2, 3, 3]);
        track(
            "batchnorm",
            grad_check(|t| Ok(batchnorm2d(t, &bn)?.sigmoid().mean()), &xb, eps).unwrap(),
        );

        // ConvLSTM step (chained twice).
        let lstm = nn::lstm_params::<f64>(&mut rng, 2, 3);
        let xl = randn(&mut rng, &[1, 2, 4, 4]);
        track("conv_lstm", {
            grad_check(
                |t| {
                    let st = ConvLstmState::zeros(1, 3, 4, 4);
                    let (_, st) = conv_lstm_step(t, &st, &lstm)?;
                    let (h2, _) = conv_lstm_step(t, &st, &lstm)?;
                    Ok(h2.mean())
                },
                &xl,
                eps,
            )
            .unwrap()
        });

        // linear.
        let lx = randn(&mut rng, &[3, 4]);
        let lw = randn(&mut rng, &[2, 4]);
        let lb = Tensor::from_vec(vec![0.1, -0.3], &[2]).unwrap();
        track(
            "linear",
            grad_check(|t| Ok(linear(t, &lw, &lb)?.sigmoid().mean()), &lx, eps).unwrap(),
        );

        // Losses: detection, removal (both terms), adversarial d and g.
        let matte = rand_unit(&mut rng, &[1, 1, 4, 4]);
        let att0 = rand_unit(&mut rng, &[1, 1, 4, 4]);
        track(
            "loss_det",
            grad_check(
                |t| loss_det(&[t.clone(), t.sigmoid()], &matte),
                &att0,
                eps,
            )
            .unwrap(),
        );
        let fx = FeatureExtractor::<f64>::from_seed(5);
        let free = rand_unit(&mut rng, &[1, 3, 8, 8]);
        let out0 = rand_unit(&mut rng, &[1, 3, 8, 8]);
        track("loss_rem", {
            grad_check(
                |t| {
                    let (mse, per) = loss_rem(&[t.clone()], &free, &fx)?;
                    mse.add(&per)
                },
                &out0,
                eps,
            )
            .unwrap()
        });
        let probs = |rng: &mut Rng| {
            Tensor::from_vec((0..4).map(|_| rng.uniform(0.15, 0.85)).collect(), &[4, 1]).unwrap()
        };
        let d_fake = probs(&mut rng);
        let d_real0 = probs(&mut rng);
        let d_unsup = probs(&mut rng);
        track("loss_adv_d", {
            grad_check(
                |t| Ok(loss_adv(t, &d_fake, Some(&d_unsup), 0.7)?.0),
                &d_real0,
                eps,
            )
            .unwrap()
        });
        track("loss_adv_g", {
            grad_check(
                |t| Ok(loss_adv(&d_real0, t, Some(&d_unsup), 0.7)?.1),
                &d_fake,
                eps,
            )
            .unwrap()
        });
    }
    let elapsed = start.elapsed();
    report(
        "1 (gradient suite)",
        elapsed.as_secs() < 120,
        &format!(
            "all ops <= 1e-4 over 20 seeds (worst {:.2e} in {}), runtime {:.1} s (budget 120 s)",
            worst.0,
            worst.1,
            elapsed.as_secs_f64()
        ),
    );
}

// -------------------------------------------------------------------------
// Criterion 2: oracle equivalences.
// -------------------------------------------------------------------------
#[test]
fn criterion_2_oracle_equivalence() {
    // conv2d vs the quadruple loop on every kernel/stride/pad combination.
    let mut worst_conv = 0.0f64;
    for seed in 0..10u64 {
        for k in [3usize, 4] {
            for s in [1usize, 2] {
                for p in [0usize, 1] {
                    let mut rng = Rng::new(7100 + seed);
                    let (b, c, h, w, oc) = (2, 3, 8, 8, 4);
                    let x: Vec<f64> = (0..b * c * h * w).map(|_| rng.normal()).collect();
                    let wt: Vec<f64> = (0..oc * c * k * k).map(|_| rng.normal()).collect();
                    let bias: Vec<f64> = (0..oc).map(|_| rng.normal()).collect();
                    let want = naive_conv2d(&x, b, c, h, w, &wt, oc, k, s, p, &bias);
                    let params = ConvParams {
                        weight: Tensor::from_vec(wt, &[oc, c, k, k]).unwrap(),
                        bias: Tensor::from_vec(bias, &[oc]).unwrap(),
                        stride: s,
                        padding: p,
                    };
                    let xt = Tensor::from_vec(x, &[b, c, h, w]).unwrap();
                    let got = no_grad(|| conv2d(&xt, &params).unwrap());
                    for (a, bv) in got.to_vec().iter().zip(&want) {
                        worst_conv = worst_conv.max((a - bv).abs());
                    }
                }
            }
        }
    }
    assert!(worst_conv <= 1e-12, "conv vs naive: {worst_conv}");

    // Adjoint identity for the shared-weight deconv.
    let mut worst_adj = 0.0f64;
    for (k, s, p) in [(3usize, 1usize, 1usize), (4, 2, 1), (4, 2, 0), (3, 2, 1)] {
        for seed in 0..10u64 {
            let mut rng = Rng::new(7300 + seed);
            let (c, oc, oh, ow) = (3usize, 4usize, 4usize, 4usize);
            let h = (oh - 1) * s + k - 2 * p;
            let w = (ow - 1) * s + k - 2 * p;
            let weight = randn(&mut rng, &[oc, c, k, k]);
            let conv = ConvParams {
                weight: weight.clone(),
                bias: Tensor::from_vec(vec![0.0; oc], &[oc]).unwrap(),
                stride: s,
                padding: p,
            };
            let dec = ConvParams {
                weight,
                bias: Tensor::from_vec(vec![0.0; c], &[c]).unwrap(),
                stride: s,
                padding: p,
            };
            let x = randn(&mut rng, &[1, c, h, w]);
            let y = randn(&mut rng, &[1, oc, oh, ow]);
            let (lhs, rhs) = no_grad(|| {
                let cx = conv2d(&x, &conv).unwrap();
                let dy = deconv2d(&y, &dec).unwrap();
                let lhs: f64 = cx.data().iter().zip(y.data().iter()).map(|(a, b)| a * b).sum();
                let rhs: f64 = dy.data().iter().zip(x.data().iter()).map(|(a, b)| a * b).sum();
                (lhs, rhs)
            });
            worst_adj = worst_adj.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-12));
        }
    }
    assert!(worst_adj <= 1e-10, "adjoint identity: {worst_adj}");

    // Spectral sigma vs the Jacobi SVD oracle on 64x64 random matrices.
    let mut worst_sn = 0.0f64;
    for seed in 0..5u64 {
        let mut rng = Rng::new(7500 + seed);
        let n = 64;
        let data: Vec<f64> = (0..n * n).map(|_| rng.normal()).collect();
        let sigma_ref = svd_sigma_max(&data, n, n);
        let w = Tensor::from_vec(data, &[n, n]).unwrap();
        let st = SpectralState::<f64>::new(n, 500, &mut rng);
        let (_, sigma) = spectral_normalize(&w, &st).unwrap();
        worst_sn = worst_sn.max((sigma - sigma_ref).abs());
    }
    assert!(worst_sn <= 1e-6, "spectral vs SVD: {worst_sn}");

    report(
        "2 (oracle equivalence)",
        true,
        &format!(
            "conv-naive {worst_conv:.2e} (<=1e-12), adjoint {worst_adj:.2e} (<=1e-10), spectral {worst_sn:.2e} (<=1e-6)"
        ),
    );
}

// -------------------------------------------------------------------------
// Criterion 3: loss algebra.
// -------------------------------------------------------------------------
#[test]
fn criterion_3_loss_algebra() {
    // Beta weights match an independently computed power exactly.
    for n in 1..=6usize {
        for i in 1..=n {
            let mut want = 1.0f64;
            for _ in 0..(n - i + 1) {
                want *= 0.7;
            }
            assert_eq!(beta_weight(i, n).unwrap().to_bits(), want.to_bits());
        }
    }

    // lambda = 1 semi-supervised == supervised, bitwise, on random inputs.
    let mut rng = Rng::new(7700);
    for _ in 0..20 {
        let p = |rng: &mut Rng| {
            Tensor::from_vec(
                (0..4).map(|_| rng.uniform(0.05, 0.95)).collect::<Vec<f64>>(),
                &[4, 1],
            )
            .unwrap()
        };
        let (real, fake, unsup) = (p(&mut rng), p(&mut rng), p(&mut rng));
        let (d_semi, g_semi) = loss_adv(&real, &fake, Some(&unsup), 1.0).unwrap();
        let (d_sup, g_sup) = loss_adv(&real, &fake, None, 0.7).unwrap();
        assert_eq!(d_semi.item().to_bits(), d_sup.item().to_bits());
        assert_eq!(g_semi.item().to_bits(), g_sup.item().to_bits());
    }

    // loss_total equals the component sum.
    let mk = |v: f64| Tensor::from_vec(vec![v], &[1]).unwrap();
    let parts = LossBreakdown {
        l_det: mk(0.125),
        l_rem_mse: mk(0.5),
        l_rem_per: mk(0.25),
        l_adv_g: mk(1.0),
        l_adv_d: mk(7.0),
    };
    let total = loss_total(&parts).unwrap().item();
    assert_eq!(total.to_bits(), (((0.125f64 + 0.5) + 0.25) + 1.0).to_bits());

    report(
        "3 (loss algebra)",
        true,
        "beta = 0.7^(N-i+1) exact; lambda=1 reduction bitwise; total = component sum",
    );
}

// -------------------------------------------------------------------------
// Criterion 4: structural invariants of the generator.
// -------------------------------------------------------------------------
#[test]
fn criterion_4_structural_invariants() {
    for seed in 0..5u64 {
        let mut rng = Rng::new(7900 + seed);
        let arch = GeneratorArch {
            n_steps: 3,
            share_weights: true,
            detector_width: 4,
            depth: 2,
            base_channels: 4,
            channel_cap: 8,
        };
        let gen = Generator::<f32>::new(&mut rng, arch);
        gen.set_mode(Mode::Eval);
        let n = 2 * 3 * 64;
        let img = Tensor::from_vec(
            (0..n).map(|_| rng.next_f64() as f32).collect(),
            &[2, 3, 8, 8],
        )
        .unwrap();
        let states = gen.forward(&img).unwrap();
        let mut prev = img.to_vec();
        for st in &states {
            assert_eq!(st.attention.shape(), &[2, 1, 8, 8]);
            assert_eq!(st.output.shape(), &[2, 3, 8, 8]);
            assert!(st.attention.to_vec().iter().all(|&v| (0.0..=1.0).contains(&v)));
            let cur = st.output.to_vec();
            assert!(cur.iter().all(|&v| (0.0..=1.0).contains(&v)));
            for (c, p) in cur.iter().zip(&prev) {
                assert!(c >= p, "monotone lightening violated");
            }
            prev = cur;
        }
        // Prefix property: the first step of N=3 equals N=1 bitwise.
        let one = gen.forward_steps(&img, 1).unwrap();
        let a3: Vec<u32> = states[0].attention.to_vec().iter().map(|v| v.to_bits()).collect();
        let a1: Vec<u32> = one[0].attention.to_vec().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a3, a1);
        let o3: Vec<u32> = states[0].output.to_vec().iter().map(|v| v.to_bits()).collect();
        let o1: Vec<u32> = one[0].output.to_vec().iter().map(|v| v.to_bits()).collect();
        assert_eq!(o3, o1);
    }
    report(
        "4 (structural invariants)",
        true,
        "A_i, O_i in [0,1]; O monotone; shapes preserved; N=1 prefix bitwise",
    );
}

// -------------------------------------------------------------------------
// Criterion 5: metric fidelity.
// -------------------------------------------------------------------------
#[test]
fn criterion_5_metric_fidelity() {
    use argan_core::data::Image;
    // BER unit cases: 0, 50, 25.
    let gt = Image::new_gray(2, 2, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
    assert_eq!(ber(&gt, &gt).unwrap(), 0.0);
    let all = Image::new_gray(2, 2, vec![1.0; 4]).unwrap();
    assert_eq!(ber(&all, &gt).unwrap(), 50.0);
    let part = Image::new_gray(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    assert_eq!(ber(&part, &gt).unwrap(), 25.0);

    // LAB anchor points.
    let (l, a, b) = rgb_to_lab(1.0, 1.0, 1.0);
    assert!((l - 100.0).abs() <= 1e-2 && a.abs() <= 1e-2 && b.abs() <= 1e-2);
    let (l, a, b) = rgb_to_lab(0.0, 0.0, 0.0);
    assert!(l.abs() <= 1e-6 && a.abs() <= 1e-6 && b.abs() <= 1e-6);
    let v = 119.0 / 255.0;
    let (l, a, b) = rgb_to_lab(v, v, v);
    assert!((l - 50.0).abs() <= 0.2 && a.abs() <= 1e-3 && b.abs() <= 1e-3);
    // Consistency of the inverse pipeline used to build fixtures.
    let (r2, g2, b2) = lab_to_rgb(l, a, b);
    assert!((r2 - v).abs() <= 0.5 / 255.0 && (g2 - v).abs() <= 0.5 / 255.0 && (b2 - v).abs() <= 0.5 / 255.0);

    // Regional partition identity on 50 random pairs.
    let mut rng = Rng::new(8100);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = 64;
        let pred = Image::new_rgb(8, 8, (0..n * 3).map(|_| rng.next_f64() as f32).collect()).unwrap();
        let gtp = Image::new_rgb(8, 8, (0..n * 3).map(|_| rng.next_f64() as f32).collect()).unwrap();
        let mut mask_px: Vec<f32> = (0..n).map(|_| rng.below(2) as f32).collect();
        mask_px[0] = 1.0;
        mask_px[1] = 0.0;
        let mask = Image::new_gray(8, 8, mask_px.clone()).unwrap();
        let np = mask_px.iter().filter(|&&v| v >= 0.5).count() as f64;
        let nn = n as f64 - np;
        let s = rmse_lab(&pred, &gtp, Some(&mask), Region::Shadow).unwrap();
        let ns = rmse_lab(&pred, &gtp, Some(&mask), Region::NonShadow).unwrap();
        let all = rmse_lab(&pred, &gtp, Some(&mask), Region::All).unwrap();
        let lhs = np * s * s + nn * ns * ns;
        let rhs = (np + nn) * all * all;
        worst = worst.max((lhs - rhs).abs() / rhs.max(1.0));
    }
    assert!(worst <= 1e-9, "partition identity worst {worst}");

    report(
        "5 (metric fidelity)",
        true,
        &format!("BER 0/50/25 exact; LAB anchors in tolerance; partition identity {worst:.2e} (<=1e-9)"),
    );
}

// -------------------------------------------------------------------------
// Criteria 6 and 7: overfit smoke and the N-trend, sharing one N=3 run.
// -------------------------------------------------------------------------

struct OverfitOutcome {
    l_det_10: f64,
    l_rem_10: f64,
    l_det_final: f64,
    l_rem_final: f64,
    ber_mean: f64,
    rmse_model: f64,
    rmse_identity: f64,
    runtime_s: f64,
    iterations: usize,
}

fn overfit_dataset() -> Vec<SampleTriplet> {
    (0..8u64).map(|i| gen_synthetic_sample(i, 32).unwrap()).collect()
}

fn eval_training_set(session: &TrainSession, data: &[SampleTriplet]) -> (f64, f64, f64) {
    let mut ber_sum = 0.0;
    let mut rmse_model = 0.0;
    let mut rmse_ident = 0.0;
    for t in data {
        let (atts, outs) = infer_image(session, &t.shadow).unwrap();
        let matte = t.matte.as_ref().unwrap();
        let free = t.free.as_ref().unwrap();
        let gt_mask = binarize_mask(matte, 0.1).unwrap();
        let pred_mask = binarize_mask(atts.last().unwrap(), 0.5).unwrap();
        ber_sum += ber(&pred_mask, &gt_mask).unwrap();
        rmse_model += rmse_lab(outs.last().unwrap(), free, Some(&gt_mask), Region::Shadow).unwrap();
        rmse_ident += rmse_lab(&t.shadow, free, Some(&gt_mask), Region::Shadow).unwrap();
    }
    let n = data.len() as f64;
    (ber_sum / n, rmse_model / n, rmse_ident / n)
}

fn run_overfit(n_steps: usize, iterations: usize) -> OverfitOutcome {
    let data = overfit_dataset();
    let cfg = ArganConfig {
        n: n_steps,
        iterations,
        ..ArganConfig::default()
    };
    let mut session = TrainSession::new(cfg).unwrap();
    let start = std::time::Instant::now();
    let rows = train(&mut session, &data, None, None).unwrap();
    let runtime_s = start.elapsed().as_secs_f64();
    let (ber_mean, rmse_model, rmse_identity) = eval_training_set(&session, &data);
    OverfitOutcome {
        l_det_10: rows[9].l_det,
        l_rem_10: rows[9].l_rem_mse,
        l_det_final: rows.last().unwrap().l_det,
        l_rem_final: rows.last().unwrap().l_rem_mse,
        ber_mean,
        rmse_model,
        rmse_identity,
        runtime_s,
        iterations,
    }
}

fn overfit_iterations() -> usize {
    // >= 2000 per the criterion; overridable for slower or faster hosts.
    std::env::var("ARGAN_ACCEPT_ITERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n >= 2000)
        .unwrap_or(OVERFIT_ITERS_DEFAULT)
}

const OVERFIT_ITERS_DEFAULT: usize = 2000;

fn n3_outcome() -> &'static OverfitOutcome {
    static OUTCOME: OnceLock<OverfitOutcome> = OnceLock::new();
    OUTCOME.get_or_init(|| run_overfit(3, overfit_iterations()))
}

#[test]
fn criterion_6_overfit_smoke() {
    let _guard = train_lock();
    let o = n3_outcome();

    let det_ratio = o.l_det_final / o.l_det_10;
    let rem_ratio = o.l_rem_final / o.l_rem_10;
    let rmse_gain = 1.0 - o.rmse_model / o.rmse_identity;
    println!(
        "[acceptance]   overfit detail: iters {}, l_det {:.4}->{:.4} ({:.1}%), l_rem_mse {:.4}->{:.4} ({:.1}%), BER {:.2}, rmseS {:.2} vs identity {:.2} ({:.1}% better), runtime {:.1} min",
        o.iterations,
        o.l_det_10,
        o.l_det_final,
        det_ratio * 100.0,
        o.l_rem_10,
        o.l_rem_final,
        rem_ratio * 100.0,
        o.ber_mean,
        o.rmse_model,
        o.rmse_identity,
        rmse_gain * 100.0,
        o.runtime_s / 60.0
    );

    let losses_ok = det_ratio <= 0.10 && rem_ratio <= 0.10;
    let rmse_ok = rmse_gain >= 0.30;
    let ber_ok = o.ber_mean <= 20.0;
    // The 20-minute budget is stated for a 4-core machine; on smaller hosts
    // the wall time is reported but cannot bind.
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let runtime_ok = o.runtime_s <= 1200.0 || cores < 4;
    report(
        "6 (overfit smoke)",
        losses_ok && rmse_ok && ber_ok && runtime_ok,
        &format!(
            "l_det {:.1}% / l_rem_mse {:.1}% of iter-10 (<=10%); shadow RMSE {:.1}% better than identity (>=30%); BER {:.2} (<=20); {:.1} min on {cores} core(s)",
            det_ratio * 100.0,
            rem_ratio * 100.0,
            rmse_gain * 100.0,
            o.ber_mean,
            o.runtime_s / 60.0
        ),
    );
}

#[test]
fn criterion_7_n_trend() {
    let _guard = train_lock();
    let three = n3_outcome();
    let one = run_overfit(1, three.iterations);
    let passed = three.rmse_model <= one.rmse_model;
    report(
        "7 (N-trend)",
        passed,
        &format!(
            "training-set shadow RMSE: N=3 {:.3} <= N=1 {:.3} (same seeds, {} iterations)",
            three.rmse_model, one.rmse_model, three.iterations
        ),
    );
}

// -------------------------------------------------------------------------
// Criterion 8: determinism and persistence.
// -------------------------------------------------------------------------
#[test]
fn criterion_8_determinism_and_persistence() {
    let _guard = train_lock();
    let data: Vec<SampleTriplet> = (0..4u64).map(|i| gen_synthetic_sample(i, 32).unwrap()).collect();
    let run = |dir: &std::path::Path| {
        let cfg = ArganConfig {
            iterations: 3,
            seed: 99,
            ..ArganConfig::default()
        };
        let mut session = TrainSession::new(cfg).unwrap();
        let ckpt = dir.join("model.ckpt");
        let rows = train(&mut session, &data, None, Some(&ckpt)).unwrap();
        std::fs::write(dir.join("log.csv"), argan_core::train::format_log(&rows)).unwrap();
        session
    };
    let base = std::env::temp_dir().join(format!("argan-accept-{}", std::process::id()));
    let (d1, d2) = (base.join("r1"), base.join("r2"));
    std::fs::create_dir_all(&d1).unwrap();
    std::fs::create_dir_all(&d2).unwrap();
    let s1 = run(&d1);
    let _s2 = run(&d2);
    let log1 = std::fs::read(d1.join("log.csv")).unwrap();
    let log2 = std::fs::read(d2.join("log.csv")).unwrap();
    assert_eq!(log1, log2, "training logs must be byte-identical");
    let ck1 = std::fs::read(d1.join("model.ckpt")).unwrap();
    let ck2 = std::fs::read(d2.join("model.ckpt")).unwrap();
    assert_eq!(ck1, ck2, "checkpoints must be byte-identical");

    // Checkpoint round trip preserves inference bitwise.
    let (a_before, o_before) = infer_image(&s1, &data[0].shadow).unwrap();
    let restored = TrainSession::load(&d1.join("model.ckpt")).unwrap();
    let (a_after, o_after) = infer_image(&restored, &data[0].shadow).unwrap();
    for (x, y) in a_before.iter().zip(&a_after).chain(o_before.iter().zip(&o_after)) {
        let bx: Vec<u32> = x.pixels.iter().map(|v| v.to_bits()).collect();
        let by: Vec<u32> = y.pixels.iter().map(|v| v.to_bits()).collect();
        assert_eq!(bx, by, "inference differs after checkpoint round trip");
    }
    // save -> load -> save byte stability.
    restored.save(&d2.join("resaved.ckpt")).unwrap();
    let resaved = std::fs::read(d2.join("resaved.ckpt")).unwrap();
    assert_eq!(ck1, resaved);

    std::fs::remove_dir_all(&base).unwrap();
    report(
        "8 (determinism and persistence)",
        true,
        "identical seeds give byte-identical logs and checkpoints; save/load/infer bitwise stable",
    );
}
