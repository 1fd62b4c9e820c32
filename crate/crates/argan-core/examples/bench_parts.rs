use argan_core::nn::{self, conv2d, BatchNormState};
use argan_core::rng::Rng;
use argan_core::tensor::{backward, no_grad, Tensor};
use std::time::Instant;

fn timeit<F: FnMut()>(name: &str, iters: usize, mut f: F) {
    let t0 = Instant::now();
    for _ in 0..iters {
        f();
    }
    let dt = t0.elapsed().as_secs_f64() / iters as f64;
    println!("{name}: {:.2} ms", dt * 1000.0);
}

fn main() {
    let mut rng = Rng::new(1);
    let n = 4 * 64 * 32 * 32;
    let x = Tensor::<f32>::from_vec((0..n).map(|_| rng.normal() as f32).collect(), &[4, 64, 32, 32]).unwrap();
    let conv = nn::conv_params::<f32>(&mut rng, 64, 64, 3, 1, 1);
    let bn = BatchNormState::<f32>::new(64);

    no_grad(|| {
        timeit("conv64->64@32x32b4 fwd (no grad)", 20, || {
            let _ = conv2d(&x, &conv).unwrap();
        });
        timeit("bn fwd", 20, || {
            let _ = argan_core::nn::batchnorm2d(&x, &bn).unwrap();
        });
        timeit("lrelu fwd", 20, || {
            let _ = x.leaky_relu(0.2);
        });
        timeit("sigmoid fwd", 20, || {
            let _ = x.sigmoid();
        });
        timeit("mul fwd", 20, || {
            let _ = x.mul(&x).unwrap();
        });
    });

    // fwd+bwd through one conv block
    timeit("conv+bn+lrelu fwd+bwd", 10, || {
        let y = conv2d(&x, &conv).unwrap();
        let y = argan_core::nn::batchnorm2d(&y, &bn).unwrap();
        let y = y.leaky_relu(0.2).mean();
        backward(&y).unwrap();
        for p in [&conv.weight, &conv.bias, &bn.gamma, &bn.beta] { p.zero_grad(); }
    });

    // raw gemm speed at conv shapes
    let a = vec![1.0f32; 64 * 576];
    let b = vec![1.0f32; 576 * 1024];
    let mut c = vec![0.0f32; 64 * 1024];
    timeit("gemm 64x576x1024", 50, || {
        argan_core::threads::gemm(false, false, 64, 576, 1024, 1.0f32, &a, &b, 0.0, &mut c);
    });
    let a2 = vec![1.0f32; 256 * 1152];
    let b2 = vec![1.0f32; 1152 * 1024];
    let mut c2 = vec![0.0f32; 256 * 1024];
    timeit("gemm 256x1152x1024", 20, || {
        argan_core::threads::gemm(false, false, 256, 1152, 1024, 1.0f32, &a2, &b2, 0.0, &mut c2);
    });
}
