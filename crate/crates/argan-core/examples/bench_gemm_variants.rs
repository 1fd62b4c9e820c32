use argan_core::threads::gemm_single;
use std::time::Instant;

fn bench(name: &str, f: impl Fn()) {
    let t0 = Instant::now();
    let reps = 30;
    for _ in 0..reps {
        f();
    }
    let dt = t0.elapsed().as_secs_f64() / reps as f64;
    println!("{name}: {:.2} ms", dt * 1e3);
}

fn main() {
    // fwd: out[64,1024] = W[64,576] x col[576,1024]
    let w = vec![1.0f32; 64 * 576];
    let col = vec![1.0f32; 576 * 1024];
    let mut out = vec![0.0f32; 64 * 1024];
    bench("fwd nn 64x576x1024", || {
        gemm_single(false, false, 64, 576, 1024, 1.0, &w, &col, 0.0, &mut out.clone());
    });
    // dX: dcol[576,1024] = Wt[576,64] x up[64,1024]  (trans_a on stored [64,576])
    let up = vec![1.0f32; 64 * 1024];
    let mut dcol = vec![0.0f32; 576 * 1024];
    bench("dX tn 576x64x1024 ", || {
        gemm_single(true, false, 576, 64, 1024, 1.0, &w, &up, 0.0, &mut dcol.clone());
    });
    // dW: dw[64,576] = up[64,1024] x colT[1024,576] (trans_b on stored [576,1024])
    let mut dw = vec![0.0f32; 64 * 576];
    bench("dW nt 64x1024x576 ", || {
        gemm_single(false, true, 64, 1024, 576, 1.0, &up, &col, 0.0, &mut dw.clone());
    });
    // lstm-scale variants
    let w2 = vec![1.0f32; 256 * 1152];
    let col2 = vec![1.0f32; 1152 * 1024];
    let up2 = vec![1.0f32; 256 * 1024];
    bench("lstm fwd nn 256x1152x1024", || {
        gemm_single(false, false, 256, 1152, 1024, 1.0, &w2, &col2, 0.0, &mut vec![0.0f32; 256 * 1024]);
    });
    bench("lstm dX tn 1152x256x1024", || {
        gemm_single(true, false, 1152, 256, 1024, 1.0, &w2, &up2, 0.0, &mut vec![0.0f32; 1152 * 1024]);
    });
    bench("lstm dW nt 256x1024x1152", || {
        gemm_single(false, true, 256, 1024, 1152, 1.0, &up2, &col2, 0.0, &mut vec![0.0f32; 256 * 1152]);
    });
}
