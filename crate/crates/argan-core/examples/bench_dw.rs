use argan_core::threads::gemm_single;
use std::time::Instant;
fn bench(name: &str, reps: usize, mut f: impl FnMut()) {
    let t0 = Instant::now();
    for _ in 0..reps { f(); }
    println!("{name}: {:.3} ms", t0.elapsed().as_secs_f64() / reps as f64 * 1e3);
}
fn main() {
    // deconv dW shapes: (false, true, ic, in_plane, okk)
    for (m, k, n) in [(512usize, 1usize, 8192usize), (1024, 4, 4096), (512, 16, 2048), (256, 64, 1024), (128, 256, 48)] {
        let a = vec![1.0f32; m * k];
        let b = vec![1.0f32; n * k]; // stored n x k for trans_b
        let mut c = vec![0.0f32; m * n];
        bench(&format!("dW nt {m}x{k}x{n}"), 30, || gemm_single(false, true, m, k, n, 1.0f32, &a, &b, 0.0, &mut c));
    }
    // deconv fwd/dX shapes with small n
    for (m, k, n) in [(8192usize, 512usize, 1usize), (512, 8192, 1), (4096, 1024, 4), (1024, 4096, 4), (2048, 512, 16), (512, 2048, 16)] {
        let a = vec![1.0f32; m * k];
        let b = vec![1.0f32; k * n];
        let mut c = vec![0.0f32; m * n];
        bench(&format!("nn {m}x{k}x{n}"), 30, || gemm_single(false, false, m, k, n, 1.0f32, &a, &b, 0.0, &mut c));
        let at = vec![1.0f32; k * m];
        bench(&format!("tn {m}x{k}x{n}"), 30, || gemm_single(true, false, m, k, n, 1.0f32, &at, &b, 0.0, &mut c));
    }
}
