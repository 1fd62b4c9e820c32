use std::time::Instant;
fn main() {
    let (m, k, n) = (64usize, 576usize, 4096usize);
    let a = vec![1.0f32; m * k];
    let b = vec![1.0f32; k * n];
    let mut c = vec![0.0f32; m * n];
    let flops = 2.0 * (m * k * n) as f64;
    for reps in 0..3 {
        let t0 = Instant::now();
        for _ in 0..30 {
            argan_core::threads::gemm(false, false, m, k, n, 1.0f32, &a, &b, 0.0, &mut c);
        }
        let dt = t0.elapsed().as_secs_f64() / 30.0;
        println!("rep{reps}: {:.2} ms = {:.0} GF/s (threads={})", dt * 1e3, flops / dt / 1e9, argan_core::threads::kernel_threads());
    }
}
