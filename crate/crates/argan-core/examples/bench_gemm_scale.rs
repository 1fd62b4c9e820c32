use std::time::Instant;
fn main() {
    let (m, k, n) = (256, 1152, 1024);
    let a = vec![1.0f32; m * k];
    let b = vec![1.0f32; k * n];
    let flops = 2.0 * (m * k * n) as f64;
    // serial
    let mut c = vec![0.0f32; m * n];
    let t0 = Instant::now();
    for _ in 0..20 {
        argan_core::threads::gemm_single(false, false, m, k, n, 1.0f32, &a, &b, 0.0, &mut c);
    }
    let dt = t0.elapsed().as_secs_f64() / 20.0;
    println!("serial: {:.2} ms = {:.0} GF/s", dt * 1e3, flops / dt / 1e9);
    // two explicit threads, half rows each
    let t0 = Instant::now();
    for _ in 0..20 {
        let (c1, c2) = c.split_at_mut(m / 2 * n);
        std::thread::scope(|s| {
            let (a1, a2) = a.split_at(m / 2 * k);
            let b1 = &b;
            s.spawn(|| argan_core::threads::gemm_single(false, false, m / 2, k, n, 1.0f32, a1, b1, 0.0, c1));
            s.spawn(|| argan_core::threads::gemm_single(false, false, m / 2, k, n, 1.0f32, a2, b1, 0.0, c2));
        });
    }
    let dt = t0.elapsed().as_secs_f64() / 20.0;
    println!("2 threads: {:.2} ms = {:.0} GF/s", dt * 1e3, flops / dt / 1e9);
}
