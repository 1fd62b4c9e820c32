use std::time::Instant;
fn mm(trans_a: bool, trans_b: bool, m: usize, k: usize, n: usize, a: &[f32], b: &[f32], c: &mut [f32]) {
    let (rsa, csa) = if trans_a { (1isize, m as isize) } else { (k as isize, 1isize) };
    let (rsb, csb) = if trans_b { (1isize, k as isize) } else { (n as isize, 1isize) };
    unsafe {
        matrixmultiply::sgemm(m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, 0.0, c.as_mut_ptr(), n as isize, 1);
    }
}
fn bench(name: &str, reps: usize, mut f: impl FnMut()) {
    let t0 = Instant::now();
    for _ in 0..reps { f(); }
    println!("{name}: {:.3} ms", t0.elapsed().as_secs_f64() / reps as f64 * 1e3);
}
fn main() {
    for (m, k, n) in [(512usize, 4608usize, 4usize), (512, 8192, 1), (8192, 512, 1), (512, 2304, 16), (64, 576, 16)] {
        let a = vec![1.0f32; m * k];
        let b = vec![1.0f32; k * n];
        let mut c = vec![0.0f32; m * n];
        bench(&format!("mm   nn {m}x{k}x{n}"), 50, || mm(false, false, m, k, n, &a, &b, &mut c));
        bench(&format!("ours nn {m}x{k}x{n}"), 50, || argan_core::threads::gemm_single(false, false, m, k, n, 1.0f32, &a, &b, 0.0, &mut c));
        let at = vec![1.0f32; k * m];
        bench(&format!("mm   tn {m}x{k}x{n}"), 50, || mm(true, false, m, k, n, &at, &b, &mut c));
        bench(&format!("ours tn {m}x{k}x{n}"), 50, || argan_core::threads::gemm_single(true, false, m, k, n, 1.0f32, &at, &b, 0.0, &mut c));
    }
}
