use argan_core::config::ArganConfig;
use argan_core::data::gen_synthetic_sample;
use argan_core::train::{train, TrainSession};

fn main() {
    let cfg = ArganConfig { iterations: 10, ..ArganConfig::default() };
    let data: Vec<_> = (0..8u64).map(|i| gen_synthetic_sample(i, 32).unwrap()).collect();
    let mut session = TrainSession::new(cfg).unwrap();
    // warmup
    let t0 = std::time::Instant::now();
    train(&mut session, &data, None, None).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("10 iters: {:.2}s -> {:.3}s/iter; projected 2000 iters: {:.1} min", dt, dt / 10.0, dt / 10.0 * 2000.0 / 60.0);
    argan_core::threads::profile_dump_and_reset("10 iters");
}
