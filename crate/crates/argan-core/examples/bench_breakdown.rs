use argan_core::config::ArganConfig;
use argan_core::data::{gen_synthetic_sample, images_to_tensor};
use argan_core::loss::{loss_adv_g, loss_det, loss_rem};
use argan_core::tensor::{backward, no_grad, zero_grads};
use argan_core::train::TrainSession;
use std::time::Instant;

fn main() {
    let cfg = ArganConfig { iterations: 0, ..ArganConfig::default() };
    let session = TrainSession::new(cfg).unwrap();
    let data: Vec<_> = (0..4u64).map(|i| gen_synthetic_sample(i, 32).unwrap()).collect();
    let shadows: Vec<_> = data.iter().map(|t| &t.shadow).collect();
    let mattes: Vec<_> = data.iter().map(|t| t.matte.as_ref().unwrap()).collect();
    let frees: Vec<_> = data.iter().map(|t| t.free.as_ref().unwrap()).collect();
    let img = images_to_tensor(&shadows).unwrap();
    let matte = images_to_tensor(&mattes).unwrap();
    let free = images_to_tensor(&frees).unwrap();

    let reps = 5;
    let t0 = Instant::now();
    for _ in 0..reps {
        no_grad(|| session.generator.forward(&img).unwrap());
    }
    println!("G fwd (no grad): {:.0} ms", t0.elapsed().as_secs_f64() / reps as f64 * 1e3);

    let t0 = Instant::now();
    for _ in 0..reps {
        let _ = session.generator.forward(&img).unwrap();
    }
    println!("G fwd (graph):   {:.0} ms", t0.elapsed().as_secs_f64() / reps as f64 * 1e3);

    let params = session.g_opt.params.clone();
    let t0 = Instant::now();
    for _ in 0..reps {
        zero_grads(&params);
        let states = session.generator.forward(&img).unwrap();
        let atts: Vec<_> = states.iter().map(|s| s.attention.clone()).collect();
        let outs: Vec<_> = states.iter().map(|s| s.output.clone()).collect();
        let l_det = loss_det(&atts, &matte).unwrap();
        let (l_mse, l_per) = loss_rem(&outs, &free, &session.fx).unwrap();
        let d = session.discriminator.forward(outs.last().unwrap()).unwrap();
        let l_adv = loss_adv_g(&d, None, 1.0).unwrap();
        let total = l_det.add(&l_mse).unwrap().add(&l_per).unwrap().add(&l_adv).unwrap();
        backward(&total).unwrap();
    }
    println!("G fwd+loss+bwd:  {:.0} ms", t0.elapsed().as_secs_f64() / reps as f64 * 1e3);

    let t0 = Instant::now();
    for _ in 0..reps {
        let dr = session.discriminator.forward(&free).unwrap();
        backward(&dr.mean()).unwrap();
    }
    println!("D fwd+bwd:       {:.0} ms", t0.elapsed().as_secs_f64() / reps as f64 * 1e3);
}
