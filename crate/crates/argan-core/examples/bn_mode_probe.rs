use argan_core::config::ArganConfig;
use argan_core::data::{binarize_mask, gen_synthetic_sample, images_to_tensor, tensor_to_images};
use argan_core::metrics::{ber, rmse_lab, Region};
use argan_core::nn::Mode;
use argan_core::tensor::no_grad;
use argan_core::train::{train, TrainSession};

fn eval_in_mode(session: &TrainSession, data: &[argan_core::data::SampleTriplet], mode: Mode) -> (f64, f64) {
    session.set_mode(mode);
    let mut ber_sum = 0.0;
    let mut rmse_model = 0.0;
    for t in data {
        // Per-image forward (batch 1), as the inference CLI would do.
        let (atts, outs) = no_grad(|| {
            let input = images_to_tensor(&[&t.shadow]).unwrap();
            let states = session.generator.forward(&input).unwrap();
            let a = tensor_to_images(&states.last().unwrap().attention).unwrap().remove(0);
            let o = tensor_to_images(&states.last().unwrap().output).unwrap().remove(0);
            (a, o)
        });
        let matte = t.matte.as_ref().unwrap();
        let free = t.free.as_ref().unwrap();
        let gt_mask = binarize_mask(matte, 0.1).unwrap();
        let pred_mask = binarize_mask(&atts, 0.5).unwrap();
        ber_sum += ber(&pred_mask, &gt_mask).unwrap();
        rmse_model += rmse_lab(&outs, free, Some(&gt_mask), Region::Shadow).unwrap();
    }
    session.set_mode(Mode::Train);
    (ber_sum / data.len() as f64, rmse_model / data.len() as f64)
}

fn main() {
    let iters: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(600);
    let data: Vec<_> = (0..8u64).map(|i| gen_synthetic_sample(i, 32).unwrap()).collect();
    let cfg = ArganConfig { iterations: iters, ..ArganConfig::default() };
    let mut session = TrainSession::new(cfg).unwrap();
    let rows = train(&mut session, &data, None, None).unwrap();
    let last = rows.last().unwrap();
    println!("after {iters} iters: l_det {:.4} l_rem_mse {:.4}", last.l_det, last.l_rem_mse);
    let ident: f64 = data.iter().map(|t| {
        let gt_mask = binarize_mask(t.matte.as_ref().unwrap(), 0.1).unwrap();
        rmse_lab(&t.shadow, t.free.as_ref().unwrap(), Some(&gt_mask), Region::Shadow).unwrap()
    }).sum::<f64>() / data.len() as f64;
    println!("identity rmseS: {ident:.2}");
    let (ber_e, rmse_e) = eval_in_mode(&session, &data, Mode::Eval);
    println!("eval-mode : BER {ber_e:.1} rmseS {rmse_e:.2} ({:.0}%)", 100.0 * rmse_e / ident);
    let (ber_t, rmse_t) = eval_in_mode(&session, &data, Mode::Train);
    println!("train-mode: BER {ber_t:.1} rmseS {rmse_t:.2} ({:.0}%)", 100.0 * rmse_t / ident);
}
