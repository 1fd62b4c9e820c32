use argan_core::config::ArganConfig;
use argan_core::data::{binarize_mask, gen_synthetic_sample};
use argan_core::metrics::{ber, rmse_lab, Region};
use argan_core::train::{infer_image, train, TrainSession};

fn eval(session: &TrainSession, data: &[argan_core::data::SampleTriplet]) -> (f64, f64, f64) {
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

fn main() {
    let chunk: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(250);
    let total: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let data: Vec<_> = (0..8u64).map(|i| gen_synthetic_sample(i, 32).unwrap()).collect();
    let cfg = ArganConfig { iterations: chunk, ..ArganConfig::default() };
    let mut session = TrainSession::new(cfg).unwrap();
    let mut iter10 = (0.0, 0.0);
    let mut done = 0usize;
    let t0 = std::time::Instant::now();
    while done < total {
        let rows = train(&mut session, &data, None, None).unwrap();
        if done == 0 {
            let r = &rows[9];
            iter10 = (r.l_det, r.l_rem_mse);
            println!("iter10 baselines: l_det {:.5} l_rem_mse {:.5}", iter10.0, iter10.1);
        }
        done += rows.len();
        let last = rows.last().unwrap();
        let (ber_v, rm, ri) = eval(&session, &data);
        println!(
            "iter {done}: l_det {:.5} ({:.1}%) l_rem_mse {:.5} ({:.1}%) adv_g {:.3} d_real {:.3} d_fake {:.3} | BER {:.1} rmseS {:.2} vs ident {:.2} ({:.0}%) | {:.1} min",
            last.l_det, 100.0 * last.l_det / iter10.0,
            last.l_rem_mse, 100.0 * last.l_rem_mse / iter10.1,
            last.l_adv_g, last.d_real, last.d_fake,
            ber_v, rm, ri, 100.0 * rm / ri,
            t0.elapsed().as_secs_f64() / 60.0
        );
    }
}
