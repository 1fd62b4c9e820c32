use super::*;
use crate::data::gen_synthetic_sample;

fn tmpfile(tag: &str) -> std::path::PathBuf {
    std::env::temp_dir().join(format!("argan-train-{tag}-{}.ckpt", std::process::id()))
}

fn quick_cfg(iterations: usize) -> ArganConfig {
    ArganConfig {
        iterations,
        ..ArganConfig::default()
    }
}

fn dataset(n: usize) -> Vec<SampleTriplet> {
    (0..n as u64)
        .map(|i| gen_synthetic_sample(i, 32).unwrap())
        .collect()
}

#[test]
fn zero_iterations_checkpoints_initialization() {
    let path = tmpfile("zero-iter");
    let mut session = TrainSession::new(quick_cfg(0)).unwrap();
    let before = crate::checkpoint::encode_checkpoint(&session.cfg, &session.named_tensors());
    let rows = train(&mut session, &dataset(2), None, Some(&path)).unwrap();
    assert!(rows.is_empty());
    let written = std::fs::read(&path).unwrap();
    assert_eq!(written, before);
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn training_decreases_nothing_but_runs_and_logs() {
    // Two iterations of the full pipeline: the log has one row per
    // iteration with finite values, and d_real/d_fake are probabilities.
    let mut session = TrainSession::new(quick_cfg(2)).unwrap();
    let rows = train(&mut session, &dataset(4), None, None).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].iter, 1);
    assert_eq!(rows[1].iter, 2);
    for r in &rows {
        for v in [r.l_det, r.l_rem_mse, r.l_rem_per, r.l_adv_g, r.l_adv_d] {
            assert!(v.is_finite());
        }
        assert!((0.0..=1.0).contains(&r.d_real));
        assert!((0.0..=1.0).contains(&r.d_fake));
    }
    assert!(rows[0].l_det >= 0.0 && rows[0].l_rem_mse >= 0.0);
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let run = || {
        let mut session = TrainSession::new(quick_cfg(2)).unwrap();
        let rows = train(&mut session, &dataset(3), None, None).unwrap();
        (
            format_log(&rows),
            crate::checkpoint::encode_checkpoint(&session.cfg, &session.named_tensors()),
        )
    };
    let (log_a, bytes_a) = run();
    let (log_b, bytes_b) = run();
    assert_eq!(log_a, log_b);
    assert_eq!(bytes_a, bytes_b);
}

#[test]
fn lambda_one_semi_supervised_matches_supervised_bitwise() {
    let labeled = dataset(3);
    let unlabeled = dataset(2);
    let supervised = {
        let mut session = TrainSession::new(quick_cfg(2)).unwrap();
        train(&mut session, &labeled, None, None).unwrap();
        crate::checkpoint::encode_checkpoint(&session.cfg, &session.named_tensors())
    };
    let semi = {
        let cfg = ArganConfig {
            semi_supervised: true,
            lambda: 1.0,
            ..quick_cfg(2)
        };
        let mut session = TrainSession::new(cfg).unwrap();
        train(&mut session, &labeled, Some(&unlabeled), None).unwrap();
        let mut tensors = session.named_tensors();
        // The config snapshot legitimately differs; compare tensors only.
        tensors.sort_by(|a, b| a.0.cmp(&b.0));
        tensors
    };
    let (_, mut sup_tensors) = crate::checkpoint::decode_checkpoint(&supervised).unwrap();
    sup_tensors.sort_by(|a, b| a.0.cmp(&b.0));
    assert_eq!(sup_tensors.len(), semi.len());
    for (a, b) in sup_tensors.iter().zip(&semi) {
        assert_eq!(a.0, b.0);
        let bits_a: Vec<u32> = a.2.iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u32> = b.2.iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_a, bits_b, "tensor {} diverged", a.0);
    }
}

#[test]
fn semi_supervised_requires_unlabeled_data() {
    let cfg = ArganConfig {
        semi_supervised: true,
        ..quick_cfg(1)
    };
    let mut session = TrainSession::new(cfg).unwrap();
    let err = train(&mut session, &dataset(2), None, None)
        .unwrap_err()
        .to_string();
    assert!(err.contains("unlabeled"), "{err}");
}

#[test]
fn training_rejects_wrong_image_sizes() {
    let mut session = TrainSession::new(quick_cfg(1)).unwrap();
    let small: Vec<SampleTriplet> = (0..2).map(|i| gen_synthetic_sample(i, 64).unwrap()).collect();
    let err = train(&mut session, &small, None, None).unwrap_err().to_string();
    assert!(err.contains("config expects 32"), "{err}");
}

#[test]
fn nan_guard_names_the_loss() {
    let t = Tensor::from_vec(vec![f32::NAN], &[1]).unwrap();
    let err = ensure_finite("l_det", &t).unwrap_err().to_string();
    assert!(err.contains("l_det"), "{err}");
    let ok = Tensor::from_vec(vec![1.0f32], &[1]).unwrap();
    ensure_finite("l_det", &ok).unwrap();
}

#[test]
fn checkpoint_save_load_save_is_byte_identical() {
    let path = tmpfile("roundtrip");
    let mut session = TrainSession::new(quick_cfg(1)).unwrap();
    train(&mut session, &dataset(2), None, Some(&path)).unwrap();
    let first = std::fs::read(&path).unwrap();
    let loaded = TrainSession::load(&path).unwrap();
    loaded.save(&path).unwrap();
    let second = std::fs::read(&path).unwrap();
    assert_eq!(first, second);
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn checkpoint_restores_optimizer_state() {
    let path = tmpfile("optstate");
    let mut session = TrainSession::new(quick_cfg(1)).unwrap();
    train(&mut session, &dataset(2), None, Some(&path)).unwrap();
    let loaded = TrainSession::load(&path).unwrap();
    assert_eq!(loaded.d_opt.t, session.d_opt.t);
    assert_eq!(loaded.g_opt.velocities, session.g_opt.velocities);
    assert_eq!(loaded.d_opt.m, session.d_opt.m);
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn checkpoint_shape_mismatch_names_tensor() {
    let path = tmpfile("badshape");
    let session = TrainSession::new(quick_cfg(0)).unwrap();
    let mut tensors = session.named_tensors();
    // Corrupt the first tensor's shape but keep its element count.
    let first_name = tensors[0].0.clone();
    let numel: usize = tensors[0].1.iter().product();
    tensors[0].1 = vec![numel];
    crate::checkpoint::save_checkpoint(&path, &session.cfg, &tensors).unwrap();
    let err = TrainSession::load(&path).unwrap_err().to_string();
    assert!(err.contains(&first_name), "{err}");
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn inference_is_stable_across_checkpoint_roundtrip() {
    let path = tmpfile("infer");
    let mut session = TrainSession::new(quick_cfg(1)).unwrap();
    let data = dataset(2);
    train(&mut session, &data, None, Some(&path)).unwrap();
    let (atts_a, outs_a) = infer_image(&session, &data[0].shadow).unwrap();
    let loaded = TrainSession::load(&path).unwrap();
    let (atts_b, outs_b) = infer_image(&loaded, &data[0].shadow).unwrap();
    assert_eq!(atts_a.len(), 3);
    for (a, b) in atts_a.iter().zip(&atts_b) {
        let bits_a: Vec<u32> = a.pixels.iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u32> = b.pixels.iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_a, bits_b);
    }
    for (a, b) in outs_a.iter().zip(&outs_b) {
        let bits_a: Vec<u32> = a.pixels.iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u32> = b.pixels.iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_a, bits_b);
    }
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn infer_names_divisor_on_bad_input() {
    let session = TrainSession::new(quick_cfg(0)).unwrap();
    let img = Image::new_rgb(20, 20, vec![0.5; 20 * 20 * 3]).unwrap();
    let err = infer_image(&session, &img).unwrap_err().to_string();
    assert!(err.contains("divisible by 32"), "{err}");
}

#[test]
fn log_format_has_contract_header() {
    let rows = vec![LogRow {
        iter: 1,
        l_det: 0.5,
        l_rem_mse: 0.25,
        l_rem_per: 0.1,
        l_adv_g: 1.0,
        l_adv_d: 1.5,
        d_real: 0.6,
        d_fake: 0.4,
    }];
    let text = format_log(&rows);
    assert!(text.starts_with("iter,l_det,l_rem_mse,l_rem_per,l_adv_g,l_adv_d,d_real,d_fake\n"));
    assert!(text.contains("1,0.5,0.25,0.1,1,1.5,0.6,0.4"));
}
