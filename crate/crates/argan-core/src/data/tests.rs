use super::ppm::{decode_image, encode_image};
use super::*;

fn tmpdir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("argan-data-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn ppm_one_white_pixel() {
    let bytes = b"P6\n1 1\n255\n\xff\xff\xff";
    let img = decode_image(bytes).unwrap();
    assert_eq!((img.width, img.height, img.channels), (1, 1, 3));
    assert_eq!(img.pixels, vec![1.0, 1.0, 1.0]);
}

#[test]
fn ppm_write_read_rewrite_is_byte_identical() {
    let (t, _) = synth_sample_debug(7, 16).unwrap();
    let img = t.shadow;
    let bytes = encode_image(&img);
    let back = decode_image(&bytes).unwrap();
    assert_eq!(back, img);
    assert_eq!(encode_image(&back), bytes);
}

#[test]
fn ppm_truncated_payload_errors_with_offset() {
    let mut bytes = b"P6\n2 2\n255\n".to_vec();
    bytes.extend_from_slice(&[0u8; 11]); // 12 expected
    let err = decode_image(&bytes).unwrap_err().to_string();
    assert!(err.contains("11 bytes, expected 12"), "{err}");
    assert!(err.contains("byte 11"), "{err}");
}

#[test]
fn ppm_rejects_wrong_maxval_and_magic() {
    let err = decode_image(b"P6\n1 1\n65535\n\0\0\0\0\0\0").unwrap_err().to_string();
    assert!(err.contains("maxval"), "{err}");
    assert!(err.contains("byte 7"), "{err}");
    let err2 = decode_image(b"P3\n1 1\n255\n0 0 0").unwrap_err().to_string();
    assert!(err2.contains("P6 or P5"), "{err2}");
}

#[test]
fn ppm_gray_roundtrip() {
    let img = Image::new_gray(3, 2, vec![0.0, 0.5, 1.0, 0.25, 0.75, 0.1]).unwrap();
    let bytes = encode_image(&img);
    assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
    let back = decode_image(&bytes).unwrap();
    assert_eq!(back.channels, 1);
    // Quantization is the only loss, and re-encoding is stable.
    assert_eq!(encode_image(&back), bytes);
}

#[test]
fn synth_same_seed_is_byte_identical() {
    let a = gen_synthetic_sample(42, 32).unwrap();
    let b = gen_synthetic_sample(42, 32).unwrap();
    assert_eq!(a.shadow, b.shadow);
    assert_eq!(a.matte, b.matte);
    assert_eq!(a.free, b.free);
    let c = gen_synthetic_sample(43, 32).unwrap();
    assert_ne!(a.shadow, c.shadow);
}

#[test]
fn synth_shadow_never_brighter_than_free() {
    for seed in 0..10u64 {
        let t = gen_synthetic_sample(seed, 32).unwrap();
        let free = t.free.as_ref().unwrap();
        for (i, f) in t.shadow.pixels.iter().zip(&free.pixels) {
            assert!(i <= f, "shadow {i} > free {f} at seed {seed}");
        }
    }
}

#[test]
fn synth_untouched_outside_matte_support() {
    let (t, _) = synth_sample_debug(5, 32).unwrap();
    let matte = t.matte.as_ref().unwrap();
    let free = t.free.as_ref().unwrap();
    let mut outside = 0;
    for p in 0..matte.n_pixels() {
        if matte.pixels[p] == 0.0 {
            outside += 1;
            for c in 0..3 {
                assert_eq!(t.shadow.pixels[p * 3 + c], free.pixels[p * 3 + c]);
            }
        }
    }
    assert!(outside > 0, "matte covers the whole image");
}

#[test]
fn synth_full_shadow_pixels_scale_by_alpha() {
    let (t, d) = synth_sample_debug(11, 32).unwrap();
    let matte = t.matte.as_ref().unwrap();
    let free = t.free.as_ref().unwrap();
    let mut checked = 0;
    for p in 0..matte.n_pixels() {
        if matte.pixels[p] == 1.0 {
            checked += 1;
            for c in 0..3 {
                let want = d.alpha * free.pixels[p * 3 + c];
                let got = t.shadow.pixels[p * 3 + c];
                // One quantization step of slack.
                assert!(
                    (got - want).abs() <= 0.5 / 255.0 + 1e-6,
                    "pixel {p} ch {c}: {got} vs {want}"
                );
            }
        }
    }
    assert!(checked > 0, "no fully shadowed pixel");
}

#[test]
fn synth_coverage_in_contract_range() {
    for seed in 0..10u64 {
        let (t, d) = synth_sample_debug(100 + seed, 32).unwrap();
        let n = t.shadow.n_pixels();
        let cov = d.hard_mask.iter().filter(|&&b| b).count() as f64 / n as f64;
        assert!((0.10..=0.40).contains(&cov), "seed {seed}: coverage {cov}");
    }
}

#[test]
fn synth_rejects_tiny_size() {
    assert!(gen_synthetic_sample(1, 4).is_err());
}

#[test]
fn derive_matte_of_identical_images_is_zero() {
    let t = gen_synthetic_sample(3, 16).unwrap();
    let free = t.free.as_ref().unwrap();
    let m = derive_matte(free, free).unwrap();
    assert!(m.pixels.iter().all(|&v| v == 0.0));
}

#[test]
fn derive_matte_uniform_half_darkening() {
    // I = 0.5*F with lum(F) >= 0.05 -> matte 0.5 everywhere.
    let free = Image::new_rgb(4, 4, vec![0.6; 48]).unwrap();
    let shadow = Image::new_rgb(4, 4, vec![0.3; 48]).unwrap();
    let m = derive_matte(&shadow, &free).unwrap();
    for v in m.pixels {
        assert!((v - 0.5).abs() < 1e-6, "{v}");
    }
}

#[test]
fn derive_matte_monotone_in_darkening() {
    let free = Image::new_rgb(2, 2, vec![0.8; 12]).unwrap();
    let half = Image::new_rgb(2, 2, vec![0.4; 12]).unwrap();
    let third = Image::new_rgb(2, 2, vec![0.27; 12]).unwrap();
    let m_half = derive_matte(&half, &free).unwrap();
    let m_third = derive_matte(&third, &free).unwrap();
    for (a, b) in m_third.pixels.iter().zip(&m_half.pixels) {
        assert!(a > b, "darker shadow must give larger matte: {a} vs {b}");
    }
}

#[test]
fn derive_matte_consistent_with_generator() {
    // mean |derive_matte(I,F) - (1-alpha)*M| over strong-shadow pixels <= 0.05.
    for seed in [2u64, 9, 17] {
        let (t, d) = synth_sample_debug(seed, 32).unwrap();
        let matte = t.matte.as_ref().unwrap();
        let derived = derive_matte(&t.shadow, t.free.as_ref().unwrap()).unwrap();
        let mut acc = 0.0f64;
        let mut count = 0usize;
        for p in 0..matte.n_pixels() {
            if d.hard_mask[p] {
                let want = (1.0 - d.alpha) * matte.pixels[p];
                acc += (derived.pixels[p] - want).abs() as f64;
                count += 1;
            }
        }
        let mean = acc / count as f64;
        assert!(mean <= 0.05, "seed {seed}: mean deviation {mean}");
    }
}

#[test]
fn derive_matte_rejects_dimension_mismatch() {
    let a = Image::new_rgb(2, 2, vec![0.0; 12]).unwrap();
    let b = Image::new_rgb(3, 2, vec![0.0; 18]).unwrap();
    assert!(derive_matte(&a, &b).is_err());
}

#[test]
fn binarize_cases() {
    let zeros = Image::new_gray(2, 2, vec![0.0; 4]).unwrap();
    assert!(binarize_mask(&zeros, 0.5)
        .unwrap()
        .pixels
        .iter()
        .all(|&v| v == 0.0));
    // Exactly tau maps to 1.
    let edge = Image::new_gray(1, 1, vec![0.5]).unwrap();
    assert_eq!(binarize_mask(&edge, 0.5).unwrap().pixels, vec![1.0]);
    // Idempotent under re-binarization.
    let m = Image::new_gray(2, 2, vec![0.1, 0.5, 0.9, 0.4]).unwrap();
    let b1 = binarize_mask(&m, 0.5).unwrap();
    let b2 = binarize_mask(&b1, 0.3).unwrap();
    assert_eq!(b1.pixels, b2.pixels);
    assert!(binarize_mask(&m, 0.0).is_err());
    assert!(binarize_mask(&m, 1.0).is_err());
}

#[test]
fn dataset_roundtrip_preserves_values() {
    let dir = tmpdir("roundtrip");
    let samples: Vec<SampleTriplet> = (0..3)
        .map(|i| gen_synthetic_sample(i, 16).unwrap())
        .collect();
    write_dataset(&dir, &samples, DatasetKind::Labeled).unwrap();
    let loaded = load_dataset(&dir, DatasetKind::Labeled).unwrap();
    assert_eq!(loaded.len(), 3);
    for (a, b) in samples.iter().zip(&loaded) {
        assert_eq!(a.shadow, b.shadow);
        assert_eq!(a.matte, b.matte);
        assert_eq!(a.free, b.free);
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn dataset_empty_directories_load_empty() {
    let dir = tmpdir("empty");
    for sub in ["A", "B", "C", "U"] {
        std::fs::create_dir_all(dir.join(sub)).unwrap();
    }
    assert!(load_dataset(&dir, DatasetKind::Labeled).unwrap().is_empty());
    assert!(load_dataset(&dir, DatasetKind::Unlabeled).unwrap().is_empty());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn dataset_missing_counterpart_names_file() {
    let dir = tmpdir("missing");
    let t = gen_synthetic_sample(1, 16).unwrap();
    write_dataset(&dir, &[t], DatasetKind::Labeled).unwrap();
    std::fs::remove_file(dir.join("B").join("0000.ppm")).unwrap();
    let err = load_dataset(&dir, DatasetKind::Labeled).unwrap_err().to_string();
    assert!(err.contains("0000.ppm"), "{err}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn dataset_unlabeled_roundtrip() {
    let dir = tmpdir("unlabeled");
    let samples: Vec<SampleTriplet> = (0..2)
        .map(|i| gen_synthetic_sample(50 + i, 16).unwrap())
        .collect();
    write_dataset(&dir, &samples, DatasetKind::Unlabeled).unwrap();
    let loaded = load_dataset(&dir, DatasetKind::Unlabeled).unwrap();
    assert_eq!(loaded.len(), 2);
    assert!(loaded.iter().all(|s| !s.is_labeled()));
    assert_eq!(loaded[0].shadow, samples[0].shadow);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn tensor_image_conversion_roundtrip() {
    let t = gen_synthetic_sample(13, 16).unwrap();
    let free = t.free.as_ref().unwrap();
    let tensor = images_to_tensor(&[&t.shadow, free]).unwrap();
    assert_eq!(tensor.shape(), &[2, 3, 16, 16]);
    let back = tensor_to_images(&tensor).unwrap();
    assert_eq!(back[0], t.shadow);
    assert_eq!(back[1], *free);
}
