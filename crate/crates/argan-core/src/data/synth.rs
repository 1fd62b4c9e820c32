//! Procedural shadow scenes: a textured shadow-free image, a soft shadow
//! matte, and the multiplicatively darkened shadow image.
//!
//! Everything is drawn from one xorshift stream per sample, so a seed fully
//! determines the triplet, and all three images are snapped to the 8-bit
//! grid so the disk round trip is exact.

use super::{Image, SampleTriplet};
use crate::error::{ArganError, Result};
use crate::rng::Rng;

/// Extra facts about a generated sample, for consistency oracles.
pub struct SynthDetails {
    pub alpha: f32,
    pub hard_mask: Vec<bool>,
}

/// Deterministic triplet: see `synth_sample_debug` for the construction.
pub fn gen_synthetic_sample(seed: u64, size: usize) -> Result<SampleTriplet> {
    synth_sample_debug(seed, size).map(|(t, _)| t)
}

/// The construction, in order: (1) value-noise background plus 1-3 colored
/// rectangles; (2) a convex polygon or ellipse covering 10-40% of pixels;
/// (3) the hard mask blurred by three 5x5 box passes and rescaled to [0,1];
/// (4) a darkening factor alpha ~ U[0.3, 0.7]; (5) I = F*(1-(1-alpha)*M).
pub fn synth_sample_debug(seed: u64, size: usize) -> Result<(SampleTriplet, SynthDetails)> {
    if size < 8 {
        return Err(ArganError::Data(format!(
            "synthetic sample size {size} is too small (minimum 8)"
        )));
    }
    let mut rng = Rng::new(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1));
    let n = size * size;

    // (1) shadow-free image: smooth value noise + rectangles.
    let mut free = vec![0.0f32; n * 3];
    let lattice = 5usize; // 5x5 node grid, bilinear between nodes
    let mut nodes = vec![0.0f32; lattice * lattice * 3];
    for v in nodes.iter_mut() {
        *v = rng.uniform(0.15, 0.85) as f32;
    }
    let step = (size - 1) as f32 / (lattice - 1) as f32;
    for y in 0..size {
        for x in 0..size {
            let gx = (x as f32 / step).min((lattice - 1) as f32 - 1e-4);
            let gy = (y as f32 / step).min((lattice - 1) as f32 - 1e-4);
            let (ix, iy) = (gx as usize, gy as usize);
            let (fx, fy) = (gx - ix as f32, gy - iy as f32);
            for c in 0..3 {
                let node = |xx: usize, yy: usize| nodes[(yy * lattice + xx) * 3 + c];
                let top = node(ix, iy) * (1.0 - fx) + node(ix + 1, iy) * fx;
                let bot = node(ix, iy + 1) * (1.0 - fx) + node(ix + 1, iy + 1) * fx;
                free[(y * size + x) * 3 + c] = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    let n_rects = 1 + rng.below(3);
    for _ in 0..n_rects {
        let color = [
            rng.uniform(0.1, 0.95) as f32,
            rng.uniform(0.1, 0.95) as f32,
            rng.uniform(0.1, 0.95) as f32,
        ];
        let x0 = rng.below(size - 2);
        let y0 = rng.below(size - 2);
        let rw = 2 + rng.below(size / 2);
        let rh = 2 + rng.below(size / 2);
        for y in y0..(y0 + rh).min(size) {
            for x in x0..(x0 + rw).min(size) {
                for c in 0..3 {
                    free[(y * size + x) * 3 + c] = color[c];
                }
            }
        }
    }
    // Snap to the 8-bit grid before the shadow is applied.
    for v in free.iter_mut() {
        *v = (*v * 255.0).round().clamp(0.0, 255.0) / 255.0;
    }

    // (2) hard mask: redraw until coverage lands in [10%, 40%].
    let mut hard = vec![false; n];
    let mut coverage = 0.0;
    for _attempt in 0..200 {
        hard.iter_mut().for_each(|b| *b = false);
        if rng.below(2) == 0 {
            draw_ellipse(&mut rng, size, &mut hard);
        } else {
            draw_convex_polygon(&mut rng, size, &mut hard);
        }
        coverage = hard.iter().filter(|&&b| b).count() as f64 / n as f64;
        if (0.10..=0.40).contains(&coverage) {
            break;
        }
    }
    debug_assert!((0.10..=0.40).contains(&coverage), "coverage {coverage}");

    // (3) soft matte: three 5x5 box blurs (zero padding), rescale to [0,1].
    let mut matte: Vec<f32> = hard.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    for _ in 0..3 {
        matte = box_blur5(&matte, size);
    }
    let maxv = matte.iter().cloned().fold(0.0f32, f32::max);
    if maxv > 0.0 {
        for v in matte.iter_mut() {
            *v /= maxv;
        }
    }
    for v in matte.iter_mut() {
        *v = (*v * 255.0).round().clamp(0.0, 255.0) / 255.0;
    }

    // (4) + (5): multiplicative darkening.
    let alpha = rng.uniform(0.3, 0.7) as f32;
    let mut shadow = vec![0.0f32; n * 3];
    for p in 0..n {
        let factor = 1.0 - (1.0 - alpha) * matte[p];
        for c in 0..3 {
            shadow[p * 3 + c] =
                (free[p * 3 + c] * factor * 255.0).round().clamp(0.0, 255.0) / 255.0;
        }
    }

    let triplet = SampleTriplet {
        shadow: Image::new_rgb(size, size, shadow)?,
        matte: Some(Image::new_gray(size, size, matte)?),
        free: Some(Image::new_rgb(size, size, free)?),
    };
    Ok((
        triplet,
        SynthDetails {
            alpha,
            hard_mask: hard,
        },
    ))
}

fn draw_ellipse(rng: &mut Rng, size: usize, mask: &mut [bool]) {
    let s = size as f64;
    let cx = rng.uniform(0.25, 0.75) * s;
    let cy = rng.uniform(0.25, 0.75) * s;
    let rx = rng.uniform(0.15, 0.45) * s;
    let ry = rng.uniform(0.15, 0.45) * s;
    let phi = rng.uniform(0.0, std::f64::consts::PI);
    let (cos, sin) = (phi.cos(), phi.sin());
    for y in 0..size {
        for x in 0..size {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            let u = (dx * cos + dy * sin) / rx;
            let v = (-dx * sin + dy * cos) / ry;
            if u * u + v * v <= 1.0 {
                mask[y * size + x] = true;
            }
        }
    }
}

fn draw_convex_polygon(rng: &mut Rng, size: usize, mask: &mut [bool]) {
    let s = size as f64;
    let cx = rng.uniform(0.3, 0.7) * s;
    let cy = rng.uniform(0.3, 0.7) * s;
    let rx = rng.uniform(0.2, 0.45) * s;
    let ry = rng.uniform(0.2, 0.45) * s;
    let k = 3 + rng.below(4); // 3..=6 vertices
    // Vertices in angular order on an ellipse are always convex.
    let mut verts = Vec::with_capacity(k);
    for j in 0..k {
        let jitter = rng.uniform(0.05, 0.95);
        let theta = (j as f64 + jitter) / k as f64 * std::f64::consts::TAU;
        verts.push((cx + rx * theta.cos(), cy + ry * theta.sin()));
    }
    for y in 0..size {
        for x in 0..size {
            let px = x as f64 + 0.5;
            let py = y as f64 + 0.5;
            let mut inside = true;
            for j in 0..k {
                let (x1, y1) = verts[j];
                let (x2, y2) = verts[(j + 1) % k];
                let cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1);
                if cross < 0.0 {
                    inside = false;
                    break;
                }
            }
            if inside {
                mask[y * size + x] = true;
            }
        }
    }
}

fn box_blur5(src: &[f32], size: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; src.len()];
    let r = 2isize;
    for y in 0..size as isize {
        for x in 0..size as isize {
            let mut acc = 0.0f32;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (yy, xx) = (y + dy, x + dx);
                    if yy >= 0 && yy < size as isize && xx >= 0 && xx < size as isize {
                        acc += src[(yy * size as isize + xx) as usize];
                    }
                }
            }
            out[(y * size as isize + x) as usize] = acc / 25.0;
        }
    }
    out
}

/// Soft matte from an (I, F) pair: per pixel
/// m = clamp((lum(F) - lum(I)) / max(lum(F), 0.05), 0, 1).
pub fn derive_matte(shadow: &Image, free: &Image) -> Result<Image> {
    if shadow.width != free.width || shadow.height != free.height {
        return Err(ArganError::Data(format!(
            "derive_matte: {}x{} vs {}x{}",
            shadow.width, shadow.height, free.width, free.height
        )));
    }
    let n = shadow.n_pixels();
    let mut out = vec![0.0f32; n];
    for i in 0..n {
        let lf = free.gray_at(i);
        let li = shadow.gray_at(i);
        out[i] = ((lf - li) / lf.max(0.05)).clamp(0.0, 1.0);
    }
    Image::new_gray(shadow.width, shadow.height, out)
}

/// Threshold a matte: pixel >= tau maps to 1, else 0.
pub fn binarize_mask(matte: &Image, tau: f32) -> Result<Image> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(ArganError::Config(format!(
            "binarize threshold must lie in (0,1), got {tau}"
        )));
    }
    let pixels = (0..matte.n_pixels())
        .map(|i| if matte.gray_at(i) >= tau { 1.0 } else { 0.0 })
        .collect();
    Image::new_gray(matte.width, matte.height, pixels)
}
