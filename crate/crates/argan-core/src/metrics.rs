//! Evaluation metrics: balance error rate for detection and CIELAB RMSE for
//! removal, split by shadow / non-shadow / whole-image regions.

use crate::data::Image;
use crate::error::{ArganError, Result};

/// sRGB -> XYZ, D65 white point.
const M_FWD: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];
/// XYZ -> linear sRGB (inverse of the above).
const M_INV: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];
const XN: f64 = 0.95047;
const YN: f64 = 1.0;
const ZN: f64 = 1.08883;

fn srgb_decode(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn srgb_encode(c: f64) -> f64 {
    if c <= 0.0031308 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA3: f64 = (6.0 / 29.0) * (6.0 / 29.0) * (6.0 / 29.0);
    if t > DELTA3 {
        t.cbrt()
    } else {
        t / (3.0 * (6.0 / 29.0) * (6.0 / 29.0)) + 4.0 / 29.0
    }
}

fn lab_f_inv(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

/// sRGB components in [0,1] (clamped) to CIELAB under D65.
pub fn rgb_to_lab(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let rl = srgb_decode(r.clamp(0.0, 1.0));
    let gl = srgb_decode(g.clamp(0.0, 1.0));
    let bl = srgb_decode(b.clamp(0.0, 1.0));
    let x = M_FWD[0][0] * rl + M_FWD[0][1] * gl + M_FWD[0][2] * bl;
    let y = M_FWD[1][0] * rl + M_FWD[1][1] * gl + M_FWD[1][2] * bl;
    let z = M_FWD[2][0] * rl + M_FWD[2][1] * gl + M_FWD[2][2] * bl;
    let fx = lab_f(x / XN);
    let fy = lab_f(y / YN);
    let fz = lab_f(z / ZN);
    (116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
}

/// Inverse pipeline, used for constructing test fixtures and round trips.
pub fn lab_to_rgb(l: f64, a: f64, b: f64) -> (f64, f64, f64) {
    let fy = (l + 16.0) / 116.0;
    let fx = fy + a / 500.0;
    let fz = fy - b / 200.0;
    let x = XN * lab_f_inv(fx);
    let y = YN * lab_f_inv(fy);
    let z = ZN * lab_f_inv(fz);
    let rl = M_INV[0][0] * x + M_INV[0][1] * y + M_INV[0][2] * z;
    let gl = M_INV[1][0] * x + M_INV[1][1] * y + M_INV[1][2] * z;
    let bl = M_INV[2][0] * x + M_INV[2][1] * y + M_INV[2][2] * z;
    (
        srgb_encode(rl.clamp(0.0, 1.0)),
        srgb_encode(gl.clamp(0.0, 1.0)),
        srgb_encode(bl.clamp(0.0, 1.0)),
    )
}

/// Balance error rate in percent plus a degenerate-class flag.
///
/// BER = (1 - (TP/Np + TN/Nn)/2) * 100. An empty class contributes a
/// perfect ratio of 1 and raises the flag, since its error is undefined.
pub fn ber_flagged(pred: &Image, gt: &Image) -> Result<(f64, bool)> {
    if pred.width != gt.width || pred.height != gt.height {
        return Err(ArganError::Data(format!(
            "ber: prediction is {}x{} but ground truth is {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    let (mut tp, mut tn, mut np, mut nn) = (0u64, 0u64, 0u64, 0u64);
    for (p, g) in pred.gray_view().zip(gt.gray_view()) {
        let p1 = p >= 0.5;
        let g1 = g >= 0.5;
        if g1 {
            np += 1;
            if p1 {
                tp += 1;
            }
        } else {
            nn += 1;
            if !p1 {
                tn += 1;
            }
        }
    }
    let mut flag = false;
    let tpr = if np == 0 {
        flag = true;
        1.0
    } else {
        tp as f64 / np as f64
    };
    let tnr = if nn == 0 {
        flag = true;
        1.0
    } else {
        tn as f64 / nn as f64
    };
    Ok(((1.0 - 0.5 * (tpr + tnr)) * 100.0, flag))
}

/// Balance error rate in percent between binary masks.
pub fn ber(pred: &Image, gt: &Image) -> Result<f64> {
    ber_flagged(pred, gt).map(|(v, _)| v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Shadow,
    NonShadow,
    All,
}

/// Root-mean-square error in CIELAB over the selected pixels, averaged over
/// pixels and the three LAB channels.
pub fn rmse_lab(pred: &Image, gt: &Image, mask: Option<&Image>, region: Region) -> Result<f64> {
    if pred.width != gt.width || pred.height != gt.height {
        return Err(ArganError::Data(format!(
            "rmse_lab: prediction is {}x{} but ground truth is {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    if let Some(m) = mask {
        if m.width != pred.width || m.height != pred.height {
            return Err(ArganError::Data(format!(
                "rmse_lab: mask is {}x{} but images are {}x{}",
                m.width, m.height, pred.width, pred.height
            )));
        }
    }
    if mask.is_none() && region != Region::All {
        return Err(ArganError::Data(
            "rmse_lab: shadow/non-shadow regions need a mask".into(),
        ));
    }
    let n_px = pred.width * pred.height;
    let mut acc = 0.0f64;
    let mut count = 0usize;
    for i in 0..n_px {
        let selected = match region {
            Region::All => true,
            Region::Shadow => mask.unwrap().gray_at(i) >= 0.5,
            Region::NonShadow => mask.unwrap().gray_at(i) < 0.5,
        };
        if !selected {
            continue;
        }
        let (pr, pg, pb) = pred.rgb_at(i);
        let (gr, gg, gb) = gt.rgb_at(i);
        let (pl, pa, pbb) = rgb_to_lab(pr as f64, pg as f64, pb as f64);
        let (gl, ga, gbb) = rgb_to_lab(gr as f64, gg as f64, gb as f64);
        acc += (pl - gl) * (pl - gl) + (pa - ga) * (pa - ga) + (pbb - gbb) * (pbb - gbb);
        count += 1;
    }
    if count == 0 {
        return Err(ArganError::Data(format!(
            "rmse_lab: region {region:?} selects no pixels"
        )));
    }
    Ok((acc / (count as f64 * 3.0)).sqrt())
}

/// The full removal report for one prediction/target pair.
#[derive(Clone, Debug)]
pub struct MetricReport {
    pub ber: f64,
    pub ber_degenerate: bool,
    pub rmse_shadow: f64,
    pub rmse_nonshadow: f64,
    pub rmse_all: f64,
    pub shadow_pixels: usize,
    pub nonshadow_pixels: usize,
}

/// Evaluate removal RMSE in all three regions (and detection BER when a
/// predicted mask is supplied). Asserts the partition identity: the regions
/// tile the image, so the whole-image RMSE lies between the regional ones.
pub fn evaluate_pair(
    pred: &Image,
    gt: &Image,
    mask: &Image,
    pred_mask: Option<&Image>,
) -> Result<MetricReport> {
    let n_px = mask.width * mask.height;
    let shadow_pixels = (0..n_px).filter(|&i| mask.gray_at(i) >= 0.5).count();
    let nonshadow_pixels = n_px - shadow_pixels;
    let rmse_shadow = if shadow_pixels > 0 {
        rmse_lab(pred, gt, Some(mask), Region::Shadow)?
    } else {
        0.0
    };
    let rmse_nonshadow = if nonshadow_pixels > 0 {
        rmse_lab(pred, gt, Some(mask), Region::NonShadow)?
    } else {
        0.0
    };
    let rmse_all = rmse_lab(pred, gt, Some(mask), Region::All)?;
    if shadow_pixels > 0 && nonshadow_pixels > 0 {
        let lo = rmse_shadow.min(rmse_nonshadow) - 1e-9;
        let hi = rmse_shadow.max(rmse_nonshadow) + 1e-9;
        assert!(
            rmse_all >= lo && rmse_all <= hi,
            "regional partition identity violated: S={rmse_shadow} N={rmse_nonshadow} A={rmse_all}"
        );
    }
    let (ber, ber_degenerate) = match pred_mask {
        Some(pm) => ber_flagged(pm, mask)?,
        None => (0.0, false),
    };
    Ok(MetricReport {
        ber,
        ber_degenerate,
        rmse_shadow,
        rmse_nonshadow,
        rmse_all,
        shadow_pixels,
        nonshadow_pixels,
    })
}
