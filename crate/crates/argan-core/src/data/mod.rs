//! Images, sample triplets, synthetic shadow-scene generation, and the
//! ISTD-like on-disk dataset layout (A/ shadow, B/ matte, C/ shadow-free,
//! U/ unlabeled).

mod dataset;
mod ppm;
mod synth;

pub use dataset::{load_dataset, write_dataset, DatasetKind};
pub use ppm::{read_image, write_image};
pub use synth::{
    binarize_mask, derive_matte, gen_synthetic_sample, synth_sample_debug, SynthDetails,
};

use crate::error::{ArganError, Result};
use crate::tensor::Tensor;

/// In-memory image: [0,1] floats, row-major, interleaved channels.
/// On disk these are 8-bit portable pixmaps, so values sit on the k/255 grid
/// whenever the image came from (or is destined for) a file.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub pixels: Vec<f32>,
}

impl Image {
    pub fn new_rgb(width: usize, height: usize, pixels: Vec<f32>) -> Result<Image> {
        if pixels.len() != width * height * 3 {
            return Err(ArganError::Data(format!(
                "rgb image {}x{} needs {} values, got {}",
                width,
                height,
                width * height * 3,
                pixels.len()
            )));
        }
        Ok(Image {
            width,
            height,
            channels: 3,
            pixels,
        })
    }

    pub fn new_gray(width: usize, height: usize, pixels: Vec<f32>) -> Result<Image> {
        if pixels.len() != width * height {
            return Err(ArganError::Data(format!(
                "gray image {}x{} needs {} values, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        Ok(Image {
            width,
            height,
            channels: 1,
            pixels,
        })
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    /// RGB triple at pixel index; gray images replicate their value.
    pub fn rgb_at(&self, i: usize) -> (f32, f32, f32) {
        if self.channels == 3 {
            let b = i * 3;
            (self.pixels[b], self.pixels[b + 1], self.pixels[b + 2])
        } else {
            let v = self.pixels[i];
            (v, v, v)
        }
    }

    /// Gray value at pixel index; RGB images use Rec.601 luminance.
    pub fn gray_at(&self, i: usize) -> f32 {
        if self.channels == 1 {
            self.pixels[i]
        } else {
            let (r, g, b) = self.rgb_at(i);
            0.299 * r + 0.587 * g + 0.114 * b
        }
    }

    pub fn gray_view(&self) -> impl Iterator<Item = f32> + '_ {
        (0..self.n_pixels()).map(|i| self.gray_at(i))
    }

    /// Snap every value to the 8-bit k/255 grid (what writing then reading
    /// a file would produce).
    pub fn quantized(mut self) -> Image {
        for v in &mut self.pixels {
            *v = (*v * 255.0).round().clamp(0.0, 255.0) / 255.0;
        }
        self
    }
}

/// One dataset sample: shadow image I, optional matte M and shadow-free
/// image F (absent for unlabeled data).
#[derive(Clone, Debug)]
pub struct SampleTriplet {
    pub shadow: Image,
    pub matte: Option<Image>,
    pub free: Option<Image>,
}

impl SampleTriplet {
    pub fn is_labeled(&self) -> bool {
        self.matte.is_some() && self.free.is_some()
    }
}

/// Pack images (all the same size and channel count) into an NCHW tensor.
pub fn images_to_tensor(images: &[&Image]) -> Result<Tensor<f32>> {
    let first = images
        .first()
        .ok_or_else(|| ArganError::Data("images_to_tensor: empty batch".into()))?;
    let (w, h, c) = (first.width, first.height, first.channels);
    let mut data = Vec::with_capacity(images.len() * c * h * w);
    for img in images {
        if img.width != w || img.height != h || img.channels != c {
            return Err(ArganError::Data(format!(
                "images_to_tensor: mixed sizes ({}x{}x{} vs {}x{}x{})",
                img.width, img.height, img.channels, w, h, c
            )));
        }
        // Interleaved -> planar.
        for ci in 0..c {
            for p in 0..h * w {
                data.push(img.pixels[p * c + ci]);
            }
        }
    }
    Tensor::from_vec(data, &[images.len(), c, h, w])
}

/// Unpack an NCHW tensor (1 or 3 channels) into per-batch images.
pub fn tensor_to_images(t: &Tensor<f32>) -> Result<Vec<Image>> {
    if t.ndim() != 4 {
        return Err(ArganError::Shape(format!(
            "tensor_to_images expects NCHW, got {:?}",
            t.shape()
        )));
    }
    let (b, c, h, w) = (t.shape()[0], t.shape()[1], t.shape()[2], t.shape()[3]);
    if c != 1 && c != 3 {
        return Err(ArganError::Shape(format!(
            "tensor_to_images supports 1 or 3 channels, got {c}"
        )));
    }
    let data = t.data();
    let mut out = Vec::with_capacity(b);
    for bi in 0..b {
        let mut pixels = vec![0.0f32; h * w * c];
        for ci in 0..c {
            let base = (bi * c + ci) * h * w;
            for p in 0..h * w {
                pixels[p * c + ci] = data[base + p];
            }
        }
        out.push(if c == 3 {
            Image::new_rgb(w, h, pixels)?
        } else {
            Image::new_gray(w, h, pixels)?
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
