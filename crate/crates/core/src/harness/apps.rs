//! Request-level operations shared by the command line and the service:
//! labeling a sketch, generating a face for it, interpolating between two
//! sketches, and PNG encoding.

use std::io::Cursor;

use serde::{Deserialize, Serialize};

use super::embed_eval::downsample_rgb;
use super::HarnessError;
use crate::autodiff::Tensor;
use crate::embed::{interpolate, sketch_channels, EmbedModel, SKETCH_CHANNELS};
use crate::scalar::Scalar;
use crate::sketch::VectorSketch;
use crate::ssi::{vote_postprocess, SsiModel};

/// A sketch with predicted labels and the classifier's confidence per stroke.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSketch {
    pub sketch: VectorSketch,
    pub confidences: Vec<f64>,
}

/// Labels every stroke; with `vote`, segments of one parent stroke then share
/// the point-weighted majority label. Confidences stay per segment.
pub fn label_sketch<T: Scalar>(model: &SsiModel<T>, sketch: &VectorSketch, vote: bool) -> Result<LabeledSketch, HarnessError> {
    let preds = model.classify(sketch)?;
    let mut out = sketch.clone();
    for (s, p) in out.strokes.iter_mut().zip(&preds) {
        s.label = Some(p.label);
    }
    if vote {
        out = vote_postprocess(&out);
    }
    Ok(LabeledSketch {
        sketch: out,
        confidences: preds.iter().map(|p| p.confidence).collect(),
    })
}

/// Source of the appearance rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Appearance {
    /// Random appearance code from this seed.
    Seed(u64),
    /// Reference face, row-major RGB at model resolution.
    Reference(Vec<f64>),
}

/// Resizes an RGB image to `side x side`: an exact box filter when the source
/// is square and a multiple of `side`, otherwise triangle resampling.
pub fn fit_reference(width: usize, height: usize, rgb: &[f64], side: usize) -> Result<Vec<f64>, HarnessError> {
    if rgb.len() != width * height * 3 {
        return Err(HarnessError::DimensionMismatch(format!(
            "{} values for a {width}x{height} RGB image",
            rgb.len()
        )));
    }
    if width == height && width >= side && width % side == 0 {
        return downsample_rgb(rgb, width, side);
    }
    let img = image::RgbImage::from_raw(width as u32, height as u32, super::toy::rgb_to_bytes(rgb))
        .ok_or_else(|| HarnessError::Format("rgb buffer size".into()))?;
    let small = image::imageops::resize(&img, side as u32, side as u32, image::imageops::FilterType::Triangle);
    Ok(small.as_raw().iter().map(|&b| b as f64 / 255.0).collect())
}

fn tensor<T: Scalar>(data: &[f64], cols: usize) -> Tensor<T> {
    Tensor::from_vec(data.len() / cols, cols, data.iter().map(|&v| T::of(v)).collect())
}

fn fused_code<T: Scalar>(model: &EmbedModel<T>, sketch: &VectorSketch, appearance: &Appearance) -> Result<Tensor<T>, HarnessError> {
    let res = model.resolution();
    let raster = tensor::<T>(&sketch_channels(sketch, res), SKETCH_CHANNELS);
    let codes = match appearance {
        Appearance::Seed(seed) => model.encode(&raster, None, *seed)?,
        Appearance::Reference(rgb) => model.encode(&raster, Some(&tensor::<T>(rgb, 3)), 0)?,
    };
    Ok(model.fuse(&codes)?)
}

/// Generated face for a labeled sketch, row-major RGB in `[0, 1]` at model
/// resolution.
pub fn generate_face<T: Scalar>(model: &EmbedModel<T>, sketch: &VectorSketch, appearance: &Appearance) -> Result<Vec<f64>, HarnessError> {
    let w = fused_code(model, sketch, appearance)?;
    Ok(model.generate(&w)?.to_f64_vec())
}

/// `steps` faces along the straight line between the fused codes of two
/// sketches sharing one appearance; the first and last are the endpoints.
pub fn interpolate_faces<T: Scalar>(
    model: &EmbedModel<T>,
    a: &VectorSketch,
    b: &VectorSketch,
    steps: usize,
    appearance: &Appearance,
) -> Result<Vec<Vec<f64>>, HarnessError> {
    if steps == 0 {
        return Err(HarnessError::Format("interpolation needs at least one step".into()));
    }
    let wa = fused_code(model, a, appearance)?;
    let wb = fused_code(model, b, appearance)?;
    (0..steps)
        .map(|i| {
            let t = if steps == 1 { 0.0 } else { i as f64 / (steps - 1) as f64 };
            let w = interpolate(&wa, &wb, t).map_err(crate::embed::EmbedError::from)?;
            Ok(model.generate(&w)?.to_f64_vec())
        })
        .collect()
}

pub fn encode_png(width: usize, height: usize, rgb: &[f64]) -> Result<Vec<u8>, HarnessError> {
    let img = image::RgbImage::from_raw(width as u32, height as u32, super::toy::rgb_to_bytes(rgb))
        .ok_or_else(|| HarnessError::Format("rgb buffer size".into()))?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| HarnessError::Format(format!("png encode: {e}")))?;
    Ok(out.into_inner())
}

/// Decodes any PNG to `(width, height, rgb)` with values in `[0, 1]`.
pub fn decode_png(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>), HarnessError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| HarnessError::Format(format!("png decode: {e}")))?
        .into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok((w, h, img.as_raw().iter().map(|&b| b as f64 / 255.0).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_keeps_8bit_values() {
        let rgb: Vec<f64> = (0..4 * 3 * 3).map(|i| (i * 7 % 256) as f64 / 255.0).collect();
        let bytes = encode_png(4, 3, &rgb).unwrap();
        let (w, h, back) = decode_png(&bytes).unwrap();
        assert_eq!((w, h), (4, 3));
        for (a, b) in rgb.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(decode_png(b"not a png").is_err());
    }

    #[test]
    fn fit_reference_box_filters_multiples() {
        let rgb = vec![0.5; 8 * 8 * 3];
        assert_eq!(fit_reference(8, 8, &rgb, 4).unwrap(), vec![0.5; 4 * 4 * 3]);
        assert_eq!(fit_reference(6, 5, &vec![0.0; 6 * 5 * 3], 4).unwrap().len(), 4 * 4 * 3);
        assert!(fit_reference(8, 8, &rgb[..10], 4).is_err());
    }
}
