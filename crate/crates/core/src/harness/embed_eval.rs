//! Toy data at embedding resolution and evaluation of generated faces.

use super::metrics::{chamfer, MetricCounts, MetricReport};
use super::toy::{ToyItem, TOY_CANVAS};
use super::HarnessError;
use crate::autodiff::Tensor;
use crate::embed::{sketch_channels, AccessoryFlags, EmbedError, EmbedModel, EmbedSample, SegModel, SKETCH_CHANNELS};
use crate::pipeline::{extract_edges, EdgeParams, GrayImage};
use crate::scalar::Scalar;
use crate::sketch::{Point, NUM_SOURCE_LABELS};

fn factor(from: usize, to: usize) -> Result<usize, HarnessError> {
    if to == 0 || from % to != 0 {
        return Err(HarnessError::DimensionMismatch(format!("cannot resample {from} px to {to} px")));
    }
    Ok(from / to)
}

/// Box-filter downsampling of a square RGB buffer.
pub fn downsample_rgb(rgb: &[f64], side: usize, to: usize) -> Result<Vec<f64>, HarnessError> {
    let f = factor(side, to)?;
    let norm = (f * f) as f64;
    let mut out = vec![0.0; to * to * 3];
    for y in 0..side {
        for x in 0..side {
            let o = ((y / f) * to + x / f) * 3;
            for c in 0..3 {
                out[o + c] += rgb[(y * side + x) * 3 + c] / norm;
            }
        }
    }
    Ok(out)
}

/// Majority label of each block; ties go to the smaller label id.
pub fn downsample_labels(ids: &[u8], side: usize, to: usize) -> Result<Vec<u8>, HarnessError> {
    let f = factor(side, to)?;
    let mut out = Vec::with_capacity(to * to);
    for by in 0..to {
        for bx in 0..to {
            let mut counts = [0usize; NUM_SOURCE_LABELS];
            for y in by * f..(by + 1) * f {
                for x in bx * f..(bx + 1) * f {
                    counts[ids[y * side + x] as usize] += 1;
                }
            }
            let mut best = 0;
            for (i, &n) in counts.iter().enumerate() {
                if n > counts[best] {
                    best = i;
                }
            }
            out.push(best as u8);
        }
    }
    Ok(out)
}

pub fn accessory_flags(item: &ToyItem) -> AccessoryFlags {
    AccessoryFlags {
        hat: item.spec.hat,
        glasses: item.spec.glasses,
        earring: item.spec.earring,
        necklace: item.spec.necklace,
    }
}

/// Sketch planes, image and labels of a toy face at `resolution`.
pub fn embed_sample(item: &ToyItem, resolution: usize) -> Result<EmbedSample, HarnessError> {
    let ids: Vec<u8> = item.seg.labels().iter().map(|l| l.id()).collect();
    Ok(EmbedSample {
        raster: sketch_channels(&item.sketch, resolution),
        image: downsample_rgb(&item.image, TOY_CANVAS, resolution)?,
        labels: downsample_labels(&ids, TOY_CANVAS, resolution)?,
        accessories: accessory_flags(item),
    })
}

fn edge_points(rgb: &[f64], side: usize) -> Vec<Point> {
    let edges = extract_edges(&GrayImage::from_rgb(side, side, rgb), &EdgeParams::default());
    let mut pts = Vec::new();
    for y in 0..side {
        for x in 0..side {
            if edges.is_edge(x, y) {
                pts.push(Point::new(x as f64, y as f64));
            }
        }
    }
    pts
}

/// Reconstructs every sample from its sketch with its own face as the
/// appearance reference. Reports pixel accuracy of the segmentation of the
/// generated faces against the ground-truth labels, and the Chamfer distance
/// between edges of the generated and the ground-truth faces (samples where
/// either edge set is empty are skipped).
pub fn eval_embed<T: Scalar>(model: &EmbedModel<T>, seg: &SegModel<T>, samples: &[EmbedSample]) -> Result<MetricReport, HarnessError> {
    let res = model.resolution();
    if seg.resolution() != res {
        return Err(HarnessError::DimensionMismatch(format!(
            "segmentation net at {} px, generator at {res} px",
            seg.resolution()
        )));
    }
    let (mut hit, mut total) = (0usize, 0usize);
    let (mut cd_sum, mut cd_n) = (0.0, 0usize);
    for s in samples {
        let to_t = |v: &[f64], cols: usize| Tensor::<T>::from_vec(v.len() / cols, cols, v.iter().map(|&x| T::of(x)).collect());
        let raster = to_t(&s.raster, SKETCH_CHANNELS);
        let face = to_t(&s.image, 3);
        let codes = model.encode(&raster, Some(&face), 0)?;
        let w = model.fuse(&codes)?;
        let img = model.generate(&w)?;
        let pred = seg.predict(&img).map_err(EmbedError::from)?;
        if pred.len() != s.labels.len() {
            return Err(HarnessError::DimensionMismatch("label map size".into()));
        }
        hit += pred.iter().zip(&s.labels).filter(|(a, b)| a == b).count();
        total += pred.len();
        let (a, b) = (edge_points(&s.image, res), edge_points(&img.to_f64_vec(), res));
        if let Ok(cd) = chamfer(&a, &b, res as f64) {
            cd_sum += cd;
            cd_n += 1;
        }
    }
    if total == 0 {
        return Err(HarnessError::EmptyRegion);
    }
    Ok(MetricReport {
        p_acc: Some(hit as f64 / total as f64),
        chamfer: (cd_n > 0).then(|| cd_sum / cd_n as f64),
        counts: MetricCounts {
            sketches: samples.len(),
            ..MetricCounts::default()
        },
        ..MetricReport::default()
    })
}
