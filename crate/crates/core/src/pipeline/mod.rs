//! Raster-to-vector sketch synthesis from face-parsing maps and edge maps.

mod contour;
mod edges;
mod thin;
mod vectorize;

use std::path::Path;

use thiserror::Error;

use crate::sketch::{CategoryId, SketchError, SourceLabel, VectorSketch};

pub use contour::{dilation_radius, extract_contour, merge_maps};
pub use edges::{extract_edges, EdgeParams};
pub use thin::{thin, zhang_suen};
pub use vectorize::{simplify, vectorize};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error("image {path}: {msg}")]
    Image { path: String, msg: String },
}

/// Grid of source labels, one per pixel, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegMap {
    width: usize,
    height: usize,
    labels: Vec<SourceLabel>,
}

impl SegMap {
    pub fn filled(width: usize, height: usize, label: SourceLabel) -> Self {
        Self {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    pub fn from_ids(width: usize, height: usize, ids: &[u8]) -> Result<Self, PipelineError> {
        if ids.len() != width * height {
            return Err(PipelineError::DimensionMismatch(width, height, ids.len(), 1));
        }
        let labels = ids.iter().map(|&i| SourceLabel::from_id(i)).collect::<Result<_, _>>()?;
        Ok(Self { width, height, labels })
    }

    /// Reads a grayscale PNG whose pixel values are source label ids.
    pub fn load_png(path: &Path) -> Result<Self, PipelineError> {
        let img = image::open(path)
            .map_err(|e| PipelineError::Image {
                path: path.display().to_string(),
                msg: e.to_string(),
            })?
            .into_luma8();
        Self::from_ids(img.width() as usize, img.height() as usize, img.as_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<(), PipelineError> {
        let ids: Vec<u8> = self.labels.iter().map(|l| l.id()).collect();
        image::GrayImage::from_raw(self.width as u32, self.height as u32, ids)
            .expect("buffer matches dimensions")
            .save(path)
            .map_err(|e| PipelineError::Image {
                path: path.display().to_string(),
                msg: e.to_string(),
            })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> SourceLabel {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: SourceLabel) {
        self.labels[y * self.width + x] = label;
    }

    pub fn labels(&self) -> &[SourceLabel] {
        &self.labels
    }

    pub fn contains(&self, label: SourceLabel) -> bool {
        self.labels.contains(&label)
    }
}

/// Binary edge grid with optional per-pixel categories.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeMap {
    width: usize,
    height: usize,
    edges: Vec<bool>,
    labels: Vec<Option<CategoryId>>,
}

impl EdgeMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            edges: vec![false; width * height],
            labels: vec![None; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_edge(&self, x: usize, y: usize) -> bool {
        self.edges[y * self.width + x]
    }

    pub fn label(&self, x: usize, y: usize) -> Option<CategoryId> {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: Option<CategoryId>) {
        let i = y * self.width + x;
        self.edges[i] = true;
        self.labels[i] = label;
    }

    pub fn set_label(&mut self, x: usize, y: usize, label: Option<CategoryId>) {
        self.labels[y * self.width + x] = label;
    }

    pub fn count(&self) -> usize {
        self.edges.iter().filter(|&&e| e).count()
    }

    /// Labels every edge pixel with the remapped region under it.
    pub fn label_from(&mut self, seg: &SegMap) {
        for y in 0..self.height {
            for x in 0..self.width {
                if self.is_edge(x, y) {
                    self.set_label(x, y, seg.get(x, y).remap());
                }
            }
        }
    }
}

/// Grayscale image with intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "gray image size mismatch");
        Self { width, height, data }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Luma of an RGB buffer of `[0, 1]` triples.
    pub fn from_rgb(width: usize, height: usize, rgb: &[f64]) -> Self {
        let data = rgb
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect();
        Self::new(width, height, data)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let img = image::open(path)
            .map_err(|e| PipelineError::Image {
                path: path.display().to_string(),
                msg: e.to_string(),
            })?
            .into_luma8();
        let data = img.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
        Ok(Self::new(img.width() as usize, img.height() as usize, data))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SynthOptions {
    pub contour_only: bool,
    pub simplify: Option<usize>,
    pub edges: EdgeParams,
}

/// Full synthesis: contour (plus labeled edges unless contour-only), merge,
/// thin, vectorize and optional simplification.
pub fn synthesize(seg: &SegMap, image: Option<&GrayImage>, opts: &SynthOptions) -> Result<VectorSketch, PipelineError> {
    let contour = extract_contour(seg);
    let mut edges = match (opts.contour_only, image) {
        (false, Some(img)) => extract_edges(img, &opts.edges),
        _ => EdgeMap::new(seg.width(), seg.height()),
    };
    edges.label_from(seg);
    let thinned = merge_maps(&contour, &edges)?;
    let sketch = vectorize(&thinned);
    Ok(match opts.simplify {
        Some(k) => simplify(&sketch, k),
        None => sketch,
    })
}
