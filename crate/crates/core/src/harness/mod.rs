//! Toy dataset generation and evaluation metrics.

pub mod apps;
pub mod embed_eval;
pub mod metrics;
pub mod toy;

use thiserror::Error;

use crate::embed::EmbedError;
use crate::pipeline::PipelineError;
use crate::sketch::SketchError;
use crate::ssi::SsiError;

pub use apps::{decode_png, encode_png, fit_reference, generate_face, interpolate_faces, label_sketch, Appearance, LabeledSketch};
pub use embed_eval::{accessory_flags, downsample_labels, downsample_rgb, embed_sample, eval_embed};
pub use metrics::{chamfer, eval_ssi, p_acc, stroke_accuracy, CategoryAccuracy, MetricCounts, MetricReport};
pub use toy::{gen_toy_dataset, AccessoryRates, Accessory, ToyConfig, ToyDataset, ToyFaceSpec, ToyItem, TOY_CANVAS};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("evaluation region is empty")]
    EmptyRegion,
    #[error("point set is empty")]
    EmptySet,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Ssi(#[from] SsiError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}
