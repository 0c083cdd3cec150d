//! Semantic sketch interpretation and sketch-to-face embedding at desk scale.
//!
//! Numeric code is generic over [`scalar::Scalar`]; the aliases below fix the
//! precision for callers that do not care.

pub mod autodiff;
pub mod embed;
pub mod harness;
pub mod nn;
pub mod pipeline;
pub mod scalar;
pub mod seed;
pub mod sketch;
pub mod ssi;

pub type Tensor = autodiff::Tensor<f64>;
pub type Tensor32 = autodiff::Tensor<f32>;
pub type ParamStore = autodiff::ParamStore<f64>;
pub type ParamStore32 = autodiff::ParamStore<f32>;
pub type Tape = autodiff::Tape<f64>;
pub type Tape32 = autodiff::Tape<f32>;
pub type SsiModel = ssi::SsiModel<f64>;
pub type SsiModel32 = ssi::SsiModel<f32>;
pub type EmbedModel = embed::EmbedModel<f64>;
pub type EmbedModel32 = embed::EmbedModel<f32>;
pub type SegModel = embed::SegModel<f64>;
pub type SegModel32 = embed::SegModel<f32>;
