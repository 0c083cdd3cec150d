//! Sketch-to-face embedding: encoders to a shared code plus per-site codes,
//! code fusion, a toy style-modulated generator, the training objective and
//! appearance mixing.

mod codes;
mod conv;
mod encoder;
mod generator;
mod loss;
mod segnet;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Checkpoint, CheckpointEntry, CheckpointError, ParamStore, Shape, Tape, Tensor, Var};
use crate::scalar::Scalar;
use crate::seed::rng_for;
use crate::sketch::{rasterize, VectorSketch, NUM_CATEGORIES};

pub use codes::{
    appearance_latent, check_finite, duplicate_appearance, fuse_codes, interpolate, CodeError, StyleCodes,
};
pub use conv::{avg_pool2, bind, expand_per_image, upsample2, Conv2d, Grid};
pub use encoder::{ConvTrunk, EncoderSet, TrunkWidths, APPEARANCE_SITES, SKETCH_SITES, STYLE_SITES};
pub use generator::{GenBlock, ToyGenerator};
pub use loss::{
    loss_l2, loss_lpips, loss_reg, loss_sfm, loss_terms, loss_total, FrozenNets, LossTerms, LossWeights,
};
pub use segnet::{PerceptualNet, Pyramid, SegFeatureNet, SegModel, SegTrainConfig, Stage, PERCEPTUAL_WIDTHS, SEGNET_WIDTHS};
pub use train::{
    epoch_indices, stack_images, stack_rasters, train_embed, train_segnet, AccessoryFlags, EmbedSample, EmbedTrainConfig, ResampleMultipliers,
    StepLog,
};

pub const EMBED_CHECKPOINT_KIND: &str = "embed";
/// One-hot category planes plus an occupancy plane.
pub const SKETCH_CHANNELS: usize = NUM_CATEGORIES + 1;
const AVG_CODE_ENTRY: &str = "avg_code";

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("input resolution {got} does not match model resolution {expected}")]
    Resolution { expected: usize, got: usize },
    #[error("training set is empty")]
    EmptyDataset,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub resolution: usize,
    pub latent: usize,
    pub generator_channels: usize,
    pub encoder_widths: TrunkWidths,
    /// Latent samples averaged through the mapping head for the average code.
    pub avg_samples: usize,
    pub avg_seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            resolution: 32,
            latent: 512,
            generator_channels: 32,
            encoder_widths: TrunkWidths { base: 16, max: 32 },
            avg_samples: 64,
            avg_seed: 0,
        }
    }
}

/// Encoders, generator and mapping head sharing one parameter store.
pub struct EmbedModel<T> {
    pub config: EmbedConfig,
    pub store: ParamStore<T>,
    pub encoders: EncoderSet,
    pub generator: ToyGenerator,
    avg_latents: Tensor<T>,
    avg: Tensor<T>,
}

/// `resolution^2 x 23` raster: one plane per category, then occupancy.
/// Unlabeled strokes only set the occupancy plane.
pub fn sketch_channels(sketch: &VectorSketch, resolution: usize) -> Vec<f64> {
    let r = rasterize(sketch, (resolution, resolution));
    let mut out = vec![0.0; resolution * resolution * SKETCH_CHANNELS];
    for y in 0..resolution {
        for x in 0..resolution {
            let base = (y * resolution + x) * SKETCH_CHANNELS;
            if r.is_set(x, y) {
                out[base + NUM_CATEGORIES] = 1.0;
            }
            if let Some(c) = r.label(x, y) {
                out[base + c.index()] = 1.0;
            }
        }
    }
    out
}

impl<T: Scalar> EmbedModel<T> {
    pub fn new(config: EmbedConfig, seed: u64) -> Self {
        let mut rng = rng_for(seed, "embed.init");
        let mut store = ParamStore::new();
        let encoders = EncoderSet::new(
            &mut store,
            SKETCH_CHANNELS,
            &config.encoder_widths,
            config.resolution,
            config.latent,
            &mut rng,
        );
        let generator = ToyGenerator::new(
            &mut store,
            config.latent,
            config.generator_channels,
            config.resolution,
            &mut rng,
        );
        let avg_latents = Tensor::randn(
            config.avg_samples.max(1),
            config.latent,
            1.0,
            &mut rng_for(config.avg_seed, "embed.avg"),
        );
        let mut model = Self {
            config,
            store,
            encoders,
            generator,
            avg_latents,
            avg: Tensor::zeros(1, config.latent),
        };
        model.refresh_avg();
        model
    }

    pub fn resolution(&self) -> usize {
        self.config.resolution
    }

    pub fn latent(&self) -> usize {
        self.config.latent
    }

    /// Average code as a differentiable function of the mapping head.
    pub fn avg_code(&self, tape: &mut Tape<T>) -> Result<Var, AutodiffError> {
        self.avg_code_with(&self.store, tape)
    }

    /// [`EmbedModel::avg_code`] with weights taken from `store`, which must
    /// share this model's layout.
    pub fn avg_code_with(&self, store: &ParamStore<T>, tape: &mut Tape<T>) -> Result<Var, AutodiffError> {
        let z = tape.constant(self.avg_latents.clone());
        let w = self.generator.map_latents(tape, store, z)?;
        let n = self.avg_latents.rows();
        let ones = tape.constant(Tensor::full(1, n, T::one() / T::of(n as f64)));
        tape.matmul(ones, w)
    }

    /// Recomputes the cached average code from the current weights.
    pub fn refresh_avg(&mut self) {
        let mut tape = Tape::new();
        let v = self.avg_code(&mut tape).expect("average code shapes are fixed");
        self.avg = tape.value(v).clone();
    }

    pub fn avg(&self) -> &Tensor<T> {
        &self.avg
    }

    fn check_input(&self, rows: usize, cols: usize, what_cols: usize) -> Result<(), EmbedError> {
        let r = self.resolution();
        if rows != r * r || cols != what_cols {
            let got = (rows as f64).sqrt() as usize;
            return Err(EmbedError::Resolution { expected: r, got });
        }
        Ok(())
    }

    /// Ten identical appearance rows from one seeded latent through the
    /// mapping head.
    pub fn sample_appearance(&self, seed: u64) -> Tensor<T> {
        let mut tape = Tape::new();
        let z = tape.constant(appearance_latent(seed, self.latent()));
        let w = self.generator.map_latents(&mut tape, &self.store, z).expect("mapping shapes are fixed");
        duplicate_appearance(tape.value(w))
    }

    /// Codes for one sketch raster (`res^2 x 23`). Without a face image the
    /// appearance rows come from [`EmbedModel::sample_appearance`].
    pub fn encode(&self, raster: &Tensor<T>, face: Option<&Tensor<T>>, appearance_seed: u64) -> Result<StyleCodes<T>, EmbedError> {
        self.check_input(raster.rows(), raster.cols(), SKETCH_CHANNELS)?;
        let mut tape = Tape::new();
        let x = tape.constant(raster.clone());
        let (shared, structure) = self.encoders.encode_sketch(&mut tape, &self.store, x, 1)?;
        let appearance = match face {
            Some(img) => {
                self.check_input(img.rows(), img.cols(), 3)?;
                let f = tape.constant(img.clone());
                let a = self.encoders.encode_face(&mut tape, &self.store, f, 1)?;
                tape.value(a).clone()
            }
            None => self.sample_appearance(appearance_seed),
        };
        Ok(StyleCodes::from_tensors(
            tape.value(shared),
            tape.value(structure),
            &appearance,
        )?)
    }

    pub fn fuse(&self, codes: &StyleCodes<T>) -> Result<Tensor<T>, EmbedError> {
        Ok(fuse_codes(codes, &self.avg)?)
    }

    /// Image for an 18-row code, `res^2 x 3` clamped to `[0, 1]`.
    pub fn generate(&self, w: &Tensor<T>) -> Result<Tensor<T>, EmbedError> {
        check_finite(w)?;
        if w.rows() != STYLE_SITES || w.cols() != self.latent() {
            return Err(CodeError::Shape {
                what: "fused code",
                expected_rows: STYLE_SITES,
                expected_cols: self.latent(),
                rows: w.rows(),
                cols: w.cols(),
            }
            .into());
        }
        let mut tape = Tape::new();
        let c = tape.constant(w.clone());
        let img = self.generator.forward(&mut tape, &self.store, c, 1)?;
        Ok(tape.value(img).map(|v| v.max(T::zero()).min(T::one())))
    }

    /// Training forward pass: sketch rasters and face images stacked by
    /// image. Returns the unclamped reconstruction, the fused codes and the
    /// average code.
    pub fn forward_batch(
        &self,
        tape: &mut Tape<T>,
        rasters: Var,
        faces: Var,
        batch: usize,
    ) -> Result<(Var, Var, Var), AutodiffError> {
        self.forward_batch_with(&self.store, tape, rasters, faces, batch)
    }

    /// [`EmbedModel::forward_batch`] with weights taken from `store`.
    pub fn forward_batch_with(
        &self,
        store: &ParamStore<T>,
        tape: &mut Tape<T>,
        rasters: Var,
        faces: Var,
        batch: usize,
    ) -> Result<(Var, Var, Var), AutodiffError> {
        let (shared, structure) = self.encoders.encode_sketch(tape, store, rasters, batch)?;
        let appearance = self.encoders.encode_face(tape, store, faces, batch)?;
        let avg = self.avg_code_with(store, tape)?;
        let w = fuse_on_tape(tape, shared, structure, appearance, avg, batch)?;
        let xhat = self.generator.forward(tape, store, w, batch)?;
        Ok((xhat, w, avg))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::new(
            EMBED_CHECKPOINT_KIND,
            serde_json::to_value(self.config).expect("config serializes"),
        );
        ckpt.entries = self.store.entries();
        ckpt.entries.push(CheckpointEntry {
            name: AVG_CODE_ENTRY.to_string(),
            shape: Shape::new(1, self.latent()),
            data: self.avg.to_f64_vec(),
        });
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, EmbedError> {
        ckpt.expect_kind(EMBED_CHECKPOINT_KIND)?;
        let config: EmbedConfig = serde_json::from_value(ckpt.meta.clone())
            .map_err(|e| CheckpointError::Schema(format!("embed config: {e}")))?;
        let mut model = Self::new(config, 0);
        model.store.load_entries(&ckpt.entries)?;
        model.refresh_avg();
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbedError> {
        Ok(self.to_checkpoint().save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// Fused codes on the tape, `(batch*18) x D`: average plus shared code on
/// every row, plus each image's structure rows then appearance rows.
pub fn fuse_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    shared: Var,
    structure: Var,
    appearance: Var,
    avg: Var,
    batch: usize,
) -> Result<Var, AutodiffError> {
    let mut parts = Vec::with_capacity(2 * batch);
    for b in 0..batch {
        parts.push(tape.slice_rows(structure, b * SKETCH_SITES, SKETCH_SITES)?);
        parts.push(tape.slice_rows(appearance, b * APPEARANCE_SITES, APPEARANCE_SITES)?);
    }
    let per_site = tape.concat_rows(&parts)?;
    let idx: Vec<Option<usize>> = (0..batch * STYLE_SITES).map(|r| Some(r / STYLE_SITES)).collect();
    let shared = tape.gather_rows(shared, idx.into())?;
    let w = tape.add(per_site, shared)?;
    tape.add_row(w, avg)
}
