//! Class-rebalancing resampler, segmentation pre-training and the joint
//! encoder/generator training loop.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_terms, loss_total, FrozenNets, LossWeights};
use super::segnet::{SegModel, SegTrainConfig};
use super::{EmbedConfig, EmbedError, EmbedModel, SKETCH_CHANNELS};
use crate::autodiff::{Adam, AdamConfig, Tape, Tensor};
use crate::scalar::Scalar;
use crate::seed::rng_for;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessoryFlags {
    pub hat: bool,
    pub glasses: bool,
    pub earring: bool,
    pub necklace: bool,
}

/// Per-epoch repetition of items showing each scarce accessory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResampleMultipliers {
    pub hat: usize,
    pub glasses: usize,
    pub earring: usize,
    pub necklace: usize,
}

impl Default for ResampleMultipliers {
    fn default() -> Self {
        Self {
            hat: 23,
            glasses: 19,
            earring: 3,
            necklace: 16,
        }
    }
}

impl ResampleMultipliers {
    pub const NONE: Self = Self {
        hat: 1,
        glasses: 1,
        earring: 1,
        necklace: 1,
    };

    /// Largest multiplier among the accessories present, 1 for none.
    pub fn multiplier(&self, flags: &AccessoryFlags) -> usize {
        [
            (flags.hat, self.hat),
            (flags.glasses, self.glasses),
            (flags.earring, self.earring),
            (flags.necklace, self.necklace),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|&(_, m)| m)
        .max()
        .unwrap_or(1)
        .max(1)
    }
}

/// One epoch's shuffled item order with every item repeated by its multiplier.
pub fn epoch_indices<R: Rng + ?Sized>(flags: &[AccessoryFlags], mult: &ResampleMultipliers, rng: &mut R) -> Vec<usize> {
    let mut out: Vec<usize> = flags
        .iter()
        .enumerate()
        .flat_map(|(i, f)| std::iter::repeat_n(i, mult.multiplier(f)))
        .collect();
    out.shuffle(rng);
    out
}

/// One paired training example at model resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbedSample {
    /// `res^2 x 23` sketch planes.
    pub raster: Vec<f64>,
    /// `res^2 x 3` RGB in `[0, 1]`.
    pub image: Vec<f64>,
    /// Source label id per pixel.
    pub labels: Vec<u8>,
    pub accessories: AccessoryFlags,
}

fn stack<T: Scalar>(samples: &[EmbedSample], idx: &[usize], cols: usize, field: impl Fn(&EmbedSample) -> &[f64]) -> Tensor<T> {
    let data: Vec<T> = idx.iter().flat_map(|&i| field(&samples[i]).iter().map(|&v| T::of(v))).collect();
    Tensor::from_vec(data.len() / cols, cols, data)
}

pub fn stack_images<T: Scalar>(samples: &[EmbedSample], idx: &[usize]) -> Tensor<T> {
    stack(samples, idx, 3, |s| &s.image)
}

pub fn stack_rasters<T: Scalar>(samples: &[EmbedSample], idx: &[usize]) -> Tensor<T> {
    stack(samples, idx, SKETCH_CHANNELS, |s| &s.raster)
}

/// Cross-entropy training of the segmentation network on image/label pairs.
/// Returns the model and the mean loss per epoch.
pub fn train_segnet<T: Scalar>(
    samples: &[EmbedSample],
    config: &SegTrainConfig,
) -> Result<(SegModel<T>, Vec<f64>), EmbedError> {
    if samples.is_empty() {
        return Err(EmbedError::EmptyDataset);
    }
    let mut model = SegModel::<T>::new(config.resolution, config.seed);
    let mut adam = Adam::new(AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    });
    let mut rng = rng_for(config.seed, "segnet.train");
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut n) = (0.0, 0usize);
        for chunk in order.chunks(config.batch.max(1)) {
            let images = stack_images::<T>(samples, chunk);
            let targets: Vec<usize> = chunk
                .iter()
                .flat_map(|&i| samples[i].labels.iter().map(|&l| l as usize))
                .collect();
            let mut tape = Tape::new();
            let x = tape.constant(images);
            let stages = model.net.features(&mut tape, &model.store, x, chunk.len(), false)?;
            let logits = model.net.logits(&mut tape, &model.store, &stages, false)?;
            let loss = tape.softmax_cross_entropy(logits, &targets)?;
            tape.backward(loss)?;
            total += tape.value(loss).item().as_f64() * chunk.len() as f64;
            n += chunk.len();
            adam.step(&mut model.store, tape.param_grads());
        }
        losses.push(total / n as f64);
    }
    Ok((model, losses))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedTrainConfig {
    pub model: EmbedConfig,
    pub weights: LossWeights,
    pub multipliers: ResampleMultipliers,
    pub lr: f64,
    pub batch: usize,
    pub steps: usize,
    pub seed: u64,
    pub perceptual_seed: u64,
}

impl Default for EmbedTrainConfig {
    fn default() -> Self {
        Self {
            model: EmbedConfig::default(),
            weights: LossWeights::default(),
            multipliers: ResampleMultipliers::default(),
            lr: 1e-3,
            batch: 8,
            steps: 2000,
            seed: 0,
            perceptual_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub loss: f64,
    /// L2, perceptual, semantic feature, coarse and fine regularization.
    pub terms: [f64; 5],
}

/// Joint end-to-end training of the encoders, generator and mapping head;
/// each sketch is paired with its own face as the appearance reference.
pub fn train_embed<T: Scalar>(
    samples: &[EmbedSample],
    frozen: &FrozenNets<T>,
    config: &EmbedTrainConfig,
    mut on_step: impl FnMut(&StepLog),
) -> Result<(EmbedModel<T>, Vec<StepLog>), EmbedError> {
    if samples.is_empty() {
        return Err(EmbedError::EmptyDataset);
    }
    let mut model = EmbedModel::<T>::new(config.model, config.seed);
    let res = model.resolution();
    for s in samples {
        if s.image.len() != res * res * 3 || s.raster.len() != res * res * SKETCH_CHANNELS {
            let got = ((s.image.len() / 3) as f64).sqrt() as usize;
            return Err(EmbedError::Resolution { expected: res, got });
        }
    }
    let mut adam = Adam::new(AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    });
    let flags: Vec<AccessoryFlags> = samples.iter().map(|s| s.accessories).collect();
    let mut rng = rng_for(config.seed, "embed.train");
    let mut queue: Vec<usize> = Vec::new();
    let mut logs = Vec::with_capacity(config.steps);
    let batch = config.batch.max(1);
    for step in 0..config.steps {
        let mut idx = Vec::with_capacity(batch);
        while idx.len() < batch {
            if queue.is_empty() {
                queue = epoch_indices(&flags, &config.multipliers, &mut rng);
                queue.reverse();
            }
            idx.push(queue.pop().expect("refilled"));
        }
        let mut tape = Tape::new();
        let rasters = tape.constant(stack_rasters(samples, &idx));
        let faces = tape.constant(stack_images(samples, &idx));
        let (xhat, w, avg) = model.forward_batch(&mut tape, rasters, faces, batch)?;
        let terms = loss_terms(&mut tape, frozen, faces, xhat, w, avg, batch)?;
        let loss = loss_total(&mut tape, &terms, &config.weights)?;
        tape.backward(loss)?;
        let log = StepLog {
            step,
            loss: tape.value(loss).item().as_f64(),
            terms: terms.values(&tape),
        };
        adam.step(&mut model.store, tape.param_grads());
        on_step(&log);
        logs.push(log);
    }
    model.refresh_avg();
    Ok((model, logs))
}
