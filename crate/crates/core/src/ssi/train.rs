use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{SsiConfig, SsiError, SsiModel};
use crate::autodiff::{Adam, AdamConfig, Tape};
use crate::pipeline::simplify;
use crate::scalar::Scalar;
use crate::seed::rng_for;
use crate::sketch::VectorSketch;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsiTrainConfig {
    pub model: SsiConfig,
    pub lr: f64,
    /// Per-epoch learning-rate decay.
    pub gamma: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Train on simplified variants (top 3 and top 10 longest strokes per
    /// category) alongside the full sketches.
    pub augment: bool,
}

impl Default for SsiTrainConfig {
    fn default() -> Self {
        Self {
            model: SsiConfig::default(),
            lr: 1e-3,
            gamma: 0.98,
            batch: 10,
            epochs: 30,
            seed: 0,
            augment: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub accuracy: f64,
    pub strokes: usize,
}

/// Model plus optimizer state; one tape per batch.
pub struct SsiTrainer<T> {
    pub model: SsiModel<T>,
    pub adam: Adam<T>,
}

impl<T: Scalar> SsiTrainer<T> {
    pub fn new(config: &SsiTrainConfig) -> Self {
        Self {
            model: SsiModel::new(config.model, config.seed),
            adam: Adam::new(AdamConfig {
                lr: config.lr,
                gamma: config.gamma,
                ..AdamConfig::default()
            }),
        }
    }

    /// One optimizer step on the labeled strokes of `batch`; returns the mean
    /// cross-entropy and the number of correctly predicted strokes.
    pub fn step(&mut self, batch: &[&VectorSketch]) -> Result<(f64, usize), SsiError> {
        let targets: Vec<usize> = batch
            .iter()
            .flat_map(|s| s.strokes.iter().map(|st| st.label.map(|l| l.index())))
            .collect::<Option<_>>()
            .ok_or(SsiError::EmptyDataset)?;
        if targets.is_empty() {
            return Err(SsiError::EmptyDataset);
        }
        let input = self.model.prepare(batch)?;
        let mut tape = Tape::new();
        let logits = self.model.logits(&mut tape, &input)?;
        let loss = tape.softmax_cross_entropy(logits, &targets)?;
        let lv = tape.value(logits);
        let correct = (0..lv.rows())
            .filter(|&r| super::predict_row(lv.row(r)).label.index() == targets[r])
            .count();
        let value = tape.value(loss).item().as_f64();
        tape.backward(loss)?;
        self.adam.step(&mut self.model.store, tape.param_grads());
        Ok((value, correct))
    }
}

fn labeled_only(s: &VectorSketch) -> VectorSketch {
    let strokes = s.strokes.iter().filter(|st| st.label.is_some()).cloned().collect();
    VectorSketch::with_strokes(s.width, s.height, strokes)
}

/// Trains from scratch. Each epoch shuffles the sketches and, with
/// augmentation on, draws each sketch as its full, top-3 or top-10 variant
/// uniformly at random. The callback sees every epoch's log.
pub fn train_ssi<T: Scalar>(
    data: &[VectorSketch],
    config: &SsiTrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<(SsiModel<T>, Vec<EpochLog>), SsiError> {
    let variants: Vec<Vec<VectorSketch>> = data
        .iter()
        .map(labeled_only)
        .filter(|s| !s.is_empty())
        .map(|s| {
            if config.augment {
                vec![simplify(&s, 3), simplify(&s, 10), s]
            } else {
                vec![s]
            }
        })
        .collect();
    if variants.is_empty() {
        return Err(SsiError::EmptyDataset);
    }
    let mut trainer = SsiTrainer::<T>::new(config);
    let mut rng = rng_for(config.seed, "ssi.train");
    let mut logs = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..variants.len()).collect();
    for epoch in 0..config.epochs {
        trainer.adam.set_epoch(epoch as u32);
        order.shuffle(&mut rng);
        let picks: Vec<&VectorSketch> = order
            .iter()
            .map(|&i| &variants[i][rng.random_range(0..variants[i].len())])
            .collect();
        let (mut loss_sum, mut correct, mut strokes) = (0.0, 0, 0);
        for chunk in picks.chunks(config.batch.max(1)) {
            let n: usize = chunk.iter().map(|s| s.len()).sum();
            let (loss, c) = trainer.step(chunk)?;
            loss_sum += loss * n as f64;
            correct += c;
            strokes += n;
        }
        let log = EpochLog {
            epoch,
            lr: trainer.adam.effective_lr(),
            loss: loss_sum / strokes.max(1) as f64,
            accuracy: correct as f64 / strokes.max(1) as f64,
            strokes,
        };
        on_epoch(&log);
        logs.push(log);
    }
    Ok((trainer.model, logs))
}
