//! Stroke-level semantic labeling: a bidirectional GRU encodes each stroke,
//! a k-nearest-neighbor stroke graph with learned affinities propagates
//! context, and an MLP classifies every stroke.

mod ssem;
mod stem;
mod train;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Checkpoint, CheckpointError, ParamStore, Tape, Var};
use crate::scalar::Scalar;
use crate::seed::rng_for;
use crate::sketch::{centroid, CategoryId, Point, SketchError, VectorSketch, NUM_CATEGORIES};

pub use ssem::{GruCell, PackedSequences, Ssem};
pub use stem::{angle, Stem, StemDims, StrokeGraph, TagLayer};
pub use train::{train_ssi, EpochLog, SsiTrainConfig, SsiTrainer};

pub const CHECKPOINT_KIND: &str = "ssi";

#[derive(Debug, Error)]
pub enum SsiError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("training set has no labeled strokes")]
    EmptyDataset,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsiConfig {
    /// GRU hidden size per direction.
    pub hidden: usize,
    pub gru_layers: usize,
    pub k_nn: usize,
    pub hops: usize,
    pub graph_layers: usize,
    pub graph_dim: usize,
    pub edge_hidden: usize,
    pub classifier_hidden: usize,
    /// Divide coordinates by the canvas size before encoding.
    pub normalize: bool,
}

impl Default for SsiConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            gru_layers: 3,
            k_nn: 5,
            hops: 3,
            graph_layers: 2,
            graph_dim: 64,
            edge_hidden: 16,
            classifier_hidden: 64,
            normalize: true,
        }
    }
}

/// Per-stroke prediction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: CategoryId,
    pub confidence: f64,
}

/// Encoder inputs for a batch of sketches.
#[derive(Clone, Debug)]
pub struct SsiInput<T> {
    pub sequences: PackedSequences<T>,
    pub graph: StrokeGraph,
    pub strokes_per_sketch: Vec<usize>,
}

impl<T> SsiInput<T> {
    pub fn num_strokes(&self) -> usize {
        self.graph.num_vertices()
    }
}

pub struct SsiModel<T> {
    pub config: SsiConfig,
    pub store: ParamStore<T>,
    pub ssem: Ssem,
    pub stem: Stem,
}

impl<T: Scalar> SsiModel<T> {
    pub fn new(config: SsiConfig, seed: u64) -> Self {
        let mut rng = rng_for(seed, "ssi.init");
        let mut store = ParamStore::new();
        let ssem = Ssem::new(&mut store, 2, config.hidden, config.gru_layers, &mut rng);
        let stem = Stem::new(
            &mut store,
            StemDims {
                inputs: ssem.output_dim(),
                edge_hidden: config.edge_hidden,
                graph_dim: config.graph_dim,
                graph_layers: config.graph_layers,
                hops: config.hops,
                classifier_hidden: config.classifier_hidden,
                classes: NUM_CATEGORIES,
            },
            &mut rng,
        );
        Self {
            config,
            store,
            ssem,
            stem,
        }
    }

    fn scale(&self, sketch: &VectorSketch) -> (f64, f64) {
        if self.config.normalize {
            (1.0 / sketch.width as f64, 1.0 / sketch.height as f64)
        } else {
            (1.0, 1.0)
        }
    }

    pub fn prepare(&self, sketches: &[&VectorSketch]) -> Result<SsiInput<T>, SsiError> {
        let mut seqs = Vec::new();
        let mut graphs = Vec::new();
        let mut counts = Vec::new();
        for sketch in sketches {
            let (sx, sy) = self.scale(sketch);
            let mut centroids = Vec::with_capacity(sketch.len());
            for s in &sketch.strokes {
                let c = centroid(s)?;
                centroids.push(Point::new(c.x * sx, c.y * sy));
                seqs.push(s.points.iter().map(|p| vec![T::of(p.x * sx), T::of(p.y * sy)]).collect());
            }
            graphs.push(StrokeGraph::build(&centroids, self.config.k_nn));
            counts.push(sketch.len());
        }
        Ok(SsiInput {
            sequences: PackedSequences::new(&seqs, 2)?,
            graph: StrokeGraph::union(&graphs),
            strokes_per_sketch: counts,
        })
    }

    /// Class logits, one row per stroke of the batch in input order.
    pub fn logits(&self, tape: &mut Tape<T>, input: &SsiInput<T>) -> Result<Var, AutodiffError> {
        let features = self.ssem.forward(tape, &self.store, &input.sequences)?;
        self.stem.forward(tape, &self.store, features, &input.graph)
    }

    pub fn classify(&self, sketch: &VectorSketch) -> Result<Vec<Prediction>, SsiError> {
        Ok(self.classify_batch(&[sketch])?.pop().unwrap_or_default())
    }

    pub fn classify_batch(&self, sketches: &[&VectorSketch]) -> Result<Vec<Vec<Prediction>>, SsiError> {
        let nonempty: Vec<&VectorSketch> = sketches.iter().copied().filter(|s| !s.is_empty()).collect();
        let mut flat = Vec::new();
        if !nonempty.is_empty() {
            let input = self.prepare(&nonempty)?;
            let mut tape = Tape::new();
            let logits = self.logits(&mut tape, &input)?;
            let lv = tape.value(logits);
            flat = (0..lv.rows()).map(|r| predict_row(lv.row(r))).collect();
        }
        let mut it = flat.into_iter();
        Ok(sketches.iter().map(|s| it.by_ref().take(s.len()).collect()).collect())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::new(CHECKPOINT_KIND, serde_json::to_value(self.config).expect("config serializes"));
        ckpt.entries = self.store.entries();
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, SsiError> {
        ckpt.expect_kind(CHECKPOINT_KIND)?;
        let config: SsiConfig = serde_json::from_value(ckpt.meta.clone())
            .map_err(|e| CheckpointError::Schema(format!("ssi config: {e}")))?;
        let mut model = Self::new(config, 0);
        model.store.load_entries(&ckpt.entries)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), SsiError> {
        Ok(self.to_checkpoint().save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, SsiError> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// Softmax argmax; equal logits resolve to the smallest class id.
pub fn predict_row<T: Scalar>(logits: &[T]) -> Prediction {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    let m = logits[best];
    let z: T = logits.iter().map(|&v| (v - m).exp()).sum();
    Prediction {
        label: CategoryId::new(best as u8).expect("classifier has 22 outputs"),
        confidence: (T::one() / z).as_f64(),
    }
}

/// Point-count weighted majority per parent stroke; ties go to the smaller
/// class id. Returns one label per segment.
pub fn vote(parents: &[u64], sizes: &[usize], labels: &[CategoryId]) -> Vec<CategoryId> {
    let mut tally: BTreeMap<u64, BTreeMap<CategoryId, usize>> = BTreeMap::new();
    for ((&p, &n), &l) in parents.iter().zip(sizes).zip(labels) {
        *tally.entry(p).or_default().entry(l).or_default() += n;
    }
    let winner: BTreeMap<u64, CategoryId> = tally
        .into_iter()
        .map(|(p, counts)| {
            // BTreeMap iterates ids ascending, so strict > keeps the smallest on ties
            let mut best: Option<(CategoryId, usize)> = None;
            for (l, n) in counts {
                if best.is_none_or(|(_, bn)| n > bn) {
                    best = Some((l, n));
                }
            }
            (p, best.expect("nonempty tally").0)
        })
        .collect();
    parents.iter().map(|p| winner[p]).collect()
}

/// Applies [`vote`] to a labeled sketch; unlabeled segments do not vote but
/// take their parent's winning label when one exists.
pub fn vote_postprocess(sketch: &VectorSketch) -> VectorSketch {
    let labeled: Vec<usize> = (0..sketch.len()).filter(|&i| sketch.strokes[i].label.is_some()).collect();
    let parents: Vec<u64> = labeled.iter().map(|&i| sketch.strokes[i].parent_id).collect();
    let sizes: Vec<usize> = labeled.iter().map(|&i| sketch.strokes[i].len()).collect();
    let labels: Vec<CategoryId> = labeled.iter().map(|&i| sketch.strokes[i].label.expect("filtered")).collect();
    let voted = vote(&parents, &sizes, &labels);
    let winner: BTreeMap<u64, CategoryId> = parents.into_iter().zip(voted).collect();
    let mut out = sketch.clone();
    for s in &mut out.strokes {
        if let Some(&l) = winner.get(&s.parent_id) {
            s.label = Some(l);
        }
    }
    out
}
