//! Pixel accuracy, Chamfer distance and stroke-label accuracy.

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::pipeline::SegMap;
use crate::scalar::Scalar;
use crate::sketch::{CategoryId, Point, VectorSketch, NUM_CATEGORIES};
use crate::ssi::{vote_postprocess, SsiModel};

/// Fraction of cells where `pred` and `gt` agree, restricted to `region`
/// when given.
pub fn p_acc(pred: &SegMap, gt: &SegMap, region: Option<&[bool]>) -> Result<f64, HarnessError> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(HarnessError::DimensionMismatch(format!(
            "prediction {}x{}, ground truth {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    if let Some(mask) = region {
        if mask.len() != gt.labels().len() {
            return Err(HarnessError::DimensionMismatch(format!(
                "region has {} cells, maps have {}",
                mask.len(),
                gt.labels().len()
            )));
        }
    }
    let (mut hit, mut total) = (0usize, 0usize);
    for (i, (a, b)) in pred.labels().iter().zip(gt.labels()).enumerate() {
        if region.is_some_and(|m| !m[i]) {
            continue;
        }
        total += 1;
        hit += usize::from(a == b);
    }
    if total == 0 {
        return Err(HarnessError::EmptyRegion);
    }
    Ok(hit as f64 / total as f64)
}

fn mean_nearest(from: &[Point], to: &[Point]) -> f64 {
    let total: f64 = from
        .iter()
        .map(|p| to.iter().map(|q| p.dist(*q)).fold(f64::INFINITY, f64::min))
        .sum();
    total / from.len() as f64
}

/// Symmetric mean nearest-neighbor distance divided by the canvas width.
pub fn chamfer(a: &[Point], b: &[Point], width: f64) -> Result<f64, HarnessError> {
    if a.is_empty() || b.is_empty() {
        return Err(HarnessError::EmptySet);
    }
    Ok(0.5 * (mean_nearest(a, b) + mean_nearest(b, a)) / width)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryAccuracy {
    pub id: u8,
    pub name: String,
    pub correct_points: usize,
    pub total_points: usize,
    pub accuracy: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricCounts {
    pub sketches: usize,
    pub strokes: usize,
    pub points: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub stroke_accuracy: Option<f64>,
    pub p_acc: Option<f64>,
    pub chamfer: Option<f64>,
    pub per_category: Vec<CategoryAccuracy>,
    pub counts: MetricCounts,
}

#[derive(Clone, Debug)]
struct Tally {
    correct: [usize; NUM_CATEGORIES],
    total: [usize; NUM_CATEGORIES],
    counts: MetricCounts,
}

impl Tally {
    fn new() -> Self {
        Self {
            correct: [0; NUM_CATEGORIES],
            total: [0; NUM_CATEGORIES],
            counts: MetricCounts::default(),
        }
    }

    /// Ground-truth strokes without a label are not scored.
    fn add(&mut self, gt: &VectorSketch, pred: &[Option<CategoryId>]) -> Result<(), HarnessError> {
        if pred.len() != gt.len() {
            return Err(HarnessError::DimensionMismatch(format!(
                "{} predictions for {} strokes",
                pred.len(),
                gt.len()
            )));
        }
        self.counts.sketches += 1;
        for (s, p) in gt.strokes.iter().zip(pred) {
            let Some(truth) = s.label else { continue };
            self.counts.strokes += 1;
            self.counts.points += s.len();
            self.total[truth.index()] += s.len();
            if *p == Some(truth) {
                self.correct[truth.index()] += s.len();
            }
        }
        Ok(())
    }

    fn accuracy(&self) -> Option<f64> {
        let total: usize = self.total.iter().sum();
        (total > 0).then(|| self.correct.iter().sum::<usize>() as f64 / total as f64)
    }

    fn report(&self) -> MetricReport {
        let per_category = CategoryId::all()
            .map(|c| {
                let (hit, n) = (self.correct[c.index()], self.total[c.index()]);
                CategoryAccuracy {
                    id: c.raw(),
                    name: c.name().to_string(),
                    correct_points: hit,
                    total_points: n,
                    accuracy: (n > 0).then(|| hit as f64 / n as f64),
                }
            })
            .collect();
        MetricReport {
            stroke_accuracy: self.accuracy(),
            per_category,
            counts: self.counts.clone(),
            ..MetricReport::default()
        }
    }
}

/// Point-count weighted label accuracy over `gt`'s labeled strokes.
pub fn stroke_accuracy(gt: &[VectorSketch], pred: &[Vec<Option<CategoryId>>]) -> Result<MetricReport, HarnessError> {
    if gt.len() != pred.len() {
        return Err(HarnessError::DimensionMismatch(format!(
            "{} predictions for {} sketches",
            pred.len(),
            gt.len()
        )));
    }
    let mut tally = Tally::new();
    for (g, p) in gt.iter().zip(pred) {
        tally.add(g, p)?;
    }
    Ok(tally.report())
}

/// Labels every sketch with `model` (optionally voting per parent stroke) and
/// scores the result against the ground-truth labels.
pub fn eval_ssi<T: Scalar>(model: &SsiModel<T>, gt: &[VectorSketch], vote: bool) -> Result<MetricReport, HarnessError> {
    const CHUNK: usize = 32;
    let mut preds = Vec::with_capacity(gt.len());
    for chunk in gt.chunks(CHUNK) {
        let refs: Vec<&VectorSketch> = chunk.iter().collect();
        for (sketch, p) in chunk.iter().zip(model.classify_batch(&refs)?) {
            let mut labeled = sketch.clone();
            for (s, pr) in labeled.strokes.iter_mut().zip(&p) {
                s.label = Some(pr.label);
            }
            if vote {
                labeled = vote_postprocess(&labeled);
            }
            preds.push(labeled.labels());
        }
    }
    stroke_accuracy(gt, &preds)
}
