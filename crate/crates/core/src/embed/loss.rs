//! Reconstruction, perceptual, semantic feature matching and latent
//! regularization losses, each averaged over the batch.

use serde::{Deserialize, Serialize};

use super::encoder::{SKETCH_SITES, STYLE_SITES};
use super::segnet::{PerceptualNet, SegFeatureNet, Stage};
use crate::autodiff::{AutodiffError, ParamStore, Tape, Var};
use crate::scalar::Scalar;

type Result<T> = std::result::Result<T, AutodiffError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub l2: f64,
    pub lpips: f64,
    pub sfm: f64,
    pub reg_coarse: f64,
    pub reg_fine: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            l2: 0.1,
            lpips: 0.8,
            sfm: 1.0,
            reg_coarse: 0.00025,
            reg_fine: 0.0025,
        }
    }
}

impl LossWeights {
    pub fn as_array(&self) -> [f64; 5] {
        [self.l2, self.lpips, self.sfm, self.reg_coarse, self.reg_fine]
    }

    /// Weighted sum of plain term values, accumulated in term order.
    pub fn combine(&self, terms: [f64; 5]) -> f64 {
        self.as_array().iter().zip(terms).fold(0.0, |acc, (w, t)| acc + w * t)
    }
}

/// The five terms of the training objective for one batch.
#[derive(Clone, Copy, Debug)]
pub struct LossTerms {
    pub l2: Var,
    pub lpips: Var,
    pub sfm: Var,
    pub reg_coarse: Var,
    pub reg_fine: Var,
}

impl LossTerms {
    pub fn as_array(&self) -> [Var; 5] {
        [self.l2, self.lpips, self.sfm, self.reg_coarse, self.reg_fine]
    }

    pub fn values<T: Scalar>(&self, tape: &Tape<T>) -> [f64; 5] {
        self.as_array().map(|v| tape.value(v).item().as_f64())
    }
}

/// Mean over images of `scale * ||d_b||`, where `d` stacks `batch` equal
/// row blocks.
fn batch_norm_mean<T: Scalar>(tape: &mut Tape<T>, d: Var, batch: usize, scale: f64) -> Result<Var> {
    let rows = tape.shape(d).rows;
    if batch == 0 || rows % batch != 0 {
        return Err(AutodiffError::Invalid {
            op: "loss",
            msg: format!("{rows} rows do not split into {batch} images"),
        });
    }
    let per = rows / batch;
    let mut acc: Option<Var> = None;
    for b in 0..batch {
        let part = tape.slice_rows(d, b * per, per)?;
        let n = tape.norm(part);
        acc = Some(match acc {
            Some(a) => tape.add(a, n)?,
            None => n,
        });
    }
    Ok(tape.scale(acc.expect("batch is nonzero"), T::of(scale / batch as f64)))
}

/// Root-mean-square pixel difference.
pub fn loss_l2<T: Scalar>(tape: &mut Tape<T>, x: Var, xhat: Var, batch: usize) -> Result<Var> {
    let d = tape.sub(x, xhat)?;
    let per_image = tape.value(d).len() / batch.max(1);
    batch_norm_mean(tape, d, batch, 1.0 / (per_image as f64).sqrt())
}

fn stage_distance<T: Scalar>(
    tape: &mut Tape<T>,
    stages: &[Stage],
    batch: usize,
    weight: impl Fn(&Stage) -> f64,
) -> Result<Var> {
    let mut acc: Option<Var> = None;
    for s in stages {
        let half = s.grid.rows() / 2;
        let a = tape.slice_rows(s.value, 0, half)?;
        let b = tape.slice_rows(s.value, half, half)?;
        let d = tape.sub(a, b)?;
        let term = batch_norm_mean(tape, d, batch, weight(s))?;
        acc = Some(match acc {
            Some(prev) => tape.add(prev, term)?,
            None => term,
        });
    }
    Ok(acc.expect("pyramid has stages"))
}

/// Feature distance under the fixed random pyramid, each stage as a
/// root-mean-square difference, summed over stages.
pub fn loss_lpips<T: Scalar>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    net: &PerceptualNet,
    x: Var,
    xhat: Var,
    batch: usize,
) -> Result<Var> {
    let both = tape.concat_rows(&[x, xhat])?;
    let stages = net.features(tape, store, both, 2 * batch)?;
    stage_distance(tape, &stages, batch, |s| 1.0 / ((s.grid.pixels() * s.channels) as f64).sqrt())
}

/// Sum over segmentation stages of `||F_i(x) - F_i(xhat)|| / (C_i H_i W_i)`
/// with the network frozen.
pub fn loss_sfm<T: Scalar>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    segnet: &SegFeatureNet,
    x: Var,
    xhat: Var,
    batch: usize,
) -> Result<Var> {
    let both = tape.concat_rows(&[x, xhat])?;
    let stages = segnet.features(tape, store, both, 2 * batch, true)?;
    stage_distance(tape, &stages, batch, |s| 1.0 / (s.grid.pixels() * s.channels) as f64)
}

/// Distances of the structure rows and of the appearance rows of each
/// 18-row code from the average code.
pub fn loss_reg<T: Scalar>(tape: &mut Tape<T>, w: Var, avg: Var, batch: usize) -> Result<(Var, Var)> {
    let rows = tape.shape(w).rows;
    if rows != batch * STYLE_SITES {
        return Err(AutodiffError::Invalid {
            op: "loss_reg",
            msg: format!("expected {} code rows, got {rows}", batch * STYLE_SITES),
        });
    }
    let neg = tape.scale(avg, -T::one());
    let centered = tape.add_row(w, neg)?;
    let mut coarse = Vec::with_capacity(batch);
    let mut fine = Vec::with_capacity(batch);
    for b in 0..batch {
        coarse.push(tape.slice_rows(centered, b * STYLE_SITES, SKETCH_SITES)?);
        fine.push(tape.slice_rows(centered, b * STYLE_SITES + SKETCH_SITES, STYLE_SITES - SKETCH_SITES)?);
    }
    let coarse = tape.concat_rows(&coarse)?;
    let fine = tape.concat_rows(&fine)?;
    Ok((
        batch_norm_mean(tape, coarse, batch, 1.0)?,
        batch_norm_mean(tape, fine, batch, 1.0)?,
    ))
}

/// Weighted sum of the five terms.
pub fn loss_total<T: Scalar>(tape: &mut Tape<T>, terms: &LossTerms, weights: &LossWeights) -> Result<Var> {
    let mut acc: Option<Var> = None;
    for (t, w) in terms.as_array().into_iter().zip(weights.as_array()) {
        let s = tape.scale(t, T::of(w));
        acc = Some(match acc {
            Some(a) => tape.add(a, s)?,
            None => s,
        });
    }
    Ok(acc.expect("five terms"))
}

/// Networks whose weights stay fixed while the embedding trains.
pub struct FrozenNets<T> {
    pub perceptual: PerceptualNet,
    pub perceptual_store: ParamStore<T>,
    pub segnet: SegFeatureNet,
    pub segnet_store: ParamStore<T>,
}

/// Builds all five terms for a target batch `x`, its reconstruction `xhat`
/// and the fused codes `w`.
#[allow(clippy::too_many_arguments)]
pub fn loss_terms<T: Scalar>(
    tape: &mut Tape<T>,
    frozen: &FrozenNets<T>,
    x: Var,
    xhat: Var,
    w: Var,
    avg: Var,
    batch: usize,
) -> Result<LossTerms> {
    let l2 = loss_l2(tape, x, xhat, batch)?;
    let lpips = loss_lpips(tape, &frozen.perceptual_store, &frozen.perceptual, x, xhat, batch)?;
    let sfm = loss_sfm(tape, &frozen.segnet_store, &frozen.segnet, x, xhat, batch)?;
    let (reg_coarse, reg_fine) = loss_reg(tape, w, avg, batch)?;
    Ok(LossTerms {
        l2,
        lpips,
        sfm,
        reg_coarse,
        reg_fine,
    })
}

impl<T: Scalar> FrozenNets<T> {
    /// Pairs a trained segmentation model with a seeded random perceptual net.
    pub fn new(seg: super::segnet::SegModel<T>, perceptual_seed: u64) -> Self {
        let mut perceptual_store = ParamStore::new();
        let perceptual = PerceptualNet::new(
            &mut perceptual_store,
            seg.resolution(),
            &mut crate::seed::rng_for(perceptual_seed, "lpips"),
        );
        Self {
            perceptual,
            perceptual_store,
            segnet: seg.net,
            segnet_store: seg.store,
        }
    }
}
