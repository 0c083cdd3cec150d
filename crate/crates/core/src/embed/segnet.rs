//! Small face-parsing network whose stage activations feed the semantic
//! feature matching loss, plus the fixed random pyramid used as the
//! perceptual feature extractor.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conv::{avg_pool2, upsample2, Conv2d, Grid};
use crate::autodiff::{AutodiffError, Checkpoint, CheckpointError, ParamStore, Tape, Tensor, Var};
use crate::scalar::Scalar;
use crate::seed::rng_for;
use crate::sketch::NUM_SOURCE_LABELS;

type Result<T> = std::result::Result<T, AutodiffError>;

const SLOPE: f64 = 0.2;

/// Activations of one stage with their layout.
#[derive(Clone, Copy, Debug)]
pub struct Stage {
    pub value: Var,
    pub grid: Grid,
    pub channels: usize,
}

/// Conv stages at full, half and quarter resolution.
#[derive(Clone, Debug)]
pub struct Pyramid {
    pub convs: Vec<Conv2d>,
    pub resolution: usize,
}

impl Pyramid {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        widths: &[usize],
        resolution: usize,
        rng: &mut R,
    ) -> Self {
        assert!(
            resolution % (1 << (widths.len() - 1)) == 0,
            "resolution must halve once per stage"
        );
        let mut cin = inputs;
        let convs = widths
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let c = Conv2d::new(store, &format!("{name}.{i}"), cin, w, 3, rng);
                cin = w;
                c
            })
            .collect();
        Self { convs, resolution }
    }

    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        mut x: Var,
        batch: usize,
        frozen: bool,
    ) -> Result<Vec<Stage>> {
        let mut grid = Grid::square(batch, self.resolution);
        let mut out = Vec::with_capacity(self.convs.len());
        for (i, conv) in self.convs.iter().enumerate() {
            if i > 0 {
                x = avg_pool2(tape, x, grid)?;
                grid = grid.half();
            }
            x = conv.forward(tape, store, x, grid, frozen)?;
            x = tape.leaky_relu(x, T::of(SLOPE));
            out.push(Stage {
                value: x,
                grid,
                channels: conv.outputs,
            });
        }
        Ok(out)
    }
}

pub const SEGNET_WIDTHS: [usize; 3] = [16, 32, 32];
pub const PERCEPTUAL_WIDTHS: [usize; 3] = [8, 16, 16];

/// Feature pyramid with a 1x1 classifier per stage; stage logits are
/// upsampled and summed into per-pixel scores over the 19 source labels.
#[derive(Clone, Debug)]
pub struct SegFeatureNet {
    pub pyramid: Pyramid,
    pub heads: Vec<Conv2d>,
}

impl SegFeatureNet {
    pub fn new<T: Scalar, R: Rng + ?Sized>(store: &mut ParamStore<T>, resolution: usize, rng: &mut R) -> Self {
        let pyramid = Pyramid::new(store, "seg.stage", 3, &SEGNET_WIDTHS, resolution, rng);
        let heads = SEGNET_WIDTHS
            .iter()
            .enumerate()
            .map(|(i, &w)| Conv2d::new(store, &format!("seg.head{i}"), w, NUM_SOURCE_LABELS, 1, rng))
            .collect();
        Self { pyramid, heads }
    }

    pub fn resolution(&self) -> usize {
        self.pyramid.resolution
    }

    pub fn features<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        image: Var,
        batch: usize,
        frozen: bool,
    ) -> Result<Vec<Stage>> {
        self.pyramid.forward(tape, store, image, batch, frozen)
    }

    /// `(batch*res*res) x 19` scores.
    pub fn logits<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        stages: &[Stage],
        frozen: bool,
    ) -> Result<Var> {
        let mut acc: Option<Var> = None;
        for (stage, head) in stages.iter().zip(&self.heads).rev() {
            let mut y = head.forward(tape, store, stage.value, stage.grid, frozen)?;
            if let Some(prev) = acc {
                y = tape.add(y, prev)?;
            }
            acc = Some(if stage.grid.height < self.resolution() {
                upsample2(tape, y, stage.grid)?
            } else {
                y
            });
        }
        Ok(acc.expect("segnet has stages"))
    }
}

/// Fixed-seed random conv pyramid; its weights are never trained.
#[derive(Clone, Debug)]
pub struct PerceptualNet {
    pub pyramid: Pyramid,
}

impl PerceptualNet {
    pub fn new<T: Scalar, R: Rng + ?Sized>(store: &mut ParamStore<T>, resolution: usize, rng: &mut R) -> Self {
        Self {
            pyramid: Pyramid::new(store, "lpips.stage", 3, &PERCEPTUAL_WIDTHS, resolution, rng),
        }
    }

    pub fn features<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, image: Var, batch: usize) -> Result<Vec<Stage>> {
        self.pyramid.forward(tape, store, image, batch, true)
    }
}

pub const SEGNET_CHECKPOINT_KIND: &str = "segnet";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegTrainConfig {
    pub resolution: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for SegTrainConfig {
    fn default() -> Self {
        Self {
            resolution: 32,
            epochs: 12,
            batch: 8,
            lr: 3e-3,
            seed: 0,
        }
    }
}

/// A segmentation network with its weights.
pub struct SegModel<T> {
    pub net: SegFeatureNet,
    pub store: ParamStore<T>,
}

impl<T: Scalar> SegModel<T> {
    pub fn new(resolution: usize, seed: u64) -> Self {
        let mut store = ParamStore::new();
        let net = SegFeatureNet::new(&mut store, resolution, &mut rng_for(seed, "segnet.init"));
        Self { net, store }
    }

    pub fn resolution(&self) -> usize {
        self.net.resolution()
    }

    /// Most likely source label id per pixel of each `res^2 x 3` image in
    /// `images` (stacked by image).
    pub fn predict(&self, images: &Tensor<T>) -> Result<Vec<u8>> {
        let per = self.resolution() * self.resolution();
        let batch = images.rows() / per;
        let mut tape = Tape::new();
        let x = tape.constant(images.clone());
        let stages = self.net.features(&mut tape, &self.store, x, batch, true)?;
        let logits = self.net.logits(&mut tape, &self.store, &stages, true)?;
        let lv = tape.value(logits);
        Ok((0..lv.rows())
            .map(|r| {
                let row = lv.row(r);
                let mut best = 0;
                for (i, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = i;
                    }
                }
                best as u8
            })
            .collect())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::new(
            SEGNET_CHECKPOINT_KIND,
            serde_json::json!({ "resolution": self.resolution() }),
        );
        ckpt.entries = self.store.entries();
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> std::result::Result<Self, CheckpointError> {
        ckpt.expect_kind(SEGNET_CHECKPOINT_KIND)?;
        let resolution = ckpt.meta["resolution"]
            .as_u64()
            .ok_or_else(|| CheckpointError::Schema("segnet resolution".into()))? as usize;
        let mut model = Self::new(resolution, 0);
        model.store.load_entries(&ckpt.entries)?;
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> std::result::Result<(), CheckpointError> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &std::path::Path) -> std::result::Result<Self, CheckpointError> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}
