//! Convolutional encoders from a sketch raster or a face image to style codes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conv::{avg_pool2, Conv2d, Grid};
use crate::autodiff::{AutodiffError, ParamStore, Tape, Var};
use crate::nn::Linear;
use crate::scalar::Scalar;

type Result<T> = std::result::Result<T, AutodiffError>;

pub const TRUNK_OUT_SIDE: usize = 4;
const SLOPE: f64 = 0.2;

/// Conv stages halving the resolution down to 4x4, then flattened.
#[derive(Clone, Debug)]
pub struct ConvTrunk {
    pub convs: Vec<Conv2d>,
    pub resolution: usize,
}

impl ConvTrunk {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        widths: &TrunkWidths,
        resolution: usize,
        rng: &mut R,
    ) -> Self {
        let mut convs = Vec::new();
        let (mut side, mut cin, mut i) = (resolution, inputs, 0);
        loop {
            let cout = widths.at(i);
            convs.push(Conv2d::new(store, &format!("{name}.{i}"), cin, cout, 3, rng));
            if side <= TRUNK_OUT_SIDE {
                break;
            }
            side /= 2;
            cin = cout;
            i += 1;
        }
        Self { convs, resolution }
    }

    pub fn output_dim(&self) -> usize {
        TRUNK_OUT_SIDE * TRUNK_OUT_SIDE * self.convs.last().expect("trunk has stages").outputs
    }

    /// `x` is `(batch*res*res) x inputs`; returns `batch x output_dim`.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, mut x: Var, batch: usize) -> Result<Var> {
        let mut grid = Grid::square(batch, self.resolution);
        for (i, conv) in self.convs.iter().enumerate() {
            if i > 0 {
                x = avg_pool2(tape, x, grid)?;
                grid = grid.half();
            }
            x = conv.forward(tape, store, x, grid, false)?;
            x = tape.leaky_relu(x, T::of(SLOPE));
        }
        tape.reshape(x, batch, self.output_dim())
    }
}

/// Channel count of stage `i` is `min(base * 2^i, max)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrunkWidths {
    pub base: usize,
    pub max: usize,
}

impl TrunkWidths {
    pub fn at(&self, i: usize) -> usize {
        (self.base << i.min(16)).min(self.max)
    }
}

/// The three encoders: sketch to the shared code, sketch to the eight
/// per-site structure codes, and face image to the ten appearance codes.
#[derive(Clone, Debug)]
pub struct EncoderSet {
    pub sketch_shared: (ConvTrunk, Linear),
    pub sketch_sites: (ConvTrunk, Linear),
    pub face_sites: (ConvTrunk, Linear),
    pub latent: usize,
}

pub const SKETCH_SITES: usize = 8;
pub const APPEARANCE_SITES: usize = 10;
pub const STYLE_SITES: usize = SKETCH_SITES + APPEARANCE_SITES;

impl EncoderSet {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        sketch_channels: usize,
        widths: &TrunkWidths,
        resolution: usize,
        latent: usize,
        rng: &mut R,
    ) -> Self {
        let mut branch = |name: &str, inputs: usize, rows: usize| {
            let trunk = ConvTrunk::new(store, &format!("{name}.trunk"), inputs, widths, resolution, rng);
            let head = Linear::new(store, &format!("{name}.head"), trunk.output_dim(), rows * latent, rng);
            (trunk, head)
        };
        Self {
            sketch_shared: branch("enc.sketch_w", sketch_channels, 1),
            sketch_sites: branch("enc.sketch_wplus", sketch_channels, SKETCH_SITES),
            face_sites: branch("enc.face_wplus", 3, APPEARANCE_SITES),
            latent,
        }
    }

    fn run<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        branch: &(ConvTrunk, Linear),
        x: Var,
        batch: usize,
        rows: usize,
    ) -> Result<Var> {
        let f = branch.0.forward(tape, store, x, batch)?;
        let codes = branch.1.forward(tape, store, f)?;
        tape.reshape(codes, batch * rows, self.latent)
    }

    /// Returns the shared code (`batch x D`) and the structure codes
    /// (`(batch*8) x D`, rows grouped by image).
    pub fn encode_sketch<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        raster: Var,
        batch: usize,
    ) -> Result<(Var, Var)> {
        let shared = self.run(tape, store, &self.sketch_shared, raster, batch, 1)?;
        let sites = self.run(tape, store, &self.sketch_sites, raster, batch, SKETCH_SITES)?;
        Ok((shared, sites))
    }

    /// Appearance codes, `(batch*10) x D`.
    pub fn encode_face<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, image: Var, batch: usize) -> Result<Var> {
        self.run(tape, store, &self.face_sites, image, batch, APPEARANCE_SITES)
    }
}
