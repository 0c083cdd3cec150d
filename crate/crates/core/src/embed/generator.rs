//! Toy style-modulated generator: a learned 4x4 constant upsampled to the
//! output resolution, each block's activations scaled and shifted by affine
//! maps of its assigned rows of the 18-row code.

use std::ops::Range;

use rand::Rng;

use super::conv::{expand_per_image, upsample2, Conv2d, Grid};
use super::encoder::{SKETCH_SITES, STYLE_SITES};
use crate::autodiff::{AutodiffError, ParamId, ParamStore, Tape, Tensor, Var};
use crate::nn::{Linear, Mlp};
use crate::scalar::Scalar;

type Result<T> = std::result::Result<T, AutodiffError>;

const BASE_SIDE: usize = 4;
const SLOPE: f64 = 0.2;

#[derive(Clone, Debug)]
pub struct GenBlock {
    pub resolution: usize,
    pub conv: Conv2d,
    /// Code rows modulating this block.
    pub sites: Range<usize>,
    /// One affine per site producing `[scale; shift]` for every channel.
    pub styles: Vec<Linear>,
}

#[derive(Clone, Debug)]
pub struct ToyGenerator {
    pub constant: ParamId,
    /// Convolution blocks from 4x4 up to the output size, then the 1x1 color
    /// projection as the final block.
    pub blocks: Vec<GenBlock>,
    pub mapping: Mlp,
    pub latent: usize,
    pub channels: usize,
    pub resolution: usize,
}

/// Splits `sites` into `parts` contiguous nearly equal ranges.
fn split_sites(sites: Range<usize>, parts: usize) -> Vec<Range<usize>> {
    let n = sites.len();
    (0..parts)
        .map(|j| sites.start + n * j / parts..sites.start + n * (j + 1) / parts)
        .collect()
}

impl ToyGenerator {
    /// Structure rows (0..8) drive the blocks below the output size; the ten
    /// appearance rows are shared by the output-size block and the color
    /// projection.
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        latent: usize,
        channels: usize,
        resolution: usize,
        rng: &mut R,
    ) -> Self {
        assert!(
            resolution >= 2 * BASE_SIDE && resolution.is_power_of_two(),
            "generator resolution must be a power of two of at least 8"
        );
        let constant = store.add("gen.const", Tensor::randn(BASE_SIDE * BASE_SIDE, channels, 1.0, rng));
        let mut sides = Vec::new();
        let mut s = BASE_SIDE;
        while s < resolution {
            sides.push(s);
            s *= 2;
        }
        let mut plan: Vec<(usize, Range<usize>, usize, usize)> = sides
            .iter()
            .zip(split_sites(0..SKETCH_SITES, sides.len()))
            .map(|(&side, r)| (side, r, 3, channels))
            .collect();
        let fine = split_sites(SKETCH_SITES..STYLE_SITES, 2);
        plan.push((resolution, fine[0].clone(), 3, channels));
        plan.push((resolution, fine[1].clone(), 1, 3));
        let blocks = plan
            .into_iter()
            .enumerate()
            .map(|(i, (side, sites, k, cout))| {
                let cin = channels;
                let conv = Conv2d::new(store, &format!("gen.block{i}.conv"), cin, cout, k, rng);
                let styles = sites
                    .clone()
                    .map(|site| {
                        let lin = Linear::new(store, &format!("gen.block{i}.style{site}"), latent, 2 * cout, rng);
                        store.get_mut(lin.bias).data_mut().fill(T::zero());
                        lin
                    })
                    .collect();
                GenBlock {
                    resolution: side,
                    conv,
                    sites,
                    styles,
                }
            })
            .collect();
        let mapping = Mlp::new(store, "gen.mapping", &[latent, latent, latent], rng);
        Self {
            constant,
            blocks,
            mapping,
            latent,
            channels,
            resolution,
        }
    }

    pub fn num_sites(&self) -> usize {
        self.blocks.iter().map(|b| b.sites.len()).sum()
    }

    /// `codes` is `(batch*18) x D` with rows grouped by image. Returns the
    /// unclamped image, `(batch*res*res) x 3`.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, codes: Var, batch: usize) -> Result<Var> {
        let mut grid = Grid::square(batch, BASE_SIDE);
        let c = tape.param(store, self.constant);
        let idx: Vec<Option<usize>> = (0..grid.rows()).map(|r| Some(r % grid.pixels())).collect();
        let mut x = tape.gather_rows(c, idx.into())?;
        let last = self.blocks.len() - 1;
        for (i, block) in self.blocks.iter().enumerate() {
            if block.resolution > grid.height {
                x = upsample2(tape, x, grid)?;
                grid = grid.double();
            }
            x = block.conv.forward(tape, store, x, grid, false)?;
            let mut style: Option<Var> = None;
            for (site, affine) in block.sites.clone().zip(&block.styles) {
                let idx: Vec<Option<usize>> = (0..batch).map(|b| Some(b * STYLE_SITES + site)).collect();
                let w = tape.gather_rows(codes, idx.into())?;
                let s = affine.forward(tape, store, w)?;
                style = Some(match style {
                    Some(acc) => tape.add(acc, s)?,
                    None => s,
                });
            }
            let style = style.expect("every block has a site");
            let cout = block.conv.outputs;
            let scale = tape.slice_cols(style, 0, cout)?;
            let scale = tape.offset(scale, T::one());
            let shift = tape.slice_cols(style, cout, cout)?;
            let scale = expand_per_image(tape, scale, grid)?;
            let shift = expand_per_image(tape, shift, grid)?;
            x = tape.mul(x, scale)?;
            x = tape.add(x, shift)?;
            if i < last {
                x = tape.leaky_relu(x, T::of(SLOPE));
            }
        }
        Ok(x)
    }

    /// Mapping head applied to latent rows.
    pub fn map_latents<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, z: Var) -> Result<Var> {
        self.mapping.forward(tape, store, z)
    }
}
