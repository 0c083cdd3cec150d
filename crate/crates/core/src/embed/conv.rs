//! Convolution on batched NHWC feature maps stored as `(batch*h*w) x channels`
//! matrices, built from row gathers so the tape differentiates them.

use std::rc::Rc;

use rand::Rng;

use crate::autodiff::{AutodiffError, ParamId, ParamStore, Tape, Tensor, Var};
use crate::scalar::Scalar;

type Result<T> = std::result::Result<T, AutodiffError>;

/// Spatial layout of a batched feature map; rows are ordered `(b, y, x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
}

impl Grid {
    pub fn square(batch: usize, side: usize) -> Self {
        Self {
            batch,
            height: side,
            width: side,
        }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn rows(&self) -> usize {
        self.batch * self.pixels()
    }

    pub fn half(&self) -> Self {
        Self {
            batch: self.batch,
            height: self.height / 2,
            width: self.width / 2,
        }
    }

    pub fn double(&self) -> Self {
        Self {
            batch: self.batch,
            height: self.height * 2,
            width: self.width * 2,
        }
    }

    fn row(&self, b: usize, y: usize, x: usize) -> usize {
        (b * self.height + y) * self.width + x
    }
}

/// Reads a tape-bound or frozen parameter.
pub fn bind<T: Scalar>(tape: &mut Tape<T>, store: &ParamStore<T>, id: ParamId, frozen: bool) -> Var {
    if frozen {
        tape.frozen_param(store, id)
    } else {
        tape.param(store, id)
    }
}

/// Zero-padded neighbor index for each of the `k*k` kernel taps.
fn taps(grid: Grid, k: usize) -> Vec<Rc<[Option<usize>]>> {
    let r = (k / 2) as isize;
    let mut out = Vec::with_capacity(k * k);
    for dy in -r..=r {
        for dx in -r..=r {
            let mut idx = Vec::with_capacity(grid.rows());
            for b in 0..grid.batch {
                for y in 0..grid.height as isize {
                    for x in 0..grid.width as isize {
                        let (sy, sx) = (y + dy, x + dx);
                        let inside = sy >= 0 && sx >= 0 && sy < grid.height as isize && sx < grid.width as isize;
                        idx.push(inside.then(|| grid.row(b, sy as usize, sx as usize)));
                    }
                }
            }
            out.push(idx.into());
        }
    }
    out
}

/// 2x2 average pooling; the grid sides must be even.
pub fn avg_pool2<T: Scalar>(tape: &mut Tape<T>, x: Var, grid: Grid) -> Result<Var> {
    let out = grid.half();
    let mut idx = Vec::with_capacity(grid.rows());
    for b in 0..out.batch {
        for y in 0..out.height {
            for xx in 0..out.width {
                for (oy, ox) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    idx.push(Some(grid.row(b, 2 * y + oy, 2 * xx + ox)));
                }
            }
        }
    }
    let g = tape.gather_rows(x, idx.into())?;
    tape.group_mean(g, 4)
}

/// Nearest-neighbor 2x upsampling.
pub fn upsample2<T: Scalar>(tape: &mut Tape<T>, x: Var, grid: Grid) -> Result<Var> {
    let out = grid.double();
    let mut idx = Vec::with_capacity(out.rows());
    for b in 0..out.batch {
        for y in 0..out.height {
            for xx in 0..out.width {
                idx.push(Some(grid.row(b, y / 2, xx / 2)));
            }
        }
    }
    tape.gather_rows(x, idx.into())
}

/// Repeats row `b` of a `batch x c` matrix over every pixel of image `b`.
pub fn expand_per_image<T: Scalar>(tape: &mut Tape<T>, x: Var, grid: Grid) -> Result<Var> {
    let idx: Vec<Option<usize>> = (0..grid.rows()).map(|r| Some(r / grid.pixels())).collect();
    tape.gather_rows(x, idx.into())
}

/// Square-kernel convolution with zero padding and stride one.
#[derive(Clone, Debug)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub kernel: usize,
    pub inputs: usize,
    pub outputs: usize,
}

impl Conv2d {
    /// He-uniform weights, zero bias.
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        outputs: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Self {
        assert!(kernel % 2 == 1, "kernel size must be odd");
        let fan_in = kernel * kernel * inputs;
        let a = (6.0 / fan_in as f64).sqrt();
        let weight = store.add(format!("{name}.weight"), Tensor::uniform(fan_in, outputs, -a, a, rng));
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(1, outputs));
        Self {
            weight,
            bias,
            kernel,
            inputs,
            outputs,
        }
    }

    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        x: Var,
        grid: Grid,
        frozen: bool,
    ) -> Result<Var> {
        let cols = if self.kernel == 1 {
            x
        } else {
            let parts = taps(grid, self.kernel)
                .into_iter()
                .map(|idx| tape.gather_rows(x, idx))
                .collect::<Result<Vec<_>>>()?;
            tape.concat_cols(&parts)?
        };
        let w = bind(tape, store, self.weight, frozen);
        let b = bind(tape, store, self.bias, frozen);
        let y = tape.matmul(cols, w)?;
        tape.add_row(y, b)
    }
}
