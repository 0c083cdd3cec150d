//! Style code bundles: fusion, interpolation and random appearance codes.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::encoder::{APPEARANCE_SITES, SKETCH_SITES, STYLE_SITES};
use crate::autodiff::Tensor;
use crate::scalar::Scalar;
use crate::seed::rng_for;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodeError {
    #[error("{what}: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    Shape {
        what: &'static str,
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("interpolation weight {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("code contains non-finite values")]
    NonFinite,
}

fn expect_shape<T: Scalar>(what: &'static str, t: &Tensor<T>, rows: usize, cols: usize) -> Result<(), CodeError> {
    if t.rows() != rows || t.cols() != cols {
        return Err(CodeError::Shape {
            what,
            expected_rows: rows,
            expected_cols: cols,
            rows: t.rows(),
            cols: t.cols(),
        });
    }
    Ok(())
}

/// Encoder outputs for one sketch: the shared code, the eight structure
/// codes and the ten appearance codes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StyleCodes<T> {
    pub shared: Vec<T>,
    pub structure: Vec<T>,
    pub appearance: Vec<T>,
    pub latent: usize,
}

impl<T: Scalar> StyleCodes<T> {
    pub fn from_tensors(shared: &Tensor<T>, structure: &Tensor<T>, appearance: &Tensor<T>) -> Result<Self, CodeError> {
        let d = shared.cols();
        expect_shape("shared code", shared, 1, d)?;
        expect_shape("structure codes", structure, SKETCH_SITES, d)?;
        expect_shape("appearance codes", appearance, APPEARANCE_SITES, d)?;
        Ok(Self {
            shared: shared.data().to_vec(),
            structure: structure.data().to_vec(),
            appearance: appearance.data().to_vec(),
            latent: d,
        })
    }

    pub fn shared(&self) -> Tensor<T> {
        Tensor::from_vec(1, self.latent, self.shared.clone())
    }

    pub fn structure(&self) -> Tensor<T> {
        Tensor::from_vec(SKETCH_SITES, self.latent, self.structure.clone())
    }

    pub fn appearance(&self) -> Tensor<T> {
        Tensor::from_vec(APPEARANCE_SITES, self.latent, self.appearance.clone())
    }

    pub fn with_appearance(&self, appearance: &Tensor<T>) -> Result<Self, CodeError> {
        Self::from_tensors(&self.shared(), &self.structure(), appearance)
    }
}

/// Structure rows stacked over appearance rows, plus the shared code and the
/// average code on every row; always 18 rows.
pub fn fuse_codes<T: Scalar>(codes: &StyleCodes<T>, avg: &Tensor<T>) -> Result<Tensor<T>, CodeError> {
    let d = codes.latent;
    expect_shape("average code", avg, 1, d)?;
    let structure = codes.structure();
    let appearance = codes.appearance();
    let mut out = Tensor::zeros(STYLE_SITES, d);
    for r in 0..STYLE_SITES {
        let src = if r < SKETCH_SITES {
            structure.row(r)
        } else {
            appearance.row(r - SKETCH_SITES)
        };
        for (c, o) in out.row_mut(r).iter_mut().enumerate() {
            *o = src[c] + codes.shared[c] + avg.get(0, c);
        }
    }
    Ok(out)
}

/// `(1 - t) * a + t * b`.
pub fn interpolate<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, t: f64) -> Result<Tensor<T>, CodeError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(CodeError::OutOfRange(t));
    }
    expect_shape("second code", b, a.rows(), a.cols())?;
    let (s, u) = (T::of(1.0 - t), T::of(t));
    Ok(a.zip_map(b, |x, y| s * x + u * y))
}

/// Seeded standard normal latent row fed to the mapping head.
pub fn appearance_latent<T: Scalar>(seed: u64, latent: usize) -> Tensor<T> {
    let mut rng = rng_for(seed, "appearance");
    let data = (0..latent)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            T::of(z)
        })
        .collect();
    Tensor::from_vec(1, latent, data)
}

/// Copies one code row onto all ten appearance rows.
pub fn duplicate_appearance<T: Scalar>(row: &Tensor<T>) -> Tensor<T> {
    let mut out = Tensor::zeros(APPEARANCE_SITES, row.cols());
    for r in 0..APPEARANCE_SITES {
        out.row_mut(r).copy_from_slice(row.row(0));
    }
    out
}

pub fn check_finite<T: Scalar>(w: &Tensor<T>) -> Result<(), CodeError> {
    if w.is_finite() {
        Ok(())
    } else {
        Err(CodeError::NonFinite)
    }
}
