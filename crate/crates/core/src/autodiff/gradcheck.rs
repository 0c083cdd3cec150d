use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::AutodiffError;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Above this many coordinates a seeded random subset of this size is checked.
    pub max_coords: usize,
    pub seed: u64,
    /// Denominator floor of the relative error.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-4,
            max_coords: 10_000,
            seed: 0,
            floor: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameter name, flat index, analytic, numeric at the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
}

/// Compares backward gradients of a scalar function of `store` against
/// central finite differences, returning the largest relative error
/// `|a - n| / max(|a|, |n|, floor)`.
pub fn grad_check<T, E, F>(store: &mut ParamStore<T>, config: GradCheckConfig, mut f: F) -> Result<GradCheckReport, E>
where
    T: Scalar,
    E: From<AutodiffError>,
    F: FnMut(&mut Tape<T>, &ParamStore<T>) -> Result<Var, E>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    tape.backward(loss)?;
    let mut analytic: Vec<Vec<f64>> = store.ids().map(|id| vec![0.0; store.get(id).len()]).collect();
    for (id, g) in tape.param_grads() {
        analytic[id.index()] = g.to_f64_vec();
    }
    drop(tape);

    let coords: Vec<(ParamId, usize)> = store
        .ids()
        .flat_map(|id| (0..store.get(id).len()).map(move |k| (id, k)))
        .collect();
    let chosen: Vec<usize> = if coords.len() > config.max_coords {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut idx = sample(&mut rng, coords.len(), config.max_coords).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..coords.len()).collect()
    };

    let mut eval = |store: &ParamStore<T>| -> Result<f64, E> {
        let mut tape = Tape::new();
        let v = f(&mut tape, store)?;
        Ok(tape.value(v).item().as_f64())
    };

    let mut report = GradCheckReport::default();
    for ci in chosen {
        let (id, k) = coords[ci];
        let orig = store.get(id).data()[k];
        store.get_mut(id).data_mut()[k] = orig + T::of(config.step);
        let plus = eval(store)?;
        store.get_mut(id).data_mut()[k] = orig - T::of(config.step);
        let minus = eval(store)?;
        store.get_mut(id).data_mut()[k] = orig;
        let numeric = (plus - minus) / (2.0 * config.step);
        let a = analytic[id.index()][k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(config.floor);
        report.checked += 1;
        if rel > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(rel);
            if rel >= report.max_rel_error {
                report.worst = Some((store.name(id).to_string(), k, a, numeric));
            }
        }
    }
    Ok(report)
}
