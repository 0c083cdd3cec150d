//! Stroke encoder: stacked bidirectional GRU over point sequences, run on a
//! length-sorted packed batch so each time step is one matrix product.

use std::rc::Rc;

use rand::Rng;

use crate::autodiff::{AutodiffError, ParamId, ParamStore, Tape, Tensor, Var};
use crate::scalar::Scalar;

type Result<T> = std::result::Result<T, AutodiffError>;

/// One GRU direction of one layer. Gate columns are ordered reset, update,
/// candidate.
#[derive(Clone, Debug)]
pub struct GruCell {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b_ih: ParamId,
    pub b_hh: ParamId,
    pub hidden: usize,
}

impl GruCell {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let a = 1.0 / (hidden as f64).sqrt();
        let h3 = 3 * hidden;
        Self {
            w_ih: store.add(format!("{name}.w_ih"), Tensor::uniform(inputs, h3, -a, a, rng)),
            w_hh: store.add(format!("{name}.w_hh"), Tensor::uniform(hidden, h3, -a, a, rng)),
            b_ih: store.add(format!("{name}.b_ih"), Tensor::uniform(1, h3, -a, a, rng)),
            b_hh: store.add(format!("{name}.b_hh"), Tensor::uniform(1, h3, -a, a, rng)),
            hidden,
        }
    }

    /// One step: `h' = h + z * (n - h)` with
    /// `r, z = sigmoid(gi + gh)` and `n = tanh(gi_n + r * gh_n)`.
    fn step<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        gi: Var,
        h_prev: Var,
    ) -> Result<Var> {
        let h = self.hidden;
        let w_hh = tape.param(store, self.w_hh);
        let b_hh = tape.param(store, self.b_hh);
        let gh = tape.matmul(h_prev, w_hh)?;
        let gh = tape.add_row(gh, b_hh)?;
        let gi_rz = tape.slice_cols(gi, 0, 2 * h)?;
        let gh_rz = tape.slice_cols(gh, 0, 2 * h)?;
        let rz = tape.add(gi_rz, gh_rz)?;
        let rz = tape.sigmoid(rz);
        let r = tape.slice_cols(rz, 0, h)?;
        let z = tape.slice_cols(rz, h, h)?;
        let gi_n = tape.slice_cols(gi, 2 * h, h)?;
        let gh_n = tape.slice_cols(gh, 2 * h, h)?;
        let rn = tape.mul(r, gh_n)?;
        let n = tape.add(gi_n, rn)?;
        let n = tape.tanh(n);
        let d = tape.sub(n, h_prev)?;
        let zd = tape.mul(z, d)?;
        tape.add(h_prev, zd)
    }
}

/// Stacked bidirectional GRU. Layer `l > 0` reads the concatenated forward
/// and backward outputs of layer `l - 1` at each original time step.
#[derive(Clone, Debug)]
pub struct Ssem {
    pub layers: Vec<[GruCell; 2]>,
    pub hidden: usize,
}

impl Ssem {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        inputs: usize,
        hidden: usize,
        depth: usize,
        rng: &mut R,
    ) -> Self {
        let layers = (0..depth)
            .map(|l| {
                let inp = if l == 0 { inputs } else { 2 * hidden };
                [
                    GruCell::new(store, &format!("ssem.{l}.fwd"), inp, hidden, rng),
                    GruCell::new(store, &format!("ssem.{l}.bwd"), inp, hidden, rng),
                ]
            })
            .collect();
        Self { layers, hidden }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.hidden
    }

    /// Stroke features `[forward final state; backward final state]`, one row
    /// per sequence of `batch` in its original order.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, batch: &PackedSequences<T>) -> Result<Var> {
        let mut input = tape.constant(batch.inputs.clone());
        let mut finals = (input, input);
        for cells in &self.layers {
            let fwd = self.run_direction(tape, store, &cells[0], input, batch)?;
            let rev_in = tape.gather_rows(input, batch.reverse.clone())?;
            let bwd_rev = self.run_direction(tape, store, &cells[1], rev_in, batch)?;
            let bwd = tape.gather_rows(bwd_rev, batch.reverse.clone())?;
            finals = (fwd, bwd_rev);
            input = tape.concat_cols(&[fwd, bwd])?;
        }
        let f = tape.gather_rows(finals.0, batch.last.clone())?;
        let b = tape.gather_rows(finals.1, batch.last.clone())?;
        tape.concat_cols(&[f, b])
    }

    /// Runs one direction over packed rows; returns all step outputs packed
    /// in the same layout.
    fn run_direction<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        cell: &GruCell,
        input: Var,
        batch: &PackedSequences<T>,
    ) -> Result<Var> {
        let w_ih = tape.param(store, cell.w_ih);
        let b_ih = tape.param(store, cell.b_ih);
        let gi_all = tape.matmul(input, w_ih)?;
        let gi_all = tape.add_row(gi_all, b_ih)?;
        let mut h = tape.constant(Tensor::zeros(batch.counts.first().copied().unwrap_or(0), self.hidden));
        let mut outs = Vec::with_capacity(batch.counts.len());
        for (t, &n) in batch.counts.iter().enumerate() {
            let gi = tape.slice_rows(gi_all, batch.offsets[t], n)?;
            let h_prev = if tape.shape(h).rows == n { h } else { tape.slice_rows(h, 0, n)? };
            h = cell.step(tape, store, gi, h_prev)?;
            outs.push(h);
        }
        tape.concat_rows(&outs)
    }
}

/// Variable-length sequences sorted by decreasing length and packed time
/// step by time step: rows `offsets[t]..offsets[t] + counts[t]` hold step `t`
/// of the `counts[t]` longest sequences.
#[derive(Clone, Debug)]
pub struct PackedSequences<T> {
    pub inputs: Tensor<T>,
    pub offsets: Vec<usize>,
    pub counts: Vec<usize>,
    /// Packed row of step `t` mapped to the row of step `len - 1 - t` of the
    /// same sequence; an involution.
    pub reverse: Rc<[Option<usize>]>,
    /// Row of the last step of each sequence, in original order.
    pub last: Rc<[Option<usize>]>,
}

impl<T: Scalar> PackedSequences<T> {
    /// Packs `seqs`, each a nonempty list of feature rows of width `dim`.
    pub fn new(seqs: &[Vec<Vec<T>>], dim: usize) -> Result<Self> {
        if let Some(i) = seqs.iter().position(Vec::is_empty) {
            return Err(AutodiffError::Invalid {
                op: "pack",
                msg: format!("sequence {i} is empty"),
            });
        }
        let mut order: Vec<usize> = (0..seqs.len()).collect();
        order.sort_by(|&a, &b| seqs[b].len().cmp(&seqs[a].len()).then(a.cmp(&b)));
        let max_len = order.first().map_or(0, |&i| seqs[i].len());
        let mut counts = Vec::with_capacity(max_len);
        let mut offsets = Vec::with_capacity(max_len);
        let mut total = 0;
        for t in 0..max_len {
            let n = order.iter().take_while(|&&i| seqs[i].len() > t).count();
            offsets.push(total);
            counts.push(n);
            total += n;
        }
        let row = |t: usize, rank: usize| offsets[t] + rank;
        let mut data = Vec::with_capacity(total * dim);
        for (t, &n) in counts.iter().enumerate() {
            for &i in &order[..n] {
                let v = &seqs[i][t];
                if v.len() != dim {
                    return Err(AutodiffError::Invalid {
                        op: "pack",
                        msg: format!("sequence {i} step {t} has width {}, expected {dim}", v.len()),
                    });
                }
                data.extend_from_slice(v);
            }
        }
        let mut reverse = vec![None; total];
        let mut last = vec![None; seqs.len()];
        for (rank, &i) in order.iter().enumerate() {
            let len = seqs[i].len();
            for t in 0..len {
                reverse[row(t, rank)] = Some(row(len - 1 - t, rank));
            }
            last[i] = Some(row(len - 1, rank));
        }
        Ok(Self {
            inputs: Tensor::from_vec(total, dim, data),
            offsets,
            counts,
            reverse: reverse.into(),
            last: last.into(),
        })
    }

    pub fn num_sequences(&self) -> usize {
        self.last.len()
    }
}
