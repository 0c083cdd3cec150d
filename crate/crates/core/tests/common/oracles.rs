// Independent reference computations: plain loops over f64 vectors, no tape.

use sketchsem::autodiff::{ParamStore, Tensor};
use sketchsem::ssi::{GruCell, Ssem, TagLayer};

fn mat(store: &ParamStore<f64>, id: sketchsem::autodiff::ParamId) -> &Tensor<f64> {
    store.get(id)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

// x (len in) times W (in x out)
fn vecmat(x: &[f64], w: &Tensor<f64>) -> Vec<f64> {
    let mut out = vec![0.0; w.cols()];
    for (i, &xi) in x.iter().enumerate() {
        for (o, &wij) in out.iter_mut().zip(w.row(i)) {
            *o += xi * wij;
        }
    }
    out
}

fn gru_step(store: &ParamStore<f64>, cell: &GruCell, x: &[f64], h: &[f64]) -> Vec<f64> {
    let hs = cell.hidden;
    let mut gi = vecmat(x, mat(store, cell.w_ih));
    for (g, &b) in gi.iter_mut().zip(mat(store, cell.b_ih).data()) {
        *g += b;
    }
    let mut gh = vecmat(h, mat(store, cell.w_hh));
    for (g, &b) in gh.iter_mut().zip(mat(store, cell.b_hh).data()) {
        *g += b;
    }
    (0..hs)
        .map(|k| {
            let r = sigmoid(gi[k] + gh[k]);
            let z = sigmoid(gi[hs + k] + gh[hs + k]);
            let cand = (gi[2 * hs + k] + r * gh[2 * hs + k]).tanh();
            (1.0 - z) * h[k] + z * cand
        })
        .collect()
}

fn run(store: &ParamStore<f64>, cell: &GruCell, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut h = vec![0.0; cell.hidden];
    xs.iter()
        .map(|x| {
            h = gru_step(store, cell, x, &h);
            h.clone()
        })
        .collect()
}

/// Step-by-step recurrence of the stacked bidirectional GRU on one sequence.
pub fn ssem_unrolled(store: &ParamStore<f64>, ssem: &Ssem, seq: &[Vec<f64>]) -> Vec<f64> {
    let mut input: Vec<Vec<f64>> = seq.to_vec();
    let mut last = (Vec::new(), Vec::new());
    for cells in &ssem.layers {
        let fwd = run(store, &cells[0], &input);
        let rev: Vec<Vec<f64>> = input.iter().rev().cloned().collect();
        let bwd_rev = run(store, &cells[1], &rev);
        last = (fwd.last().unwrap().clone(), bwd_rev.last().unwrap().clone());
        let n = input.len();
        input = (0..n)
            .map(|t| {
                let mut v = fwd[t].clone();
                v.extend_from_slice(&bwd_rev[n - 1 - t]);
                v
            })
            .collect();
    }
    let mut out = last.0;
    out.extend(last.1);
    out
}

/// Dense normalized adjacency: `W[i][j]` summed over edges i->j, scaled by
/// `1/sqrt(deg_i deg_j)` with out-degrees; zero rows/cols for deg <= 1e-12.
pub fn dense_adjacency(n: usize, src: &[usize], dst: &[usize], w: &[f64]) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for e in 0..src.len() {
        a[src[e]][dst[e]] += w[e];
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let inv: Vec<f64> = deg.iter().map(|&d| if d > 1e-12 { 1.0 / d.sqrt() } else { 0.0 }).collect();
    for i in 0..n {
        for j in 0..n {
            a[i][j] *= inv[i] * inv[j];
        }
    }
    a
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for p in 0..k {
            for j in 0..m {
                out[i][j] += a[i][p] * b[p][j];
            }
        }
    }
    out
}

/// `sum_h A^h X Theta_h + b` using explicit matrix powers of `A`.
pub fn tagconv_dense(store: &ParamStore<f64>, layer: &TagLayer, a: &[Vec<f64>], x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let theta = store.get(layer.theta);
    let bias = store.get(layer.bias).data();
    let mut out: Vec<Vec<f64>> = (0..n).map(|_| bias.to_vec()).collect();
    let mut power: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for h in 0..=layer.hops {
        let th: Vec<Vec<f64>> = (0..layer.inputs).map(|r| theta.row(h * layer.inputs + r).to_vec()).collect();
        let term = matmul(&matmul(&power, x), &th);
        for i in 0..n {
            for j in 0..layer.outputs {
                out[i][j] += term[i][j];
            }
        }
        power = matmul(&power, a);
    }
    out
}
