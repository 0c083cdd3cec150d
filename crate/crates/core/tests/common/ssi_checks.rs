// Seeded SSI checks against the oracles, shared by the ssi tests and the
// acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sketchsem::autodiff::{grad_check, AutodiffError, EdgeIndex, GradCheckConfig, ParamStore, Tape, Tensor};
use sketchsem::sketch::{CategoryId, Stroke, VectorSketch};
use sketchsem::ssi::{PackedSequences, Ssem, SsiConfig, SsiError, SsiModel, TagLayer};

use super::oracles::{dense_adjacency, ssem_unrolled, tagconv_dense};

pub fn small_config() -> SsiConfig {
    SsiConfig {
        hidden: 4,
        gru_layers: 3,
        k_nn: 3,
        hops: 3,
        graph_layers: 2,
        graph_dim: 6,
        edge_hidden: 4,
        classifier_hidden: 6,
        normalize: true,
    }
}

pub fn random_sequences(rng: &mut ChaCha8Rng, count: usize, max_len: usize) -> Vec<Vec<Vec<f64>>> {
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=max_len);
            (0..n).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect()
        })
        .collect()
}

/// Max abs difference between the packed batch encoder and the unrolled
/// per-sequence recurrence.
pub fn ssem_oracle_error(seed: u64, hidden: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let ssem = Ssem::new(&mut store, 2, hidden, 3, &mut rng);
    let seqs = random_sequences(&mut rng, 7, 12);
    let packed = PackedSequences::new(&seqs, 2).unwrap();
    let mut tape = Tape::new();
    let v = ssem.forward(&mut tape, &store, &packed).unwrap();
    let got = tape.value(v);
    let mut worst: f64 = 0.0;
    for (i, seq) in seqs.iter().enumerate() {
        let want = ssem_unrolled(&store, &ssem, seq);
        for (a, b) in got.row(i).iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let (mut src, mut dst, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(0.5) {
                src.push(i);
                dst.push(j);
                // occasional non-positive weights exercise the degree guard
                w.push(if rng.random_bool(0.1) { rng.random_range(-1.0..0.0) } else { rng.random_range(0.05..2.0) });
            }
        }
    }
    (src, dst, w)
}

pub fn tagconv_sparse(
    store: &ParamStore<f64>,
    layer: &TagLayer,
    n: usize,
    src: &[usize],
    dst: &[usize],
    w: &[f64],
    x: &Tensor<f64>,
) -> Tensor<f64> {
    let mut tape = Tape::new();
    let edges = EdgeIndex::new(src.to_vec(), dst.to_vec(), n);
    let wv = tape.constant(Tensor::from_f64(w.len(), 1, w));
    let norm = tape.gcn_norm(wv, &edges).unwrap();
    let xv = tape.constant(x.clone());
    let y = layer.forward(&mut tape, store, xv, norm, &edges).unwrap();
    tape.value(y).clone()
}

/// Worst abs difference between sparse propagation and dense matrix powers
/// over `graphs` random graphs with at most 6 vertices and up to 3 hops.
pub fn tagconv_oracle_sweep(graphs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..graphs {
        let n = rng.random_range(1..=6);
        let hops = rng.random_range(0..=3);
        let (fi, fo) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let mut store = ParamStore::new();
        let layer = TagLayer::new(&mut store, "t", fi, fo, hops, &mut rng);
        *store.get_mut(layer.bias) = Tensor::uniform(1, fo, -1.0, 1.0, &mut rng);
        let (src, dst, w) = random_graph(&mut rng, n);
        let x = Tensor::uniform(n, fi, -2.0, 2.0, &mut rng);
        let got = tagconv_sparse(&store, &layer, n, &src, &dst, &w, &x);
        let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).to_vec()).collect();
        let want = tagconv_dense(&store, &layer, &dense_adjacency(n, &src, &dst, &w), &rows);
        for i in 0..n {
            for j in 0..fo {
                worst = worst.max((got.get(i, j) - want[i][j]).abs());
            }
        }
    }
    worst
}

/// A labeled sketch of `n` random polyline strokes on a 64x64 canvas.
pub fn random_sketch(rng: &mut ChaCha8Rng, n: usize) -> VectorSketch {
    let strokes = (0..n)
        .map(|i| {
            let len = rng.random_range(1..=9);
            let pts: Vec<(f64, f64)> = (0..len).map(|_| (rng.random_range(0.0..64.0), rng.random_range(0.0..64.0))).collect();
            Stroke::from_xy(&pts, i as u64, Some(CategoryId::new(rng.random_range(0..22)).unwrap()))
        })
        .collect();
    VectorSketch::with_strokes(64, 64, strokes)
}

/// Gradient check of stroke cross-entropy through the whole labeling model.
pub fn ssi_end_to_end_gradcheck(seed: u64, strokes: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sketch = random_sketch(&mut rng, strokes);
    let mut model = SsiModel::<f64>::new(small_config(), seed);
    let input = model.prepare(&[&sketch]).unwrap();
    let targets: Vec<usize> = sketch.strokes.iter().map(|s| s.label.unwrap().index()).collect();
    let (ssem, stem, config) = (model.ssem.clone(), model.stem.clone(), model.config);
    let report = grad_check(&mut model.store, GradCheckConfig::default(), |tape, store| {
        let view = SsiModel {
            config,
            store: store.clone(),
            ssem: ssem.clone(),
            stem: stem.clone(),
        };
        let logits = view.logits(tape, &input)?;
        Ok::<_, SsiError>(tape.softmax_cross_entropy(logits, &targets)?)
    })
    .unwrap();
    report.max_rel_error
}

/// Gradient check of the packed encoder alone (sum of weighted features).
pub fn ssem_gradcheck(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let ssem = Ssem::new(&mut store, 2, 3, 3, &mut rng);
    let seqs = random_sequences(&mut rng, 4, 6);
    let packed = PackedSequences::new(&seqs, 2).unwrap();
    let weights = Tensor::uniform(4, 6, 0.5, 1.5, &mut rng);
    grad_check(&mut store, GradCheckConfig::default(), |tape, store| {
        let v = ssem.forward(tape, store, &packed)?;
        let w = tape.constant(weights.clone());
        let p = tape.mul(v, w)?;
        Ok::<_, AutodiffError>(tape.sum(p))
    })
    .unwrap()
    .max_rel_error
}

/// Gradient check of one graph layer, including the edge weights.
pub fn tagconv_gradcheck(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 5;
    let mut store = ParamStore::<f64>::new();
    let layer = TagLayer::new(&mut store, "t", 3, 4, 3, &mut rng);
    let (mut src, mut dst, mut w) = random_graph(&mut rng, n);
    if src.is_empty() {
        src.push(0);
        dst.push(1);
        w.push(1.0);
    }
    let w: Vec<f64> = w.iter().map(|v| v.abs() + 0.1).collect();
    let wid = store.add("edge_w", Tensor::from_f64(w.len(), 1, &w));
    let xid = store.add("x", Tensor::uniform(n, 3, -1.0, 1.0, &mut rng));
    let edges = EdgeIndex::new(src, dst, n);
    let weights = Tensor::uniform(n, 4, 0.5, 1.5, &mut rng);
    grad_check(&mut store, GradCheckConfig::default(), |tape, store| {
        let wv = tape.param(store, wid);
        let norm = tape.gcn_norm(wv, &edges)?;
        let x = tape.param(store, xid);
        let y = layer.forward(tape, store, x, norm, &edges)?;
        let c = tape.constant(weights.clone());
        let p = tape.mul(y, c)?;
        Ok::<_, AutodiffError>(tape.sum(p))
    })
    .unwrap()
    .max_rel_error
}
