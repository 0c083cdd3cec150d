mod common;

use std::f64::consts::PI;

use common::oracles::{dense_adjacency, tagconv_dense};
use common::ssi_checks::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sketchsem::autodiff::{ParamStore, Tape, Tensor};
use sketchsem::sketch::{CategoryId, Point, Stroke, VectorSketch};
use sketchsem::ssi::*;

#[test]
fn zero_gru_weights_give_zero_features() {
    let mut model = SsiModel::<f64>::new(small_config(), 1);
    for cells in &model.ssem.layers {
        for c in cells {
            for id in [c.w_ih, c.w_hh, c.b_ih, c.b_hh] {
                let t = model.store.get_mut(id);
                *t = Tensor::zeros(t.rows(), t.cols());
            }
        }
    }
    let seqs = vec![vec![vec![0.3, 0.7], vec![0.1, 0.2]], vec![vec![0.5, 0.5]]];
    let packed = PackedSequences::new(&seqs, 2).unwrap();
    let mut tape = Tape::new();
    let v = model.ssem.forward(&mut tape, &model.store, &packed).unwrap();
    assert_eq!(tape.shape(v).cols, 2 * small_config().hidden);
    assert!(tape.value(v).data().iter().all(|&x| x == 0.0));
}

#[test]
fn single_point_stroke_is_finite() {
    let model = SsiModel::<f64>::new(small_config(), 2);
    let packed = PackedSequences::new(&[vec![vec![0.4, 0.9]]], 2).unwrap();
    let mut tape = Tape::new();
    let v = model.ssem.forward(&mut tape, &model.store, &packed).unwrap();
    assert!(tape.value(v).is_finite());
    assert_eq!(packed.counts, vec![1]);
}

#[test]
fn packed_encoder_matches_unrolled_recurrence() {
    for seed in 0..5 {
        let err = ssem_oracle_error(seed, 5);
        assert!(err < 1e-12, "seed {seed}: {err}");
    }
}

#[test]
fn empty_sequence_is_rejected() {
    assert!(PackedSequences::<f64>::new(&[vec![]], 2).is_err());
}

#[test]
fn direction_order_matters() {
    // features are [forward; backward]; reversing the input swaps the halves
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut store = ParamStore::new();
    let ssem = Ssem::new(&mut store, 2, 3, 3, &mut rng);
    let seq = random_sequences(&mut rng, 1, 6).remove(0);
    let rev: Vec<_> = seq.iter().rev().cloned().collect();
    let f = |s: &Vec<Vec<f64>>| {
        let p = PackedSequences::new(std::slice::from_ref(s), 2).unwrap();
        let mut t = Tape::new();
        let v = ssem.forward(&mut t, &store, &p).unwrap();
        t.value(v).data().to_vec()
    };
    let (a, b) = (f(&seq), f(&rev));
    assert_ne!(a[..3], a[3..]);
    assert_ne!(a, b);
}

#[test]
fn angle_examples() {
    let o = Point::new(0.0, 0.0);
    assert!((angle(o, Point::new(1.0, 1.0)) - PI / 4.0).abs() < 1e-15);
    assert!((angle(o, Point::new(-1.0, 0.0)) - PI).abs() < 1e-15);
    assert_eq!(angle(o, o), 0.0);
}

#[test]
fn knn_graph_example() {
    let c = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(5.0, 0.0)];
    let g = StrokeGraph::build(&c, 1);
    let pairs: Vec<(usize, usize)> = g.edges.src.iter().copied().zip(g.edges.dst.iter().copied()).collect();
    assert_eq!(pairs, vec![(0, 1), (1, 0), (2, 1)]);
    assert!(StrokeGraph::build(&c[..1], 5).edges.is_empty());
}

#[test]
fn knn_ties_go_to_lower_index() {
    let c = [Point::new(0.0, 0.0), Point::new(-1.0, 0.0), Point::new(1.0, 0.0)];
    let g = StrokeGraph::build(&c, 1);
    assert_eq!(g.edges.dst[0], 1);
}

proptest! {
    #[test]
    fn out_degree_is_min_k_and_n_minus_1(
        pts in prop::collection::vec((0.0..10.0f64, 0.0..10.0f64), 1..12),
        k in 1usize..8,
    ) {
        let c: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
        let g = StrokeGraph::build(&c, k);
        for i in 0..c.len() {
            let deg = g.edges.src.iter().filter(|&&s| s == i).count();
            prop_assert_eq!(deg, k.min(c.len() - 1));
        }
        prop_assert!(g.edges.src.iter().zip(g.edges.dst.iter()).all(|(s, d)| s != d));
        prop_assert!(g.edge_inputs.iter().flatten().all(|v| v.is_finite()));
    }
}

#[test]
fn zero_edge_mlp_gives_zero_weights() {
    let mut model = SsiModel::<f64>::new(small_config(), 3);
    for layer in &model.stem.edge_mlp.layers {
        for id in [layer.weight, layer.bias] {
            let t = model.store.get_mut(id);
            *t = Tensor::zeros(t.rows(), t.cols());
        }
    }
    let c = [Point::new(0.1, 0.2), Point::new(0.5, 0.5), Point::new(0.9, 0.1)];
    let g = StrokeGraph::build(&c, 2);
    let mut tape = Tape::new();
    let w = model.stem.edge_weights(&mut tape, &model.store, &g).unwrap();
    assert_eq!(tape.value(w).rows(), 6);
    assert!(tape.value(w).data().iter().all(|&v| v == 0.0));
}

#[test]
fn edgeless_identity_layer_keeps_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::new();
    let layer = TagLayer::new(&mut store, "t", 3, 3, 2, &mut rng);
    let mut theta = Tensor::zeros(9, 3);
    for i in 0..3 {
        theta.set(i, i, 1.0);
    }
    *store.get_mut(layer.theta) = theta;
    let x = Tensor::uniform(4, 3, -1.0, 1.0, &mut rng);
    assert_eq!(tagconv_sparse(&store, &layer, 4, &[], &[], &[], &x), x);
}

#[test]
fn chain_matches_dense_powers() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut store = ParamStore::new();
    let layer = TagLayer::new(&mut store, "t", 2, 3, 3, &mut rng);
    let (src, dst, w) = (vec![0, 1, 1, 2], vec![1, 0, 2, 1], vec![1.0, 0.5, 2.0, 1.5]);
    let x = Tensor::uniform(3, 2, -1.0, 1.0, &mut rng);
    let got = tagconv_sparse(&store, &layer, 3, &src, &dst, &w, &x);
    let rows: Vec<Vec<f64>> = (0..3).map(|i| x.row(i).to_vec()).collect();
    let want = tagconv_dense(&store, &layer, &dense_adjacency(3, &src, &dst, &w), &rows);
    for i in 0..3 {
        for j in 0..3 {
            assert!((got.get(i, j) - want[i][j]).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_hops_is_a_per_node_linear_layer() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut store = ParamStore::new();
    let layer = TagLayer::new(&mut store, "t", 3, 2, 0, &mut rng);
    let x = Tensor::uniform(4, 3, -1.0, 1.0, &mut rng);
    let got = tagconv_sparse(&store, &layer, 4, &[0, 1], &[1, 2], &[1.0, 1.0], &x);
    assert_eq!(got, x.matmul(store.get(layer.theta)));
}

#[test]
fn random_graphs_match_dense_oracle() {
    let err = tagconv_oracle_sweep(100, 11);
    assert!(err < 1e-10, "{err}");
}

#[test]
fn isolated_vertex_sees_only_itself() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut store = ParamStore::new();
    let layer = TagLayer::new(&mut store, "t", 2, 2, 3, &mut rng);
    let x = Tensor::uniform(3, 2, -1.0, 1.0, &mut rng);
    let a = tagconv_sparse(&store, &layer, 3, &[0, 1], &[1, 0], &[1.0, 1.0], &x);
    let mut x2 = x.clone();
    x2.set(0, 0, 5.0);
    let b = tagconv_sparse(&store, &layer, 3, &[0, 1], &[1, 0], &[1.0, 1.0], &x2);
    assert_eq!(a.row(2), b.row(2));
    let own = x.matmul(&Tensor::from_vec(2, 2, store.get(layer.theta).data()[..4].to_vec()));
    assert!((a.get(2, 0) - own.get(2, 0)).abs() < 1e-15);
}

#[test]
fn equal_logits_pick_smallest_id() {
    let p = predict_row(&[0.5f64; 22]);
    assert_eq!(p.label, CategoryId::SKIN);
    assert!((p.confidence - 1.0 / 22.0).abs() < 1e-15);
    let mut l = [0.0f64; 22];
    l[7] = 3.0;
    l[9] = 3.0;
    assert_eq!(predict_row(&l).label.index(), 7);
}

#[test]
fn vote_examples() {
    let (hat, hair) = (CategoryId::HAT, CategoryId::HAIR);
    assert_eq!(vote(&[1, 1, 1], &[10, 10, 10], &[hat, hat, hair]), vec![hat; 3]);
    assert_eq!(vote(&[4], &[3], &[hair]), vec![hair]);
    assert_eq!(vote(&[2, 2], &[50, 20], &[hat, hair]), vec![hat; 2]);
    assert_eq!(vote(&[2, 2], &[20, 50], &[hat, hair]), vec![hair; 2]);
    // equal weight: smaller class id
    assert_eq!(vote(&[2, 2], &[20, 20], &[hat, hair]), vec![hair; 2]);
}

proptest! {
    #[test]
    fn vote_is_idempotent(items in prop::collection::vec((0u64..4, 1usize..50, 0u8..22), 0..20)) {
        let parents: Vec<u64> = items.iter().map(|i| i.0).collect();
        let sizes: Vec<usize> = items.iter().map(|i| i.1).collect();
        let labels: Vec<CategoryId> = items.iter().map(|i| CategoryId::new(i.2).unwrap()).collect();
        let once = vote(&parents, &sizes, &labels);
        prop_assert_eq!(vote(&parents, &sizes, &once), once);
    }
}

#[test]
fn vote_postprocess_relabels_segments() {
    let mut sketch = VectorSketch::new(64, 64);
    let long: Vec<(f64, f64)> = (0..70).map(|i| (i as f64 * 0.5, 3.0)).collect();
    let mut segs = sketchsem::sketch::split_stroke(&Stroke::from_xy(&long, 9, None), 50);
    segs[0].label = Some(CategoryId::HAT);
    segs[1].label = Some(CategoryId::HAIR);
    sketch.strokes = segs;
    let out = vote_postprocess(&sketch);
    assert!(out.strokes.iter().all(|s| s.label == Some(CategoryId::HAT)));
    assert_eq!(vote_postprocess(&out), out);
}

#[test]
fn classify_is_deterministic_and_sized() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sketch = random_sketch(&mut rng, 7);
    let model = SsiModel::<f64>::new(small_config(), 9);
    let a = model.classify(&sketch).unwrap();
    assert_eq!(a.len(), 7);
    assert_eq!(a, model.classify(&sketch).unwrap());
    assert!(model.classify(&VectorSketch::new(8, 8)).unwrap().is_empty());
}

#[test]
fn predictions_follow_stroke_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let sketch = random_sketch(&mut rng, 8);
    let model = SsiModel::<f64>::new(small_config(), 10);
    let base = model.classify(&sketch).unwrap();
    let perm = [3, 0, 7, 1, 6, 2, 5, 4];
    let mut shuffled = sketch.clone();
    shuffled.strokes = perm.iter().map(|&i| sketch.strokes[i].clone()).collect();
    let got = model.classify(&shuffled).unwrap();
    for (k, &i) in perm.iter().enumerate() {
        assert_eq!(got[k].label, base[i].label);
        assert!((got[k].confidence - base[i].confidence).abs() < 1e-12);
    }
}

#[test]
fn batch_classification_matches_single() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (a, b) = (random_sketch(&mut rng, 4), random_sketch(&mut rng, 6));
    let model = SsiModel::<f64>::new(small_config(), 12);
    let batch = model.classify_batch(&[&a, &VectorSketch::new(64, 64), &b]).unwrap();
    assert_eq!(batch[0].len(), 4);
    assert!(batch[1].is_empty());
    for (x, y) in batch[2].iter().zip(model.classify(&b).unwrap()) {
        assert_eq!(x.label, y.label);
        assert!((x.confidence - y.confidence).abs() < 1e-12);
    }
}

#[test]
fn gradients_through_whole_model() {
    assert!(ssem_gradcheck(1) < 1e-4);
    assert!(tagconv_gradcheck(2) < 1e-4);
    let err = ssi_end_to_end_gradcheck(3, 5);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn one_sketch_loss_decreases_for_ten_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let sketch = random_sketch(&mut rng, 6);
    let cfg = SsiTrainConfig {
        model: small_config(),
        ..SsiTrainConfig::default()
    };
    let mut trainer = SsiTrainer::<f64>::new(&cfg);
    let losses: Vec<f64> = (0..11).map(|_| trainer.step(&[&sketch]).unwrap().0).collect();
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}

#[test]
fn training_is_seed_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let data: Vec<VectorSketch> = (0..6).map(|_| random_sketch(&mut rng, 5)).collect();
    let cfg = SsiTrainConfig {
        model: small_config(),
        epochs: 2,
        batch: 4,
        ..SsiTrainConfig::default()
    };
    let (m1, l1) = train_ssi::<f64>(&data, &cfg, |_| {}).unwrap();
    let (m2, l2) = train_ssi::<f64>(&data, &cfg, |_| {}).unwrap();
    assert_eq!(l1, l2);
    assert_eq!(m1.to_checkpoint(), m2.to_checkpoint());
    assert!((l1[1].lr - 0.001 * 0.98).abs() < 1e-15);
}

#[test]
fn empty_dataset_is_an_error() {
    let cfg = SsiTrainConfig::default();
    assert!(matches!(train_ssi::<f64>(&[], &cfg, |_| {}), Err(SsiError::EmptyDataset)));
}

#[test]
fn checkpoint_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let sketch = random_sketch(&mut rng, 5);
    let model = SsiModel::<f64>::new(small_config(), 15);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ssi.ckpt");
    model.save(&path).unwrap();
    let back = SsiModel::<f64>::load(&path).unwrap();
    assert_eq!(back.config, model.config);
    assert_eq!(back.classify(&sketch).unwrap(), model.classify(&sketch).unwrap());
}

#[test]
fn f32_model_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let sketch = random_sketch(&mut rng, 5);
    let model = SsiModel::<f32>::new(small_config(), 16);
    assert_eq!(model.classify(&sketch).unwrap().len(), 5);
}
