//! Stroke graph construction and graph convolution over stroke features.

use rand::Rng;

use crate::autodiff::{AutodiffError, EdgeIndex, ParamId, ParamStore, Tape, Tensor, Var};
use crate::nn::Mlp;
use crate::scalar::Scalar;
use crate::sketch::Point;

type Result<T> = std::result::Result<T, AutodiffError>;

/// Quadrant-aware direction from `a` to `b`; 0 when they coincide.
pub fn angle(a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    if dx == 0.0 && dy == 0.0 {
        0.0
    } else {
        dy.atan2(dx)
    }
}

/// Directed k-nearest-neighbor graph over stroke centroids. Edge `e` runs
/// from `src[e]` to one of its nearest strokes `dst[e]`; distance ties go to
/// the lower stroke index. `edge_inputs` row `e` is `(x_i, y_i, d, theta)`.
#[derive(Clone, Debug)]
pub struct StrokeGraph {
    pub centroids: Vec<Point>,
    pub edges: EdgeIndex,
    pub edge_inputs: Vec<[f64; 4]>,
}

impl StrokeGraph {
    pub fn build(centroids: &[Point], k_nn: usize) -> Self {
        let n = centroids.len();
        let (mut src, mut dst, mut edge_inputs) = (Vec::new(), Vec::new(), Vec::new());
        for (i, &qi) in centroids.iter().enumerate() {
            let mut others: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (qi.dist(centroids[j]), j)).collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(d, j) in others.iter().take(k_nn) {
                src.push(i);
                dst.push(j);
                edge_inputs.push([qi.x, qi.y, d, angle(qi, centroids[j])]);
            }
        }
        Self {
            centroids: centroids.to_vec(),
            edges: EdgeIndex::new(src, dst, n),
            edge_inputs,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.centroids.len()
    }

    /// Disjoint union; vertex ids of later graphs are shifted.
    pub fn union(graphs: &[StrokeGraph]) -> Self {
        let (mut src, mut dst, mut edge_inputs, mut centroids) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for g in graphs {
            let base = centroids.len();
            src.extend(g.edges.src.iter().map(|&s| s + base));
            dst.extend(g.edges.dst.iter().map(|&d| d + base));
            edge_inputs.extend_from_slice(&g.edge_inputs);
            centroids.extend_from_slice(&g.centroids);
        }
        let n = centroids.len();
        Self {
            centroids,
            edges: EdgeIndex::new(src, dst, n),
            edge_inputs,
        }
    }

    pub fn edge_input_tensor<T: Scalar>(&self) -> Tensor<T> {
        let flat: Vec<f64> = self.edge_inputs.iter().flatten().copied().collect();
        Tensor::from_f64(self.edge_inputs.len(), 4, &flat)
    }
}

/// One propagation layer `sum_h A^h X Theta_h + b` with `A` the symmetric
/// degree-normalized weighted adjacency. The hop weights are stored stacked
/// as one `(hops + 1) * inputs x outputs` matrix.
#[derive(Clone, Debug)]
pub struct TagLayer {
    pub theta: ParamId,
    pub bias: ParamId,
    pub hops: usize,
    pub inputs: usize,
    pub outputs: usize,
}

impl TagLayer {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        outputs: usize,
        hops: usize,
        rng: &mut R,
    ) -> Self {
        let a = 1.0 / (((hops + 1) * inputs) as f64).sqrt();
        Self {
            theta: store.add(format!("{name}.theta"), Tensor::uniform((hops + 1) * inputs, outputs, -a, a, rng)),
            bias: store.add(format!("{name}.bias"), Tensor::zeros(1, outputs)),
            hops,
            inputs,
            outputs,
        }
    }

    /// `norm` holds the normalized weight of every edge (see `Tape::gcn_norm`).
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        x: Var,
        norm: Var,
        edges: &EdgeIndex,
    ) -> Result<Var> {
        let mut powers = vec![x];
        for _ in 0..self.hops {
            let prev = *powers.last().expect("hop 0 present");
            powers.push(tape.propagate(norm, prev, edges)?);
        }
        let stacked = if powers.len() == 1 { x } else { tape.concat_cols(&powers)? };
        let theta = tape.param(store, self.theta);
        let bias = tape.param(store, self.bias);
        let y = tape.matmul(stacked, theta)?;
        tape.add_row(y, bias)
    }
}

/// Edge-affinity MLP, graph layers and per-stroke classifier.
#[derive(Clone, Debug)]
pub struct Stem {
    pub edge_mlp: Mlp,
    pub layers: Vec<TagLayer>,
    pub classifier: Mlp,
}

#[derive(Clone, Copy, Debug)]
pub struct StemDims {
    pub inputs: usize,
    pub edge_hidden: usize,
    pub graph_dim: usize,
    pub graph_layers: usize,
    pub hops: usize,
    pub classifier_hidden: usize,
    pub classes: usize,
}

impl Stem {
    pub fn new<T: Scalar, R: Rng + ?Sized>(store: &mut ParamStore<T>, dims: StemDims, rng: &mut R) -> Self {
        let edge_mlp = Mlp::new(store, "stem.edge", &[4, dims.edge_hidden, 1], rng);
        // start with positive affinities so every neighbor contributes
        let out_bias = edge_mlp.output().bias;
        store.get_mut(out_bias).data_mut()[0] = T::one();
        let layers = (0..dims.graph_layers)
            .map(|l| {
                let inp = if l == 0 { dims.inputs } else { dims.graph_dim };
                TagLayer::new(store, &format!("stem.tag{l}"), inp, dims.graph_dim, dims.hops, rng)
            })
            .collect();
        let classifier = Mlp::new(
            store,
            "stem.classifier",
            &[dims.graph_dim, dims.classifier_hidden, dims.classes],
            rng,
        );
        Self {
            edge_mlp,
            layers,
            classifier,
        }
    }

    /// Learned affinity of every edge, `E x 1`.
    pub fn edge_weights<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, graph: &StrokeGraph) -> Result<Var> {
        let inp = tape.constant(graph.edge_input_tensor());
        self.edge_mlp.forward(tape, store, inp)
    }

    /// Class logits per vertex; ReLU follows every graph layer.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        features: Var,
        graph: &StrokeGraph,
    ) -> Result<Var> {
        let mut x = features;
        if !self.layers.is_empty() {
            let w = if graph.edges.is_empty() {
                tape.constant(Tensor::zeros(0, 1))
            } else {
                self.edge_weights(tape, store, graph)?
            };
            let norm = tape.gcn_norm(w, &graph.edges)?;
            for layer in &self.layers {
                x = layer.forward(tape, store, x, norm, &graph.edges)?;
                x = tape.relu(x);
            }
        }
        self.classifier.forward(tape, store, x)
    }
}
