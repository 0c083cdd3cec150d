//! Define-by-run tape over dense matrices.
//!
//! Every forward op appends a node holding its value and a record of its
//! parents. [`Tape::backward`] walks the nodes in reverse creation order,
//! which is a valid topological order because parents always precede
//! children.

use std::collections::HashMap;
use std::rc::Rc;

use super::params::{ParamId, ParamStore};
use super::tensor::{Shape, Tensor};
use super::AutodiffError;
use crate::scalar::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

type Result<T> = std::result::Result<T, AutodiffError>;

/// Directed edge list shared by graph ops.
#[derive(Clone, Debug)]
pub struct EdgeIndex {
    pub src: Rc<[usize]>,
    pub dst: Rc<[usize]>,
    pub num_nodes: usize,
}

impl EdgeIndex {
    pub fn new(src: Vec<usize>, dst: Vec<usize>, num_nodes: usize) -> Self {
        assert_eq!(src.len(), dst.len());
        assert!(src.iter().chain(dst.iter()).all(|&v| v < num_nodes));
        Self {
            src: src.into(),
            dst: dst.into(),
            num_nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }
}

enum Op<T> {
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulCol(Var, Var),
    Scale(Var, T),
    Offset(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    LeakyRelu(Var, T),
    Sum(Var),
    Mean(Var),
    Norm(Var),
    Mse(Var, Var),
    SoftmaxCe {
        logits: Var,
        targets: Rc<[usize]>,
        probs: Tensor<T>,
    },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    Gather(Var, Rc<[Option<usize>]>),
    Reshape(Var),
    GroupMean(Var, usize),
    GcnNorm {
        weights: Var,
        edges: EdgeIndex,
        inv_sqrt_deg: Vec<T>,
    },
    Propagate {
        norm: Var,
        x: Var,
        edges: EdgeIndex,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Recording of one forward pass. Rebuilt for every pass.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor<T>>>,
    bound: HashMap<ParamId, Var>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err(op: &'static str, lhs: Shape, rhs: Shape) -> AutodiffError {
    AutodiffError::Shape { op, lhs, rhs }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
            bound: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last `backward` loss with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Differentiable leaf input.
    pub fn var(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Binds a stored parameter to this tape, once per tape.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        if let Some(&v) = self.bound.get(&id) {
            return v;
        }
        let v = self.push(store.get(id).clone(), Op::Param, true);
        self.bound.insert(id, v);
        v
    }

    /// Like [`Tape::param`] but the parameter is treated as frozen.
    pub fn frozen_param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        self.constant(store.get(id).clone())
    }

    // ---- linear algebra ------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.cols != sb.rows {
            return Err(shape_err("matmul", sa, sb));
        }
        let out = self.value(a).matmul(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::MatMul(a, b), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err("add", sa, sb));
        }
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Add(a, b), ng))
    }

    /// `x + row` with `row` (`1 x c`) broadcast over every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (sx, sr) = (self.shape(x), self.shape(row));
        if sr.rows != 1 || sr.cols != sx.cols {
            return Err(shape_err("add_row", sx, sr));
        }
        let mut out = self.value(x).clone();
        let r = self.value(row).data().to_vec();
        for i in 0..sx.rows {
            for (o, &b) in out.row_mut(i).iter_mut().zip(&r) {
                *o += b;
            }
        }
        let ng = self.ng(x) || self.ng(row);
        Ok(self.push(out, Op::AddRow(x, row), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err("sub", sa, sb));
        }
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Sub(a, b), ng))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err("mul", sa, sb));
        }
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Mul(a, b), ng))
    }

    /// `x * col` with `col` (`r x 1`) broadcast along each row.
    pub fn mul_col(&mut self, x: Var, col: Var) -> Result<Var> {
        let (sx, sc) = (self.shape(x), self.shape(col));
        if sc.cols != 1 || sc.rows != sx.rows {
            return Err(shape_err("mul_col", sx, sc));
        }
        let mut out = self.value(x).clone();
        let c = self.value(col).data().to_vec();
        for (i, &s) in c.iter().enumerate() {
            for o in out.row_mut(i) {
                *o *= s;
            }
        }
        let ng = self.ng(x) || self.ng(col);
        Ok(self.push(out, Op::MulCol(x, col), ng))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let out = self.value(a).map(|x| x * s);
        let ng = self.ng(a);
        self.push(out, Op::Scale(a, s), ng)
    }

    /// `a + c` for a constant `c`.
    pub fn offset(&mut self, a: Var, c: T) -> Var {
        let out = self.value(a).map(|x| x + c);
        let ng = self.ng(a);
        self.push(out, Op::Offset(a), ng)
    }

    // ---- activations ---------------------------------------------------

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let ng = self.ng(a);
        self.push(out, Op::Sigmoid(a), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(T::tanh);
        let ng = self.ng(a);
        self.push(out, Op::Tanh(a), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(T::zero()));
        let ng = self.ng(a);
        self.push(out, Op::Relu(a), ng)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Var {
        let out = self.value(a).map(|x| if x > T::zero() { x } else { x * slope });
        let ng = self.ng(a);
        self.push(out, Op::LeakyRelu(a, slope), ng)
    }

    // ---- reductions and losses ------------------------------------------

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        let ng = self.ng(a);
        self.push(out, Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let n = T::of(v.len().max(1) as f64);
        let out = Tensor::scalar(v.sum() / n);
        let ng = self.ng(a);
        self.push(out, Op::Mean(a), ng)
    }

    /// Frobenius norm. The gradient at the origin is taken as zero.
    pub fn norm(&mut self, a: Var) -> Var {
        let ss: T = self.value(a).data().iter().map(|&x| x * x).sum();
        let out = Tensor::scalar(ss.sqrt());
        let ng = self.ng(a);
        self.push(out, Op::Norm(a), ng)
    }

    /// Mean squared difference.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err("mse", sa, sb));
        }
        let va = self.value(a).data();
        let vb = self.value(b).data();
        let n = T::of(va.len().max(1) as f64);
        let s: T = va.iter().zip(vb).map(|(&x, &y)| (x - y) * (x - y)).sum();
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Tensor::scalar(s / n), Op::Mse(a, b), ng))
    }

    /// Mean over rows of `-log softmax(logits)[target]`, via log-sum-exp.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let s = self.shape(logits);
        if targets.len() != s.rows {
            return Err(shape_err("softmax_cross_entropy", s, Shape::new(targets.len(), 1)));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= s.cols) {
            return Err(AutodiffError::Invalid {
                op: "softmax_cross_entropy",
                msg: format!("target class {t} outside {} logits", s.cols),
            });
        }
        let lv = self.value(logits);
        let mut probs = Tensor::zeros(s.rows, s.cols);
        let mut total = T::zero();
        for (r, &t) in targets.iter().enumerate() {
            let row = lv.row(r);
            let m = row.iter().copied().fold(T::neg_infinity(), T::max);
            let z: T = row.iter().map(|&x| (x - m).exp()).sum();
            let lse = m + z.ln();
            total += lse - row[t];
            for (p, &x) in probs.row_mut(r).iter_mut().zip(row) {
                *p = (x - m).exp() / z;
            }
        }
        let n = T::of(s.rows.max(1) as f64);
        let ng = self.ng(logits);
        Ok(self.push(
            Tensor::scalar(total / n),
            Op::SoftmaxCe {
                logits,
                targets: targets.into(),
                probs,
            },
            ng,
        ))
    }

    // ---- structural ops --------------------------------------------------

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or(AutodiffError::Invalid {
            op: "concat_cols",
            msg: "no inputs".into(),
        })?;
        let rows = self.shape(*first).rows;
        let mut cols = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.rows != rows {
                return Err(shape_err("concat_cols", self.shape(*first), s));
            }
            cols += s.cols;
        }
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                out.row_mut(r)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), ng))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or(AutodiffError::Invalid {
            op: "concat_rows",
            msg: "no inputs".into(),
        })?;
        let cols = self.shape(*first).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.cols != cols {
                return Err(shape_err("concat_rows", self.shape(*first), s));
            }
            rows += s.rows;
            data.extend_from_slice(self.value(p).data());
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(Tensor::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()), ng))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(a);
        if start + len > s.cols {
            return Err(shape_err("slice_cols", s, Shape::new(start, len)));
        }
        let v = self.value(a);
        let mut out = Tensor::zeros(s.rows, len);
        for r in 0..s.rows {
            out.row_mut(r).copy_from_slice(&v.row(r)[start..start + len]);
        }
        let ng = self.ng(a);
        Ok(self.push(out, Op::SliceCols(a, start), ng))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(a);
        if start + len > s.rows {
            return Err(shape_err("slice_rows", s, Shape::new(start, len)));
        }
        let c = s.cols;
        let out = Tensor::from_vec(len, c, self.value(a).data()[start * c..(start + len) * c].to_vec());
        let ng = self.ng(a);
        Ok(self.push(out, Op::SliceRows(a, start), ng))
    }

    /// Builds a matrix whose row `i` is row `index[i]` of `a`, or zeros for `None`.
    pub fn gather_rows(&mut self, a: Var, index: Rc<[Option<usize>]>) -> Result<Var> {
        let s = self.shape(a);
        if let Some(bad) = index.iter().flatten().find(|&&i| i >= s.rows) {
            return Err(AutodiffError::Invalid {
                op: "gather_rows",
                msg: format!("row {bad} out of range for {s}"),
            });
        }
        let v = self.value(a);
        let mut out = Tensor::zeros(index.len(), s.cols);
        for (i, src) in index.iter().enumerate() {
            if let Some(j) = *src {
                out.row_mut(i).copy_from_slice(v.row(j));
            }
        }
        let ng = self.ng(a);
        Ok(self.push(out, Op::Gather(a, index), ng))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let s = self.shape(a);
        if rows * cols != s.len() {
            return Err(shape_err("reshape", s, Shape::new(rows, cols)));
        }
        let out = self.value(a).clone().reshaped(rows, cols);
        let ng = self.ng(a);
        Ok(self.push(out, Op::Reshape(a), ng))
    }

    /// Mean of each consecutive block of `group` rows.
    pub fn group_mean(&mut self, a: Var, group: usize) -> Result<Var> {
        let s = self.shape(a);
        if group == 0 || s.rows % group != 0 {
            return Err(shape_err("group_mean", s, Shape::new(group, 1)));
        }
        let v = self.value(a);
        let groups = s.rows / group;
        let inv = T::one() / T::of(group as f64);
        let mut out = Tensor::zeros(groups, s.cols);
        for g in 0..groups {
            for r in g * group..(g + 1) * group {
                for (o, &x) in out.row_mut(g).iter_mut().zip(v.row(r)) {
                    *o += x;
                }
            }
            for o in out.row_mut(g) {
                *o *= inv;
            }
        }
        let ng = self.ng(a);
        Ok(self.push(out, Op::GroupMean(a, group), ng))
    }

    // ---- graph ops -------------------------------------------------------

    /// Symmetric degree normalization of edge weights:
    /// `w_e / sqrt(deg(src_e) * deg(dst_e))`, where `deg(i)` sums the weights
    /// of edges leaving `i`. Vertices with non-positive degree contribute 0.
    pub fn gcn_norm(&mut self, weights: Var, edges: &EdgeIndex) -> Result<Var> {
        let s = self.shape(weights);
        if s.cols != 1 || s.rows != edges.len() {
            return Err(shape_err("gcn_norm", s, Shape::new(edges.len(), 1)));
        }
        let w = self.value(weights).data();
        let mut deg = vec![T::zero(); edges.num_nodes];
        for (e, &i) in edges.src.iter().enumerate() {
            deg[i] += w[e];
        }
        let tiny = T::of(1e-12);
        let inv_sqrt_deg: Vec<T> = deg
            .iter()
            .map(|&d| if d > tiny { T::one() / d.sqrt() } else { T::zero() })
            .collect();
        let out: Vec<T> = (0..edges.len())
            .map(|e| inv_sqrt_deg[edges.src[e]] * w[e] * inv_sqrt_deg[edges.dst[e]])
            .collect();
        let ng = self.ng(weights);
        Ok(self.push(
            Tensor::from_vec(edges.len(), 1, out),
            Op::GcnNorm {
                weights,
                edges: edges.clone(),
                inv_sqrt_deg,
            },
            ng,
        ))
    }

    /// Sparse aggregation `out[src_e] += norm_e * x[dst_e]`.
    pub fn propagate(&mut self, norm: Var, x: Var, edges: &EdgeIndex) -> Result<Var> {
        let (sn, sx) = (self.shape(norm), self.shape(x));
        if sn.cols != 1 || sn.rows != edges.len() || sx.rows != edges.num_nodes {
            return Err(shape_err("propagate", sn, sx));
        }
        let nv = self.value(norm).data();
        let xv = self.value(x);
        let mut out = Tensor::zeros(sx.rows, sx.cols);
        for e in 0..edges.len() {
            let w = nv[e];
            let src = xv.row(edges.dst[e]).to_vec();
            for (o, s) in out.row_mut(edges.src[e]).iter_mut().zip(src) {
                *o += w * s;
            }
        }
        let ng = self.ng(norm) || self.ng(x);
        Ok(self.push(
            out,
            Op::Propagate {
                norm,
                x,
                edges: edges.clone(),
            },
            ng,
        ))
    }

    // ---- backward --------------------------------------------------------

    /// Reverse sweep from a scalar `loss`, filling gradients for every node
    /// that depends on a differentiable leaf or parameter.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let s = self.shape(loss);
        if s != Shape::SCALAR {
            return Err(AutodiffError::NonScalarLoss(s));
        }
        let n = self.nodes.len();
        self.grads = (0..n).map(|_| None).collect();
        self.grads[loss.0] = Some(Tensor::scalar(T::one()));
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            self.backprop_node(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn backprop_node(&mut self, i: usize, g: &Tensor<T>) {
        let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
        let nodes = &self.nodes;
        let grads = &mut self.grads;
        let val = |v: &Var| &nodes[v.0].value;
        match &op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (val(a).shape(), val(b).shape());
                let (m, k, n) = (sa.rows, sa.cols, sb.cols);
                if let Some(ga) = acc(nodes, grads, *a) {
                    T::gemm(
                        m,
                        n,
                        k,
                        T::one(),
                        g.data(),
                        (n as isize, 1),
                        val(b).data(),
                        (1, n as isize),
                        T::one(),
                        ga.data_mut(),
                        (k as isize, 1),
                    );
                }
                if let Some(gb) = acc(nodes, grads, *b) {
                    T::gemm(
                        k,
                        m,
                        n,
                        T::one(),
                        val(a).data(),
                        (1, k as isize),
                        g.data(),
                        (n as isize, 1),
                        T::one(),
                        gb.data_mut(),
                        (n as isize, 1),
                    );
                }
            }
            Op::Add(a, b) => {
                if let Some(ga) = acc(nodes, grads, *a) {
                    ga.add_assign(g);
                }
                if let Some(gb) = acc(nodes, grads, *b) {
                    gb.add_assign(g);
                }
            }
            Op::AddRow(x, row) => {
                if let Some(gx) = acc(nodes, grads, *x) {
                    gx.add_assign(g);
                }
                if let Some(gr) = acc(nodes, grads, *row) {
                    for r in 0..g.rows() {
                        for (d, &x) in gr.data_mut().iter_mut().zip(g.row(r)) {
                            *d += x;
                        }
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = acc(nodes, grads, *a) {
                    ga.add_assign(g);
                }
                if let Some(gb) = acc(nodes, grads, *b) {
                    for (d, &x) in gb.data_mut().iter_mut().zip(g.data()) {
                        *d -= x;
                    }
                }
            }
            Op::Mul(a, b) => {
                if let Some(ga) = acc(nodes, grads, *a) {
                    zip_acc(ga, g, val(b), |gi, y| gi * y);
                }
                if let Some(gb) = acc(nodes, grads, *b) {
                    zip_acc(gb, g, val(a), |gi, x| gi * x);
                }
            }
            Op::MulCol(x, col) => {
                if let Some(gx) = acc(nodes, grads, *x) {
                    for (r, &s) in val(col).data().iter().enumerate() {
                        for (d, &gi) in gx.row_mut(r).iter_mut().zip(g.row(r)) {
                            *d += gi * s;
                        }
                    }
                }
                if let Some(gc) = acc(nodes, grads, *col) {
                    let xv = val(x);
                    for r in 0..xv.rows() {
                        let dot: T = g.row(r).iter().zip(xv.row(r)).map(|(&a, &b)| a * b).sum();
                        gc.data_mut()[r] += dot;
                    }
                }
            }
            Op::Scale(a, s) => {
                if let Some(ga) = acc(nodes, grads, *a) {
                    for (d, &x) in ga.data_mut().iter_mut().zip(g.data()) {
                        *d += x * *s;
                    }
                }
            }
            Op::Offset(a) => {
                if let Some(ga) = acc(nodes, grads, *a) {
                    ga.add_assign(g);
                }
            }
            Op::Sigmoid(a) => {
                if let Some(ga) = acc(nodes, grads, *a) {
                    zip_acc(ga, g, &nodes[i].value, |gi, y| gi * y * (T::one() - y));
                }
            }
            Op::Tanh(a) => {
                if let Some(ga) = acc(nodes, grads, *a) {
                    zip_acc(ga, g, &nodes[i].value, |gi, y| gi * (T::one() - y * y));
                }
            }
            Op::Relu(a) => {
                if let Some(ga) = acc(nodes, grads, *a) {
                    zip_acc(ga, g, val(a), |gi, x| if x > T::zero() { gi } else { T::zero() });
                }
            }
            Op::LeakyRelu(a, slope) => {
                if let Some(ga) = acc(nodes, grads, *a) {
                    zip_acc(ga, g, val(a), |gi, x| if x > T::zero() { gi } else { gi * *slope });
                }
            }
            Op::Sum(a) => {
                let gv = g.item();
                if let Some(ga) = acc(nodes, grads, *a) {
                    for d in ga.data_mut() {
                        *d += gv;
                    }
                }
            }
            Op::Mean(a) => {
                let gv = g.item() / T::of(val(a).len().max(1) as f64);
                if let Some(ga) = acc(nodes, grads, *a) {
                    for d in ga.data_mut() {
                        *d += gv;
                    }
                }
            }
            Op::Norm(a) => {
                let nrm = nodes[i].value.item();
                if nrm > T::zero() {
                    let gv = g.item() / nrm;
                    if let Some(ga) = acc(nodes, grads, *a) {
                        for (d, &x) in ga.data_mut().iter_mut().zip(val(a).data()) {
                            *d += gv * x;
                        }
                    }
                }
            }
            Op::Mse(a, b) => {
                let two = T::of(2.0) * g.item() / T::of(val(a).len().max(1) as f64);
                let diff = val(a).zip_map(val(b), |x, y| (x - y) * two);
                if let Some(ga) = acc(nodes, grads, *a) {
                    ga.add_assign(&diff);
                }
                if let Some(gb) = acc(nodes, grads, *b) {
                    for (d, &x) in gb.data_mut().iter_mut().zip(diff.data()) {
                        *d -= x;
                    }
                }
            }
            Op::SoftmaxCe {
                logits,
                targets,
                probs,
            } => {
                let gv = g.item() / T::of(targets.len().max(1) as f64);
                if let Some(gl) = acc(nodes, grads, *logits) {
                    for (r, &t) in targets.iter().enumerate() {
                        for (c, (d, &p)) in gl.row_mut(r).iter_mut().zip(probs.row(r)).enumerate() {
                            let y = if c == t { T::one() } else { T::zero() };
                            *d += gv * (p - y);
                        }
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for p in parts {
                    let c = val(p).cols();
                    if let Some(gp) = acc(nodes, grads, *p) {
                        for r in 0..g.rows() {
                            for (d, &x) in gp.row_mut(r).iter_mut().zip(&g.row(r)[off..off + c]) {
                                *d += x;
                            }
                        }
                    }
                    off += c;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for p in parts {
                    let len = val(p).len();
                    if let Some(gp) = acc(nodes, grads, *p) {
                        for (d, &x) in gp.data_mut().iter_mut().zip(&g.data()[off..off + len]) {
                            *d += x;
                        }
                    }
                    off += len;
                }
            }
            Op::SliceCols(a, start) => {
                if let Some(ga) = acc(nodes, grads, *a) {
                    for r in 0..g.rows() {
                        for (d, &x) in ga.row_mut(r)[*start..].iter_mut().zip(g.row(r)) {
                            *d += x;
                        }
                    }
                }
            }
            Op::SliceRows(a, start) => {
                let off = *start * g.cols();
                if let Some(ga) = acc(nodes, grads, *a) {
                    for (d, &x) in ga.data_mut()[off..].iter_mut().zip(g.data()) {
                        *d += x;
                    }
                }
            }
            Op::Gather(a, index) => {
                if let Some(ga) = acc(nodes, grads, *a) {
                    for (r, src) in index.iter().enumerate() {
                        if let Some(j) = *src {
                            for (d, &x) in ga.row_mut(j).iter_mut().zip(g.row(r)) {
                                *d += x;
                            }
                        }
                    }
                }
            }
            Op::Reshape(a) => {
                if let Some(ga) = acc(nodes, grads, *a) {
                    for (d, &x) in ga.data_mut().iter_mut().zip(g.data()) {
                        *d += x;
                    }
                }
            }
            Op::GroupMean(a, group) => {
                let inv = T::one() / T::of(*group as f64);
                if let Some(ga) = acc(nodes, grads, *a) {
                    for gi in 0..g.rows() {
                        for r in gi * group..(gi + 1) * group {
                            for (d, &x) in ga.row_mut(r).iter_mut().zip(g.row(gi)) {
                                *d += x * inv;
                            }
                        }
                    }
                }
            }
            Op::GcnNorm {
                weights,
                edges,
                inv_sqrt_deg,
            } => {
                let w = val(weights).data();
                let gd = g.data();
                let mut g_inv = vec![T::zero(); edges.num_nodes];
                for e in 0..edges.len() {
                    let (s, d) = (edges.src[e], edges.dst[e]);
                    g_inv[s] += gd[e] * w[e] * inv_sqrt_deg[d];
                    g_inv[d] += gd[e] * w[e] * inv_sqrt_deg[s];
                }
                // d(deg^-1/2)/d(deg) = -deg^-3/2 / 2
                let half = T::of(0.5);
                let g_deg: Vec<T> = g_inv
                    .iter()
                    .zip(inv_sqrt_deg)
                    .map(|(&gi, &a)| -half * gi * a * a * a)
                    .collect();
                if let Some(gw) = acc(nodes, grads, *weights) {
                    for e in 0..edges.len() {
                        let (s, d) = (edges.src[e], edges.dst[e]);
                        gw.data_mut()[e] += gd[e] * inv_sqrt_deg[s] * inv_sqrt_deg[d] + g_deg[s];
                    }
                }
            }
            Op::Propagate { norm, x, edges } => {
                if let Some(gn) = acc(nodes, grads, *norm) {
                    let xv = val(x);
                    for e in 0..edges.len() {
                        let dot: T = g
                            .row(edges.src[e])
                            .iter()
                            .zip(xv.row(edges.dst[e]))
                            .map(|(&a, &b)| a * b)
                            .sum();
                        gn.data_mut()[e] += dot;
                    }
                }
                if let Some(gx) = acc(nodes, grads, *x) {
                    let nv = val(norm).data();
                    for e in 0..edges.len() {
                        let w = nv[e];
                        for (d, &gi) in gx.row_mut(edges.dst[e]).iter_mut().zip(g.row(edges.src[e])) {
                            *d += w * gi;
                        }
                    }
                }
            }
        }
        self.nodes[i].op = op;
    }

    /// Gradients of bound parameters after `backward`, keyed by parameter id.
    pub fn param_grads(&self) -> Vec<(ParamId, &Tensor<T>)> {
        let mut out: Vec<_> = self
            .bound
            .iter()
            .filter_map(|(&id, &v)| self.grad(v).map(|g| (id, g)))
            .collect();
        out.sort_by_key(|(id, _)| *id);
        out
    }
}

fn acc<'a, T: Scalar>(nodes: &[Node<T>], grads: &'a mut [Option<Tensor<T>>], v: Var) -> Option<&'a mut Tensor<T>> {
    let node = &nodes[v.0];
    if !node.needs_grad {
        return None;
    }
    let s = node.value.shape();
    Some(grads[v.0].get_or_insert_with(|| Tensor::zeros(s.rows, s.cols)))
}

fn zip_acc<T: Scalar>(acc: &mut Tensor<T>, g: &Tensor<T>, other: &Tensor<T>, f: impl Fn(T, T) -> T) {
    for ((a, &gi), &x) in acc.data_mut().iter_mut().zip(g.data()).zip(other.data()) {
        *a += f(gi, x);
    }
}
