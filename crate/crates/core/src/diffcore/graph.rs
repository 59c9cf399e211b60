use std::collections::HashMap;

use super::optim::Gradients;
use super::tensor::ParameterSet;
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`]. Ids are assigned in creation order, so
/// they double as a topological order for the backward sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    /// Parameter leaf; holds the index of the bound parameter.
    Leaf,
    Constant,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    /// Scalar node times arbitrary node.
    ScalarMul(NodeId, NodeId),
    Sum(NodeId),
    Dot(NodeId, NodeId),
    /// `A [r, c] * x [c] -> [r]`
    MatVec(NodeId, NodeId),
    /// `x [r] * A [r, c] -> [c]` (left multiplication, i.e. `A^T x`)
    VecMat(NodeId, NodeId),
    /// `A [r, k] * B [k, c] -> [r, c]`
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Exp(NodeId),
    Log(NodeId),
    Softplus(NodeId),
    Softmax(NodeId),
    LogSoftmax(NodeId),
    Concat(Vec<NodeId>),
    StackRows(Vec<NodeId>),
    Row(NodeId, usize),
    Pick(NodeId, usize),
    Slice(NodeId, usize),
    L2Norm(NodeId),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Constant => "constant",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::ScalarMul(..) => "scalar_mul",
            Op::Sum(_) => "sum",
            Op::Dot(..) => "dot",
            Op::MatVec(..) => "matvec",
            Op::VecMat(..) => "vecmat",
            Op::MatMul(..) => "matmul",
            Op::Transpose(_) => "transpose",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Exp(_) => "exp",
            Op::Log(_) => "log",
            Op::Softplus(_) => "softplus",
            Op::Softmax(_) => "softmax",
            Op::LogSoftmax(_) => "log_softmax",
            Op::Concat(_) => "concat",
            Op::StackRows(_) => "stack_rows",
            Op::Row(..) => "row",
            Op::Pick(..) => "pick",
            Op::Slice(..) => "slice",
            Op::L2Norm(_) => "l2norm",
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    shape: Vec<usize>,
    value: Vec<f64>,
    requires_grad: bool,
}

/// Define-by-run computation tape. Forward values are computed eagerly as
/// nodes are added; the first op to produce a non-finite value poisons the
/// graph, and [`backward_gradients`] reports that op instead of propagating
/// NaNs silently.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    param_nodes: HashMap<String, NodeId>,
    poisoned: Option<&'static str>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    // log(1 + e^x) without overflow for large |x|.
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn softmax_inplace(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Name of the first op that produced a non-finite value, if any.
    pub fn poisoned_by(&self) -> Option<&'static str> {
        self.poisoned
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    /// Scalar value of a node, failing if the forward pass was poisoned.
    pub fn scalar_value(&self, id: NodeId) -> Result<f64> {
        if let Some(op) = self.poisoned {
            return Err(Error::Numeric { op: op.to_string() });
        }
        let n = &self.nodes[id.0];
        assert!(
            n.value.len() == 1,
            "scalar_value on node of shape {:?}",
            n.shape
        );
        Ok(n.value[0])
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, value: Vec<f64>, requires_grad: bool) -> NodeId {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        if self.poisoned.is_none() && value.iter().any(|v| !v.is_finite()) {
            self.poisoned = Some(op.name());
        }
        self.nodes.push(Node {
            op,
            shape,
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Bind a parameter as a leaf node. Repeated binds of the same name
    /// return the same node, so gradient contributions from every use of a
    /// shared parameter accumulate in one place.
    pub fn param(&mut self, params: &ParameterSet, name: &str) -> NodeId {
        if let Some(&id) = self.param_nodes.get(name) {
            return id;
        }
        let idx = params
            .index_of(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"));
        let (_, t) = params.at(idx);
        let id = self.push(
            Op::Leaf,
            t.shape().to_vec(),
            t.data().to_vec(),
            t.requires_grad(),
        );
        self.param_nodes.insert(name.to_string(), id);
        id
    }

    /// Constant input: carries values but never receives gradient.
    pub fn constant(&mut self, shape: &[usize], data: Vec<f64>) -> NodeId {
        assert_eq!(
            data.len(),
            shape.iter().product::<usize>(),
            "constant data length does not match shape {shape:?}"
        );
        self.push(Op::Constant, shape.to_vec(), data, false)
    }

    pub fn constant_vec(&mut self, data: &[f64]) -> NodeId {
        self.constant(&[data.len()], data.to_vec())
    }

    pub fn constant_scalar(&mut self, v: f64) -> NodeId {
        self.constant(&[], vec![v])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.elementwise_pair(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.elementwise_pair(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.elementwise_pair(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    fn elementwise_pair(
        &mut self,
        a: NodeId,
        b: NodeId,
        what: &str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> NodeId {
        assert_eq!(
            self.shape(a),
            self.shape(b),
            "{what} shape mismatch: {:?} vs {:?}",
            self.shape(a),
            self.shape(b)
        );
        let value: Vec<f64> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.rg(a) || self.rg(b);
        self.push(op, shape, value, rg)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let value: Vec<f64> = self.nodes[a.0].value.iter().map(|&x| x * c).collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.rg(a);
        self.push(Op::Scale(a, c), shape, value, rg)
    }

    /// Scalar node `s` times every element of `a`.
    pub fn scalar_mul(&mut self, s: NodeId, a: NodeId) -> NodeId {
        assert_eq!(
            self.nodes[s.0].value.len(),
            1,
            "scalar_mul left operand must be a scalar, got shape {:?}",
            self.shape(s)
        );
        let c = self.nodes[s.0].value[0];
        let value: Vec<f64> = self.nodes[a.0].value.iter().map(|&x| c * x).collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.rg(s) || self.rg(a);
        self.push(Op::ScalarMul(s, a), shape, value, rg)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let value = vec![self.nodes[a.0].value.iter().sum()];
        let rg = self.rg(a);
        self.push(Op::Sum(a), vec![], value, rg)
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(
            self.shape(a),
            self.shape(b),
            "dot shape mismatch: {:?} vs {:?}",
            self.shape(a),
            self.shape(b)
        );
        let value = vec![self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(&x, &y)| x * y)
            .sum()];
        let rg = self.rg(a) || self.rg(b);
        self.push(Op::Dot(a, b), vec![], value, rg)
    }

    /// `A [r, c] * x [c] -> [r]`.
    pub fn matvec(&mut self, a: NodeId, x: NodeId) -> NodeId {
        let (r, c) = self.matrix_dims(a, "matvec");
        assert_eq!(
            self.shape(x),
            &[c],
            "matvec: matrix has {c} columns but vector has shape {:?}",
            self.shape(x)
        );
        let av = &self.nodes[a.0].value;
        let xv = &self.nodes[x.0].value;
        let mut value = vec![0.0; r];
        for i in 0..r {
            let row = &av[i * c..(i + 1) * c];
            value[i] = row.iter().zip(xv).map(|(&m, &v)| m * v).sum();
        }
        let rg = self.rg(a) || self.rg(x);
        self.push(Op::MatVec(a, x), vec![r], value, rg)
    }

    /// `x [r] * A [r, c] -> [c]`, i.e. the matrix applied on the left.
    pub fn vecmat(&mut self, x: NodeId, a: NodeId) -> NodeId {
        let (r, c) = self.matrix_dims(a, "vecmat");
        assert_eq!(
            self.shape(x),
            &[r],
            "vecmat: matrix has {r} rows but vector has shape {:?}",
            self.shape(x)
        );
        let av = &self.nodes[a.0].value;
        let xv = &self.nodes[x.0].value;
        let mut value = vec![0.0; c];
        for i in 0..r {
            let row = &av[i * c..(i + 1) * c];
            let xi = xv[i];
            for (out, &m) in value.iter_mut().zip(row) {
                *out += xi * m;
            }
        }
        let rg = self.rg(a) || self.rg(x);
        self.push(Op::VecMat(x, a), vec![c], value, rg)
    }

    /// `A [r, k] * B [k, c] -> [r, c]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (r, k) = self.matrix_dims(a, "matmul");
        let (k2, c) = self.matrix_dims(b, "matmul");
        assert_eq!(k, k2, "matmul inner dims differ: {k} vs {k2}");
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        let mut value = vec![0.0; r * c];
        for i in 0..r {
            for l in 0..k {
                let ail = av[i * k + l];
                let brow = &bv[l * c..(l + 1) * c];
                let out = &mut value[i * c..(i + 1) * c];
                for (o, &bval) in out.iter_mut().zip(brow) {
                    *o += ail * bval;
                }
            }
        }
        let rg = self.rg(a) || self.rg(b);
        self.push(Op::MatMul(a, b), vec![r, c], value, rg)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let (r, c) = self.matrix_dims(a, "transpose");
        let av = &self.nodes[a.0].value;
        let mut value = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                value[j * r + i] = av[i * c + j];
            }
        }
        let rg = self.rg(a);
        self.push(Op::Transpose(a), vec![c, r], value, rg)
    }

    fn matrix_dims(&self, a: NodeId, what: &str) -> (usize, usize) {
        let s = self.shape(a);
        assert!(s.len() == 2, "{what} expects a matrix, got shape {s:?}");
        (s[0], s[1])
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.elementwise_one(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.elementwise_one(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.elementwise_one(a, f64::exp, Op::Exp(a))
    }

    pub fn log(&mut self, a: NodeId) -> NodeId {
        self.elementwise_one(a, f64::ln, Op::Log(a))
    }

    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        self.elementwise_one(a, softplus, Op::Softplus(a))
    }

    fn elementwise_one(&mut self, a: NodeId, f: impl Fn(f64) -> f64, op: Op) -> NodeId {
        let value: Vec<f64> = self.nodes[a.0].value.iter().map(|&x| f(x)).collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.rg(a);
        self.push(op, shape, value, rg)
    }

    /// Numerically stable softmax over a vector.
    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        self.vector_dim(a, "softmax");
        let mut value = self.nodes[a.0].value.clone();
        softmax_inplace(&mut value);
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.rg(a);
        self.push(Op::Softmax(a), shape, value, rg)
    }

    /// Numerically stable log-softmax over a vector.
    pub fn log_softmax(&mut self, a: NodeId) -> NodeId {
        self.vector_dim(a, "log_softmax");
        let v = &self.nodes[a.0].value;
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + v.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
        let value: Vec<f64> = v.iter().map(|&x| x - lse).collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.rg(a);
        self.push(Op::LogSoftmax(a), shape, value, rg)
    }

    fn vector_dim(&self, a: NodeId, what: &str) -> usize {
        let s = self.shape(a);
        assert!(s.len() == 1, "{what} expects a vector, got shape {s:?}");
        s[0]
    }

    /// Concatenate vectors into one vector.
    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat of zero parts");
        let mut value = Vec::new();
        let mut rg = false;
        for &p in parts {
            self.vector_dim(p, "concat");
            value.extend_from_slice(&self.nodes[p.0].value);
            rg |= self.rg(p);
        }
        let n = value.len();
        self.push(Op::Concat(parts.to_vec()), vec![n], value, rg)
    }

    /// Stack equal-length vectors as the rows of a matrix.
    pub fn stack_rows(&mut self, rows: &[NodeId]) -> NodeId {
        assert!(!rows.is_empty(), "stack_rows of zero rows");
        let d = self.vector_dim(rows[0], "stack_rows");
        let mut value = Vec::with_capacity(rows.len() * d);
        let mut rg = false;
        for &r in rows {
            assert_eq!(
                self.vector_dim(r, "stack_rows"),
                d,
                "stack_rows with unequal row lengths"
            );
            value.extend_from_slice(&self.nodes[r.0].value);
            rg |= self.rg(r);
        }
        self.push(Op::StackRows(rows.to_vec()), vec![rows.len(), d], value, rg)
    }

    /// Row `i` of a matrix as a vector.
    pub fn row(&mut self, a: NodeId, i: usize) -> NodeId {
        let (r, c) = self.matrix_dims(a, "row");
        assert!(i < r, "row index {i} out of range for {r} rows");
        let value = self.nodes[a.0].value[i * c..(i + 1) * c].to_vec();
        let rg = self.rg(a);
        self.push(Op::Row(a, i), vec![c], value, rg)
    }

    /// Element `i` of a vector as a scalar.
    pub fn pick(&mut self, a: NodeId, i: usize) -> NodeId {
        let n = self.vector_dim(a, "pick");
        assert!(i < n, "pick index {i} out of range for length {n}");
        let value = vec![self.nodes[a.0].value[i]];
        let rg = self.rg(a);
        self.push(Op::Pick(a, i), vec![], value, rg)
    }

    /// Contiguous sub-vector `[start, start + len)` of a vector.
    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let n = self.vector_dim(a, "slice");
        assert!(
            len > 0 && start + len <= n,
            "slice [{start}, {start}+{len}) out of range for length {n}"
        );
        let value = self.nodes[a.0].value[start..start + len].to_vec();
        let rg = self.rg(a);
        self.push(Op::Slice(a, start), vec![len], value, rg)
    }

    /// Euclidean norm of a vector as a scalar. The gradient at the zero
    /// vector is defined as zero.
    pub fn l2norm(&mut self, a: NodeId) -> NodeId {
        self.vector_dim(a, "l2norm");
        let value = vec![self.nodes[a.0]
            .value
            .iter()
            .map(|&x| x * x)
            .sum::<f64>()
            .sqrt()];
        let rg = self.rg(a);
        self.push(Op::L2Norm(a), vec![], value, rg)
    }

    /// Mean of all elements as a scalar.
    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let n = self.nodes[a.0].value.len();
        let s = self.sum(a);
        self.scale(s, 1.0 / n as f64)
    }
}

/// Reverse sweep from a scalar `loss`, returning per-parameter gradients in
/// the order of `params`. Parameters that do not reach the loss (or were
/// never bound into the graph) get zero gradients.
pub fn backward_gradients(
    graph: &Graph,
    loss: NodeId,
    params: &ParameterSet,
) -> Result<Gradients> {
    if let Some(op) = graph.poisoned {
        return Err(Error::Numeric { op: op.to_string() });
    }
    let loss_node = &graph.nodes[loss.0];
    if !loss_node.shape.is_empty() {
        return Err(Error::NonScalarLoss {
            shape: loss_node.shape.clone(),
        });
    }

    let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
    grads[loss.0] = Some(vec![1.0]);

    for i in (0..=loss.0).rev() {
        let Some(g) = grads[i].take() else { continue };
        let node = &graph.nodes[i];
        if !node.requires_grad {
            continue;
        }
        let nodes = &graph.nodes;
        let acc = |grads: &mut Vec<Option<Vec<f64>>>, id: NodeId, f: &dyn Fn(&mut [f64])| {
            if !nodes[id.0].requires_grad {
                return;
            }
            let buf = grads[id.0].get_or_insert_with(|| vec![0.0; nodes[id.0].value.len()]);
            f(buf);
        };
        match &node.op {
            Op::Leaf | Op::Constant => {
                grads[i] = Some(g);
            }
            &Op::Add(a, b) => {
                acc(&mut grads, a, &|buf| {
                    for (o, &gi) in buf.iter_mut().zip(&g) {
                        *o += gi;
                    }
                });
                acc(&mut grads, b, &|buf| {
                    for (o, &gi) in buf.iter_mut().zip(&g) {
                        *o += gi;
                    }
                });
            }
            &Op::Sub(a, b) => {
                acc(&mut grads, a, &|buf| {
                    for (o, &gi) in buf.iter_mut().zip(&g) {
                        *o += gi;
                    }
                });
                acc(&mut grads, b, &|buf| {
                    for (o, &gi) in buf.iter_mut().zip(&g) {
                        *o -= gi;
                    }
                });
            }
            &Op::Mul(a, b) => {
                let av = &nodes[a.0].value;
                let bv = &nodes[b.0].value;
                acc(&mut grads, a, &|buf| {
                    for ((o, &gi), &y) in buf.iter_mut().zip(&g).zip(bv) {
                        *o += gi * y;
                    }
                });
                acc(&mut grads, b, &|buf| {
                    for ((o, &gi), &x) in buf.iter_mut().zip(&g).zip(av) {
                        *o += gi * x;
                    }
                });
            }
            &Op::Scale(a, c) => {
                acc(&mut grads, a, &|buf| {
                    for (o, &gi) in buf.iter_mut().zip(&g) {
                        *o += gi * c;
                    }
                });
            }
            &Op::ScalarMul(s, a) => {
                let sv = nodes[s.0].value[0];
                let av = &nodes[a.0].value;
                acc(&mut grads, s, &|buf| {
                    buf[0] += g.iter().zip(av).map(|(&gi, &x)| gi * x).sum::<f64>();
                });
                acc(&mut grads, a, &|buf| {
                    for (o, &gi) in buf.iter_mut().zip(&g) {
                        *o += gi * sv;
                    }
                });
            }
            &Op::Sum(a) => {
                let gs = g[0];
                acc(&mut grads, a, &|buf| {
                    for o in buf.iter_mut() {
                        *o += gs;
                    }
                });
            }
            &Op::Dot(a, b) => {
                let gs = g[0];
                let av = &nodes[a.0].value;
                let bv = &nodes[b.0].value;
                acc(&mut grads, a, &|buf| {
                    for (o, &y) in buf.iter_mut().zip(bv) {
                        *o += gs * y;
                    }
                });
                acc(&mut grads, b, &|buf| {
                    for (o, &x) in buf.iter_mut().zip(av) {
                        *o += gs * x;
                    }
                });
            }
            &Op::MatVec(a, x) => {
                let (r, c) = (nodes[a.0].shape[0], nodes[a.0].shape[1]);
                let av = &nodes[a.0].value;
                let xv = &nodes[x.0].value;
                acc(&mut grads, a, &|buf| {
                    for i2 in 0..r {
                        let gi = g[i2];
                        let out = &mut buf[i2 * c..(i2 + 1) * c];
                        for (o, &v) in out.iter_mut().zip(xv) {
                            *o += gi * v;
                        }
                    }
                });
                acc(&mut grads, x, &|buf| {
                    for i2 in 0..r {
                        let gi = g[i2];
                        let row = &av[i2 * c..(i2 + 1) * c];
                        for (o, &m) in buf.iter_mut().zip(row) {
                            *o += gi * m;
                        }
                    }
                });
            }
            &Op::VecMat(x, a) => {
                let (r, c) = (nodes[a.0].shape[0], nodes[a.0].shape[1]);
                let av = &nodes[a.0].value;
                let xv = &nodes[x.0].value;
                acc(&mut grads, x, &|buf| {
                    for i2 in 0..r {
                        let row = &av[i2 * c..(i2 + 1) * c];
                        buf[i2] += row.iter().zip(&g).map(|(&m, &gi)| m * gi).sum::<f64>();
                    }
                });
                acc(&mut grads, a, &|buf| {
                    for i2 in 0..r {
                        let xi = xv[i2];
                        let out = &mut buf[i2 * c..(i2 + 1) * c];
                        for (o, &gi) in out.iter_mut().zip(&g) {
                            *o += xi * gi;
                        }
                    }
                });
            }
            &Op::MatMul(a, b) => {
                let (r, k) = (nodes[a.0].shape[0], nodes[a.0].shape[1]);
                let c = nodes[b.0].shape[1];
                let av = &nodes[a.0].value;
                let bv = &nodes[b.0].value;
                // dA = g * B^T, dB = A^T * g
                acc(&mut grads, a, &|buf| {
                    for i2 in 0..r {
                        for l in 0..k {
                            let grow = &g[i2 * c..(i2 + 1) * c];
                            let brow = &bv[l * c..(l + 1) * c];
                            buf[i2 * k + l] +=
                                grow.iter().zip(brow).map(|(&gi, &bvx)| gi * bvx).sum::<f64>();
                        }
                    }
                });
                acc(&mut grads, b, &|buf| {
                    for l in 0..k {
                        for i2 in 0..r {
                            let ail = av[i2 * k + l];
                            let grow = &g[i2 * c..(i2 + 1) * c];
                            let out = &mut buf[l * c..(l + 1) * c];
                            for (o, &gi) in out.iter_mut().zip(grow) {
                                *o += ail * gi;
                            }
                        }
                    }
                });
            }
            &Op::Transpose(a) => {
                let (r, c) = (nodes[a.0].shape[0], nodes[a.0].shape[1]);
                acc(&mut grads, a, &|buf| {
                    for i2 in 0..r {
                        for j in 0..c {
                            buf[i2 * c + j] += g[j * r + i2];
                        }
                    }
                });
            }
            &Op::Tanh(a) => {
                let yv = &node.value;
                acc(&mut grads, a, &|buf| {
                    for ((o, &gi), &y) in buf.iter_mut().zip(&g).zip(yv) {
                        *o += gi * (1.0 - y * y);
                    }
                });
            }
            &Op::Sigmoid(a) => {
                let yv = &node.value;
                acc(&mut grads, a, &|buf| {
                    for ((o, &gi), &y) in buf.iter_mut().zip(&g).zip(yv) {
                        *o += gi * y * (1.0 - y);
                    }
                });
            }
            &Op::Exp(a) => {
                let yv = &node.value;
                acc(&mut grads, a, &|buf| {
                    for ((o, &gi), &y) in buf.iter_mut().zip(&g).zip(yv) {
                        *o += gi * y;
                    }
                });
            }
            &Op::Log(a) => {
                let xv = &nodes[a.0].value;
                acc(&mut grads, a, &|buf| {
                    for ((o, &gi), &x) in buf.iter_mut().zip(&g).zip(xv) {
                        *o += gi / x;
                    }
                });
            }
            &Op::Softplus(a) => {
                let xv = &nodes[a.0].value;
                acc(&mut grads, a, &|buf| {
                    for ((o, &gi), &x) in buf.iter_mut().zip(&g).zip(xv) {
                        *o += gi * sigmoid(x);
                    }
                });
            }
            &Op::Softmax(a) => {
                let yv = &node.value;
                let gy: f64 = g.iter().zip(yv).map(|(&gi, &y)| gi * y).sum();
                acc(&mut grads, a, &|buf| {
                    for ((o, &gi), &y) in buf.iter_mut().zip(&g).zip(yv) {
                        *o += y * (gi - gy);
                    }
                });
            }
            &Op::LogSoftmax(a) => {
                let yv = &node.value;
                let gsum: f64 = g.iter().sum();
                acc(&mut grads, a, &|buf| {
                    for ((o, &gi), &y) in buf.iter_mut().zip(&g).zip(yv) {
                        *o += gi - gsum * y.exp();
                    }
                });
            }
            Op::Concat(parts) => {
                let parts = parts.clone();
                let mut offset = 0;
                for p in parts {
                    let len = nodes[p.0].value.len();
                    let slice = &g[offset..offset + len];
                    acc(&mut grads, p, &|buf| {
                        for (o, &gi) in buf.iter_mut().zip(slice) {
                            *o += gi;
                        }
                    });
                    offset += len;
                }
            }
            Op::StackRows(rows) => {
                let rows = rows.clone();
                let d = nodes[rows[0].0].value.len();
                for (ri, r) in rows.into_iter().enumerate() {
                    let slice = &g[ri * d..(ri + 1) * d];
                    acc(&mut grads, r, &|buf| {
                        for (o, &gi) in buf.iter_mut().zip(slice) {
                            *o += gi;
                        }
                    });
                }
            }
            &Op::Row(a, ri) => {
                let c = nodes[a.0].shape[1];
                acc(&mut grads, a, &|buf| {
                    let out = &mut buf[ri * c..(ri + 1) * c];
                    for (o, &gi) in out.iter_mut().zip(&g) {
                        *o += gi;
                    }
                });
            }
            &Op::Pick(a, pi) => {
                let gs = g[0];
                acc(&mut grads, a, &|buf| {
                    buf[pi] += gs;
                });
            }
            &Op::Slice(a, start) => {
                acc(&mut grads, a, &|buf| {
                    for (o, &gi) in buf[start..start + g.len()].iter_mut().zip(&g) {
                        *o += gi;
                    }
                });
            }
            &Op::L2Norm(a) => {
                let norm = node.value[0];
                let gs = g[0];
                let xv = &nodes[a.0].value;
                if norm > 0.0 {
                    acc(&mut grads, a, &|buf| {
                        for (o, &x) in buf.iter_mut().zip(xv) {
                            *o += gs * x / norm;
                        }
                    });
                }
            }
        }
    }

    let mut out = Gradients::zeros_like(params);
    for (name, &id) in &graph.param_nodes {
        let idx = params.index_of(name).expect("bound param vanished");
        if let Some(Some(buf)) = grads.get(id.0) {
            out.buf_mut(idx).copy_from_slice(buf);
        }
    }
    Ok(out)
}
