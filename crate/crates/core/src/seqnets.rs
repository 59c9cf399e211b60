//! Recurrent and embedding building blocks: a GRU cell with per-gate weight
//! tensors, multi-layer unidirectional/bidirectional stacks, and embedding
//! tables that support both index lookup and simplex-weighted combination.
//!
//! Gate convention (normative for this artifact):
//! `z = sigmoid(W_z x + U_z h + b_z)`, `r = sigmoid(W_r x + U_r h + b_r)`,
//! `cand = tanh(W_h x + U_h (r*h) + b_h)`, `h' = (1-z)*h + z*cand`.

use std::path::Path;

use rand::Rng;

use crate::diffcore::{Graph, NodeId, ParameterSet, Tensor};
use crate::error::{Error, Result};

/// Weight matrix initialized uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
pub fn init_weight(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Tensor {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::from_vec(shape, data)
}

/// Embedding rows initialized uniform in [-0.1, 0.1].
pub fn init_embedding(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect();
    Tensor::from_vec(shape, data)
}

const GATES: [&str; 3] = ["z", "r", "h"];

fn register_cell(
    params: &mut ParameterSet,
    cell: &str,
    input_size: usize,
    hidden_size: usize,
    rng: &mut impl Rng,
) {
    for gate in GATES {
        params.add(
            &format!("{cell}.w_{gate}"),
            init_weight(&[hidden_size, input_size], input_size, rng),
        );
        params.add(
            &format!("{cell}.u_{gate}"),
            init_weight(&[hidden_size, hidden_size], hidden_size, rng),
        );
        params.add(&format!("{cell}.b_{gate}"), Tensor::zeros(&[hidden_size]));
    }
}

/// One GRU cell update. `cell` is the parameter-name prefix under which the
/// nine gate tensors were registered.
pub fn gru_cell_step(
    g: &mut Graph,
    params: &ParameterSet,
    cell: &str,
    x: NodeId,
    h: NodeId,
) -> NodeId {
    let gate = |g: &mut Graph, name: &str, xin: NodeId, hin: NodeId| {
        let w = g.param(params, &format!("{cell}.w_{name}"));
        let u = g.param(params, &format!("{cell}.u_{name}"));
        let b = g.param(params, &format!("{cell}.b_{name}"));
        let wx = g.matvec(w, xin);
        let uh = g.matvec(u, hin);
        let s = g.add(wx, uh);
        g.add(s, b)
    };
    let z_pre = gate(g, "z", x, h);
    let z = g.sigmoid(z_pre);
    let r_pre = gate(g, "r", x, h);
    let r = g.sigmoid(r_pre);
    let rh = g.mul(r, h);
    let c_pre = gate(g, "h", x, rh);
    let cand = g.tanh(c_pre);
    // h' = (1-z)*h + z*cand, written as h - z*h + z*cand
    let zh = g.mul(z, h);
    let keep = g.sub(h, zh);
    let zc = g.mul(z, cand);
    g.add(keep, zc)
}

/// A stack of GRU layers identified by a parameter-name prefix. The struct
/// holds only the configuration; weights live in the [`ParameterSet`].
#[derive(Debug, Clone)]
pub struct GruStack {
    pub prefix: String,
    pub num_layers: usize,
    pub input_size: usize,
    pub hidden_size: usize,
    pub bidirectional: bool,
}

impl GruStack {
    pub fn new(
        prefix: &str,
        num_layers: usize,
        input_size: usize,
        hidden_size: usize,
        bidirectional: bool,
    ) -> Self {
        assert!(num_layers >= 1, "GRU stack needs at least one layer");
        GruStack {
            prefix: prefix.to_string(),
            num_layers,
            input_size,
            hidden_size,
            bidirectional,
        }
    }

    /// Width of the per-position output: hidden size, doubled when the
    /// forward and backward states are concatenated.
    pub fn output_size(&self) -> usize {
        self.hidden_size * if self.bidirectional { 2 } else { 1 }
    }

    fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_size
        } else {
            self.output_size()
        }
    }

    fn cell_name(&self, layer: usize, backward: bool) -> String {
        if self.bidirectional {
            let dir = if backward { "bwd" } else { "fwd" };
            format!("{}.l{layer}.{dir}", self.prefix)
        } else {
            format!("{}.l{layer}", self.prefix)
        }
    }

    /// Create all gate tensors in a deterministic order.
    pub fn register(&self, params: &mut ParameterSet, rng: &mut impl Rng) {
        for layer in 0..self.num_layers {
            let input = self.layer_input(layer);
            register_cell(params, &self.cell_name(layer, false), input, self.hidden_size, rng);
            if self.bidirectional {
                register_cell(params, &self.cell_name(layer, true), input, self.hidden_size, rng);
            }
        }
    }
}

/// Run a bidirectional stack over a sequence of input vectors; returns one
/// output node per position, each the concatenation [forward; backward] of
/// the top layer's states.
pub fn bigru_encode(
    g: &mut Graph,
    params: &ParameterSet,
    stack: &GruStack,
    inputs: &[NodeId],
) -> Vec<NodeId> {
    assert!(stack.bidirectional, "bigru_encode needs a bidirectional stack");
    assert!(!inputs.is_empty(), "bigru_encode on an empty sequence");
    let t_len = inputs.len();
    let mut layer_in: Vec<NodeId> = inputs.to_vec();
    for layer in 0..stack.num_layers {
        let fwd_cell = stack.cell_name(layer, false);
        let bwd_cell = stack.cell_name(layer, true);
        let mut fwd = Vec::with_capacity(t_len);
        let mut h = g.constant(&[stack.hidden_size], vec![0.0; stack.hidden_size]);
        for &x in &layer_in {
            h = gru_cell_step(g, params, &fwd_cell, x, h);
            fwd.push(h);
        }
        let mut bwd = vec![None; t_len];
        let mut hb = g.constant(&[stack.hidden_size], vec![0.0; stack.hidden_size]);
        for t in (0..t_len).rev() {
            hb = gru_cell_step(g, params, &bwd_cell, layer_in[t], hb);
            bwd[t] = Some(hb);
        }
        layer_in = (0..t_len)
            .map(|t| g.concat(&[fwd[t], bwd[t].unwrap()]))
            .collect();
    }
    layer_in
}

/// Per-layer hidden states of a unidirectional stack, all zeros.
pub fn unigru_init_state(g: &mut Graph, stack: &GruStack) -> Vec<NodeId> {
    assert!(!stack.bidirectional, "unidirectional stack expected");
    (0..stack.num_layers)
        .map(|_| g.constant(&[stack.hidden_size], vec![0.0; stack.hidden_size]))
        .collect()
}

/// One step of a unidirectional stack. Updates `states` in place and
/// returns the top layer's new hidden state.
pub fn unigru_step(
    g: &mut Graph,
    params: &ParameterSet,
    stack: &GruStack,
    x: NodeId,
    states: &mut [NodeId],
) -> NodeId {
    assert!(!stack.bidirectional, "unigru_step needs a unidirectional stack");
    assert_eq!(states.len(), stack.num_layers, "state count mismatch");
    let mut input = x;
    for layer in 0..stack.num_layers {
        let cell = stack.cell_name(layer, false);
        let h = gru_cell_step(g, params, &cell, input, states[layer]);
        states[layer] = h;
        input = h;
    }
    input
}

/// Embedding table identified by a parameter name. Lookup by index reads a
/// row; lookup by simplex vector forms the convex combination s^T * weights,
/// which for a one-hot s reduces to the row it indexes.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub name: String,
    pub rows: usize,
    pub dim: usize,
}

impl EmbeddingTable {
    pub fn new(name: &str, rows: usize, dim: usize) -> Self {
        EmbeddingTable {
            name: name.to_string(),
            rows,
            dim,
        }
    }

    pub fn register(&self, params: &mut ParameterSet, rng: &mut impl Rng, trainable: bool) {
        let mut t = init_embedding(&[self.rows, self.dim], rng);
        t.set_requires_grad(trainable);
        params.add(&self.name, t);
    }

    pub fn matrix(&self, g: &mut Graph, params: &ParameterSet) -> NodeId {
        g.param(params, &self.name)
    }

    pub fn lookup(&self, g: &mut Graph, params: &ParameterSet, index: usize) -> NodeId {
        assert!(index < self.rows, "embedding index {index} out of range");
        let m = self.matrix(g, params);
        g.row(m, index)
    }

    pub fn weighted(&self, g: &mut Graph, params: &ParameterSet, simplex: NodeId) -> NodeId {
        let m = self.matrix(g, params);
        g.vecmat(simplex, m)
    }

    /// Overwrite rows from a pretrained text file: one token per line
    /// followed by `dim` whitespace-separated reals. Tokens the resolver
    /// does not know are skipped (their random rows stay). Returns the
    /// number of rows loaded.
    pub fn load_pretrained(
        &self,
        params: &mut ParameterSet,
        path: &Path,
        resolve: impl Fn(&str) -> Option<usize>,
    ) -> Result<usize> {
        let text = std::fs::read_to_string(path)?;
        let tensor = params
            .get_mut(&self.name)
            .unwrap_or_else(|| panic!("embedding {} not registered", self.name));
        let mut loaded = 0;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().unwrap();
            let values: Vec<f64> = fields
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::CorpusFile {
                    path: path.to_path_buf(),
                    message: format!("line {}: bad embedding value: {e}", lineno + 1),
                })?;
            if values.len() != self.dim {
                return Err(Error::CorpusFile {
                    path: path.to_path_buf(),
                    message: format!(
                        "line {}: {} values for embedding width {}",
                        lineno + 1,
                        values.len(),
                        self.dim
                    ),
                });
            }
            if let Some(row) = resolve(token) {
                assert!(row < self.rows, "resolver returned row out of range");
                tensor.data_mut()[row * self.dim..(row + 1) * self.dim]
                    .copy_from_slice(&values);
                loaded += 1;
            }
        }
        Ok(loaded)
    }
}
