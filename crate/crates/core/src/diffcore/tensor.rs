use std::collections::HashMap;

/// Dense 64-bit tensor, row-major. Rank 0 is a scalar (one element),
/// rank 1 a vector, rank 2 a matrix; nothing here needs more.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

fn numel_of(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; numel_of(shape)],
            requires_grad: true,
            grad: None,
        }
    }

    /// Panics if `data` does not match `shape` or contains a non-finite value.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            numel_of(shape),
            "tensor data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        assert!(
            data.iter().all(|v| v.is_finite()),
            "tensor construction with non-finite value"
        );
        Tensor {
            shape: shape.to_vec(),
            data,
            requires_grad: true,
            grad: None,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::from_vec(&[], vec![v])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn set_requires_grad(&mut self, flag: bool) {
        self.requires_grad = flag;
    }

    /// Panics if `grad` has a different element count than the tensor.
    pub fn set_grad(&mut self, grad: Vec<f64>) {
        assert_eq!(
            grad.len(),
            self.data.len(),
            "gradient length {} does not match tensor of {} elements",
            grad.len(),
            self.data.len()
        );
        self.grad = Some(grad);
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }
}

/// Ordered collection of named parameter tensors. Iteration order is
/// insertion order, which fixes the layout of gradient buffers, optimizer
/// moments, and checkpoints.
#[derive(Debug, Clone, Default)]
pub struct ParameterSet {
    entries: Vec<(String, Tensor)>,
    index: HashMap<String, usize>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics on duplicate names: every parameter has exactly one slot.
    pub fn add(&mut self, name: &str, tensor: Tensor) {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter name {name:?}"
        );
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push((name.to_string(), tensor));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.entries[i].1)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).copied().map(|i| &mut self.entries[i].1)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn at(&self, idx: usize) -> (&str, &Tensor) {
        let (name, t) = &self.entries[idx];
        (name, t)
    }

    pub fn at_mut(&mut self, idx: usize) -> (&str, &mut Tensor) {
        let (name, t) = &mut self.entries[idx];
        (name, t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn total_elements(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }
}
