use super::tensor::ParameterSet;

/// Per-parameter gradient buffers, aligned with a [`ParameterSet`]'s
/// insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    bufs: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &ParameterSet) -> Self {
        Gradients {
            bufs: params.iter().map(|(_, t)| vec![0.0; t.numel()]).collect(),
        }
    }

    pub fn buf(&self, idx: usize) -> &[f64] {
        &self.bufs[idx]
    }

    pub fn buf_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.bufs[idx]
    }

    pub fn by_name<'a>(&'a self, params: &ParameterSet, name: &str) -> Option<&'a [f64]> {
        params.index_of(name).map(|i| self.bufs[i].as_slice())
    }

    pub fn len(&self) -> usize {
        self.bufs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bufs.is_empty()
    }

    /// Elementwise accumulation. Panics if the two sets are not aligned.
    pub fn add_assign(&mut self, other: &Gradients) {
        assert_eq!(self.bufs.len(), other.bufs.len(), "gradient sets differ");
        for (a, b) in self.bufs.iter_mut().zip(&other.bufs) {
            assert_eq!(a.len(), b.len(), "gradient buffer lengths differ");
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for buf in &mut self.bufs {
            for x in buf.iter_mut() {
                *x *= c;
            }
        }
    }

    /// L2 norm over all entries of all buffers.
    pub fn global_norm(&self) -> f64 {
        self.bufs
            .iter()
            .flat_map(|b| b.iter())
            .map(|&x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// Rescale gradients so their global L2 norm is at most `max_norm`, and
/// return the norm measured before clipping. A non-positive `max_norm`
/// disables clipping.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if max_norm > 0.0 && norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Adam with bias-corrected first and second moments:
/// `m_t = b1 m + (1-b1) g`, `v_t = b2 v + (1-b2) g^2`,
/// `theta -= lr * m_t/(1-b1^t) / (sqrt(v_t/(1-b2^t)) + eps)`.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(params: &ParameterSet, learning_rate: f64) -> Self {
        OptimizerState {
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: params.iter().map(|(_, t)| vec![0.0; t.numel()]).collect(),
            v: params.iter().map(|(_, t)| vec![0.0; t.numel()]).collect(),
        }
    }

    /// The raw moment buffers, aligned with the parameter set, for
    /// serialization.
    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.m, &self.v)
    }

    /// Rebuild a state from serialized pieces. The buffers must align with
    /// the parameter set the state will be used on.
    pub fn from_parts(
        step: u64,
        learning_rate: f64,
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    ) -> Self {
        assert_eq!(m.len(), v.len(), "moment tables differ in length");
        OptimizerState {
            step,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m,
            v,
        }
    }

    /// One update over every parameter. Panics if `params`/`grads` are not
    /// the set this state was built for.
    pub fn adam_step(&mut self, params: &mut ParameterSet, grads: &Gradients) {
        assert_eq!(params.len(), self.m.len(), "optimizer bound to other set");
        assert_eq!(params.len(), grads.len(), "gradient set is not aligned");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for idx in 0..params.len() {
            let g = grads.buf(idx);
            let (_, tensor) = params.at_mut(idx);
            let data = tensor.data_mut();
            assert_eq!(data.len(), g.len(), "gradient shape mismatch");
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            for i in 0..data.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                data[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}
