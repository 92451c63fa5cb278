//! Named parameter storage, initialization and the Adam optimizer.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tape::Gradients;

/// Index of a parameter in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

/// Flat, ordered collection of named parameter matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
}

impl ParamStore {
    /// Number of parameter matrices.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when empty.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(Array2::len).sum()
    }

    /// Value of a parameter.
    pub fn value(&self, id: ParamId) -> &Array2<f64> {
        &self.values[id.0]
    }

    /// Mutable value of a parameter.
    pub fn value_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.values[id.0]
    }

    /// Name of a parameter.
    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    /// All ids in registration order.
    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    /// Look up a parameter by name.
    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub(crate) fn add(&mut self, name: String, value: Array2<f64>) -> ParamId {
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    /// SHA-256 over names, shapes and the little-endian bytes of every value.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for (n, v) in self.names.iter().zip(&self.values) {
            h.update(n.as_bytes());
            h.update((v.nrows() as u64).to_le_bytes());
            h.update((v.ncols() as u64).to_le_bytes());
            for x in v.iter() {
                h.update(x.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Registers parameters with seeded initial values.
pub(crate) struct Init<'a> {
    pub store: &'a mut ParamStore,
    pub rng: &'a mut ChaCha8Rng,
}

impl Init<'_> {
    /// Glorot-uniform weight matrix.
    pub fn weight(&mut self, name: String, rows: usize, cols: usize) -> ParamId {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let v = Array2::from_shape_fn((rows, cols), |_| self.rng.random_range(-limit..limit));
        self.store.add(name, v)
    }

    /// Constant-filled matrix (biases, norms).
    pub fn constant(&mut self, name: String, rows: usize, cols: usize, value: f64) -> ParamId {
        self.store.add(name, Array2::from_elem((rows, cols), value))
    }

    /// Embedding table with unit-variance-ish uniform entries.
    pub fn embedding(&mut self, name: String, rows: usize, cols: usize) -> ParamId {
        let v = Array2::from_shape_fn((rows, cols), |_| self.rng.random_range(-1.0..1.0));
        self.store.add(name, v)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    /// Fresh optimizer state for `params`.
    pub fn new(params: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<_> = params.values.iter().map(|p| Array2::zeros(p.dim())).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Apply one update.
    pub fn update(&mut self, params: &mut ParamStore, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, g), m), v) in params.values.iter_mut().zip(&grads.params).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}
