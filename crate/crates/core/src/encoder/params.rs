use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dense::Dense;
use super::vocab::NodeVocab;
use super::EncodeError;
use crate::scalar::Scalar;

/// Order of operations in the projection head.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadOrder {
    /// `z = normalize(relu(W h + b))`
    #[default]
    AffineReluNormalize,
    /// `z = relu(normalize(W h + b))`
    AffineNormalizeRelu,
}

/// One GIN layer: `MLP((1 + eps) x_v + Σ_u x_u)` with
/// `MLP(a) = relu(a W1 + b1) W2 + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GinLayer<T> {
    pub w1: Dense<T>,
    pub b1: Vec<T>,
    pub w2: Dense<T>,
    pub b2: Vec<T>,
    pub eps: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead<T> {
    pub w: Dense<T>,
    pub b: Vec<T>,
}

/// Every trainable tensor. Also used, zero-initialised, as the gradient
/// accumulator and as optimizer moment storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T> {
    pub embedding: Dense<T>,
    pub layers: Vec<GinLayer<T>>,
    pub head: ProjectionHead<T>,
}

impl<T: Scalar> Weights<T> {
    pub fn zeros(vocab_size: usize, dim: usize, layers: usize) -> Self {
        Weights {
            embedding: Dense::zeros(vocab_size, dim),
            layers: (0..layers)
                .map(|_| GinLayer {
                    w1: Dense::zeros(dim, dim),
                    b1: vec![T::zero(); dim],
                    w2: Dense::zeros(dim, dim),
                    b2: vec![T::zero(); dim],
                    eps: T::zero(),
                })
                .collect(),
            head: ProjectionHead {
                w: Dense::zeros(dim, dim),
                b: vec![T::zero(); dim],
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.embedding.rows, self.embedding.cols, self.layers.len())
    }

    pub fn dim(&self) -> usize {
        self.embedding.cols
    }

    /// Tensors in canonical order: embedding table; then per layer
    /// `w1, b1, w2, b2, eps`; then head `w, b`. Checkpoints, the optimizer
    /// and gradient checks all rely on this order.
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = vec![&self.embedding.data];
        for l in &self.layers {
            out.push(&l.w1.data);
            out.push(&l.b1);
            out.push(&l.w2.data);
            out.push(&l.b2);
            out.push(std::slice::from_ref(&l.eps));
        }
        out.push(&self.head.w.data);
        out.push(&self.head.b);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = vec![&mut self.embedding.data];
        for l in &mut self.layers {
            out.push(&mut l.w1.data);
            out.push(&mut l.b1);
            out.push(&mut l.w2.data);
            out.push(&mut l.b2);
            out.push(std::slice::from_mut(&mut l.eps));
        }
        out.push(&mut self.head.w.data);
        out.push(&mut self.head.b);
        out
    }

    /// Human-readable names matching [`Weights::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = vec!["embedding".to_string()];
        for i in 0..self.layers.len() {
            for n in ["w1", "b1", "w2", "b2", "eps"] {
                out.push(format!("gin{i}.{n}"));
            }
        }
        out.push("head.w".into());
        out.push("head.b".into());
        out
    }

    pub fn add_assign(&mut self, other: &Weights<T>) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for t in self.tensors_mut() {
            for x in t.iter_mut() {
                *x *= s;
            }
        }
    }

    pub fn l2_norm(&self) -> T {
        let mut acc = T::zero();
        for t in self.tensors() {
            for &x in t {
                acc += x * x;
            }
        }
        acc.sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn cast<U: Scalar>(&self) -> Weights<U> {
        Weights {
            embedding: self.embedding.cast(),
            layers: self
                .layers
                .iter()
                .map(|l| GinLayer {
                    w1: l.w1.cast(),
                    b1: cast_vec(&l.b1),
                    w2: l.w2.cast(),
                    b2: cast_vec(&l.b2),
                    eps: U::of(l.eps.to_f64_lossy()),
                })
                .collect(),
            head: ProjectionHead {
                w: self.head.w.cast(),
                b: cast_vec(&self.head.b),
            },
        }
    }
}

fn cast_vec<T: Scalar, U: Scalar>(v: &[T]) -> Vec<U> {
    v.iter().map(|&x| U::of(x.to_f64_lossy())).collect()
}

/// Vocabulary plus weights: everything needed to encode a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub vocab: NodeVocab,
    pub weights: Weights<T>,
    pub head_order: HeadOrder,
}

impl<T: Scalar> ModelParams<T> {
    /// Random initialisation: embedding rows uniform in `±sqrt(3/dim)`
    /// (unit variance per entry scaled by dimension), affine maps uniform in
    /// `±1/sqrt(fan_in)` for weights and biases, `eps = 0`.
    pub fn init(vocab: NodeVocab, dim: usize, layers: usize, seed: u64) -> Result<Self, EncodeError> {
        if dim == 0 || layers == 0 {
            return Err(EncodeError::Config(format!(
                "dim and layer count must be positive (got {dim}, {layers})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Weights::<T>::zeros(vocab.len(), dim, layers);
        let a = (3.0 / dim as f64).sqrt();
        fill_uniform(&mut w.embedding.data, a, &mut rng);
        let fan = 1.0 / (dim as f64).sqrt();
        for l in &mut w.layers {
            fill_uniform(&mut l.w1.data, fan, &mut rng);
            fill_uniform(&mut l.b1, fan, &mut rng);
            fill_uniform(&mut l.w2.data, fan, &mut rng);
            fill_uniform(&mut l.b2, fan, &mut rng);
        }
        fill_uniform(&mut w.head.w.data, fan, &mut rng);
        fill_uniform(&mut w.head.b, fan, &mut rng);
        Ok(ModelParams {
            vocab,
            weights: w,
            head_order: HeadOrder::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.dim()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.layers.len()
    }

    /// Every tensor agrees with the vocabulary size and embedding width.
    pub fn check_shapes(&self) -> Result<(), EncodeError> {
        let d = self.dim();
        let w = &self.weights;
        let mismatch = |what: &str| Err(EncodeError::DimensionMismatch(what.to_string()));
        if w.embedding.rows != self.vocab.len() {
            return mismatch("embedding rows differ from vocabulary size");
        }
        for l in &w.layers {
            if (l.w1.rows, l.w1.cols, l.w2.rows, l.w2.cols) != (d, d, d, d) || l.b1.len() != d || l.b2.len() != d {
                return mismatch("GIN layer width differs from embedding width");
            }
        }
        if (w.head.w.rows, w.head.w.cols) != (d, d) || w.head.b.len() != d {
            return mismatch("projection head width differs from embedding width");
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            vocab: self.vocab.clone(),
            weights: self.weights.cast(),
            head_order: self.head_order,
        }
    }
}

fn fill_uniform<T: Scalar>(xs: &mut [T], bound: f64, rng: &mut ChaCha8Rng) {
    for x in xs {
        *x = T::of(rng.random_range(-bound..bound));
    }
}
