//! Forward pass with a recorded tape, and its exact reverse pass.
//!
//! Messages flow along every edge in both directions; parallel edges (a
//! shared node used twice by the same parent) each carry a message.

use super::dense::{affine_rows, affine_rows_backward};
use super::params::{HeadOrder, ModelParams, Weights};
use crate::formula_ir::OpgGraph;
use crate::scalar::{dot, l2_norm, Scalar};

/// Intermediate values of one forward pass, enough to run backward.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    pub(crate) n: usize,
    pub(crate) rows: Vec<usize>,
    pub(crate) neighbors: Vec<Vec<usize>>,
    /// Layer inputs `x^0 .. x^L`, each `n × d`.
    pub(crate) xs: Vec<Vec<T>>,
    /// Aggregated messages per layer.
    pub(crate) agg: Vec<Vec<T>>,
    /// First affine output (pre-ReLU) per layer.
    pub(crate) pre: Vec<Vec<T>>,
    pub(crate) h: Vec<T>,
    /// Head affine output.
    pub(crate) u: Vec<T>,
    pub(crate) z: Vec<T>,
}

impl<T: Scalar> Tape<T> {
    pub fn h(&self) -> &[T] {
        &self.h
    }

    pub fn z(&self) -> &[T] {
        &self.z
    }

    /// Node representations after the last layer, `n × d` row-major.
    pub fn node_states(&self) -> &[T] {
        self.xs.last().expect("layer inputs always include x^0")
    }

    /// Embedding row used by each node.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Every ReLU pre-activation recorded on the tape (GIN MLPs and head).
    pub fn relu_inputs(&self) -> impl Iterator<Item = T> + '_ {
        self.pre.iter().flatten().chain(self.u.iter()).copied()
    }
}

pub(crate) fn undirected_neighbors(g: &OpgGraph) -> Vec<Vec<usize>> {
    let mut nb = vec![Vec::new(); g.node_count()];
    for e in g.edges() {
        nb[e.parent].push(e.child);
        nb[e.child].push(e.parent);
    }
    nb
}

fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

/// Runs the encoder on `g`. With `with_head` the projection head is also
/// evaluated (`z`); otherwise `u` and `z` are empty.
pub fn forward<T: Scalar>(g: &OpgGraph, params: &ModelParams<T>, with_head: bool) -> Tape<T> {
    let w = &params.weights;
    let d = w.dim();
    let n = g.node_count();
    let rows: Vec<usize> = g.labels().iter().map(|l| params.vocab.resolve(l)).collect();
    let neighbors = undirected_neighbors(g);
    let mut x0 = Vec::with_capacity(n * d);
    for &r in &rows {
        x0.extend_from_slice(w.embedding.row(r));
    }
    let mut xs = vec![x0];
    let mut agg = Vec::with_capacity(w.layers.len());
    let mut pre = Vec::with_capacity(w.layers.len());
    for layer in &w.layers {
        let x = xs.last().expect("input layer present");
        let self_w = T::one() + layer.eps;
        let mut a: Vec<T> = x.iter().map(|&v| self_w * v).collect();
        for (v, nb) in neighbors.iter().enumerate() {
            for &u in nb {
                for k in 0..d {
                    a[v * d + k] += x[u * d + k];
                }
            }
        }
        let p = affine_rows(&a, n, &layer.w1, &layer.b1);
        let r: Vec<T> = p.iter().map(|&v| relu(v)).collect();
        let out = affine_rows(&r, n, &layer.w2, &layer.b2);
        agg.push(a);
        pre.push(p);
        xs.push(out);
    }
    let last = xs.last().expect("output layer present");
    let inv_n = T::one() / T::of(n as f64);
    let mut h = vec![T::zero(); d];
    for v in 0..n {
        for k in 0..d {
            h[k] += last[v * d + k];
        }
    }
    for hk in &mut h {
        *hk *= inv_n;
    }
    let (u, z) = if with_head {
        let u = affine_rows(&h, 1, &w.head.w, &w.head.b);
        let z = head_activation(&u, params.head_order);
        (u, z)
    } else {
        (Vec::new(), Vec::new())
    };
    Tape {
        n,
        rows,
        neighbors,
        xs,
        agg,
        pre,
        h,
        u,
        z,
    }
}

fn scaled<T: Scalar>(v: &[T], s: T) -> Vec<T> {
    v.iter().map(|&x| x * s).collect()
}

fn head_activation<T: Scalar>(u: &[T], order: HeadOrder) -> Vec<T> {
    match order {
        HeadOrder::AffineReluNormalize => {
            let r: Vec<T> = u.iter().map(|&x| relu(x)).collect();
            let nr = l2_norm(&r);
            if nr > T::zero() {
                scaled(&r, T::one() / nr)
            } else {
                r
            }
        }
        HeadOrder::AffineNormalizeRelu => {
            let nu = l2_norm(u);
            if nu > T::zero() {
                u.iter().map(|&x| relu(x / nu)).collect()
            } else {
                vec![T::zero(); u.len()]
            }
        }
    }
}

/// d(normalize(v))ᵀ·g = (g − v̂ (v̂·g)) / |v|
fn normalize_backward<T: Scalar>(v: &[T], g: &[T]) -> Vec<T> {
    let nv = l2_norm(v);
    if nv <= T::zero() {
        return vec![T::zero(); v.len()];
    }
    let vhat = scaled(v, T::one() / nv);
    let proj = dot(&vhat, g);
    vhat.iter().zip(g).map(|(&vh, &gk)| (gk - vh * proj) / nv).collect()
}

/// Accumulates into `grads` the gradient of a scalar objective whose
/// derivatives with respect to this graph's `h` and `z` are `dh` and `dz`
/// (either may be empty, meaning zero).
pub fn backward<T: Scalar>(tape: &Tape<T>, params: &ModelParams<T>, dh: &[T], dz: &[T], grads: &mut Weights<T>) {
    let d = params.dim();
    let dx0 = backward_to_inputs(tape, params, dh, dz, grads);
    for (v, &row) in tape.rows.iter().enumerate() {
        for (e, &g) in grads.embedding.row_mut(row).iter_mut().zip(&dx0[v * d..(v + 1) * d]) {
            *e += g;
        }
    }
}

/// Like [`backward`] but leaves `grads.embedding` alone and returns the
/// per-node gradient of the looked-up input rows (`n × d`, node order).
/// Row `v` belongs to embedding row [`Tape::rows`]`[v]`.
pub fn backward_to_inputs<T: Scalar>(
    tape: &Tape<T>,
    params: &ModelParams<T>,
    dh: &[T],
    dz: &[T],
    grads: &mut Weights<T>,
) -> Vec<T> {
    let w = &params.weights;
    let d = w.dim();
    let n = tape.n;
    let mut dh_total = if dh.is_empty() { vec![T::zero(); d] } else { dh.to_vec() };
    if !dz.is_empty() {
        let du: Vec<T> = match params.head_order {
            HeadOrder::AffineReluNormalize => {
                let r: Vec<T> = tape.u.iter().map(|&x| relu(x)).collect();
                let dr = normalize_backward(&r, dz);
                dr.iter()
                    .zip(&tape.u)
                    .map(|(&g, &u)| if u > T::zero() { g } else { T::zero() })
                    .collect()
            }
            HeadOrder::AffineNormalizeRelu => {
                let nu = l2_norm(&tape.u);
                let dn: Vec<T> = dz
                    .iter()
                    .zip(&tape.u)
                    .map(|(&g, &u)| if nu > T::zero() && u / nu > T::zero() { g } else { T::zero() })
                    .collect();
                normalize_backward(&tape.u, &dn)
            }
        };
        let dh_head = affine_rows_backward(&tape.h, 1, &w.head.w, &du, &mut grads.head.w, &mut grads.head.b);
        for (a, b) in dh_total.iter_mut().zip(dh_head) {
            *a += b;
        }
    }
    // Mean pooling spreads dh evenly over the nodes.
    let inv_n = T::one() / T::of(n as f64);
    let mut dx: Vec<T> = Vec::with_capacity(n * d);
    for _ in 0..n {
        dx.extend(dh_total.iter().map(|&g| g * inv_n));
    }
    for (l, layer) in w.layers.iter().enumerate().rev() {
        let g = &mut grads.layers[l];
        let pre = &tape.pre[l];
        let r: Vec<T> = pre.iter().map(|&v| relu(v)).collect();
        let dr = affine_rows_backward(&r, n, &layer.w2, &dx, &mut g.w2, &mut g.b2);
        let dp: Vec<T> = dr
            .iter()
            .zip(pre)
            .map(|(&gr, &p)| if p > T::zero() { gr } else { T::zero() })
            .collect();
        let da = affine_rows_backward(&tape.agg[l], n, &layer.w1, &dp, &mut g.w1, &mut g.b1);
        let x_in = &tape.xs[l];
        g.eps += dot(&da, x_in);
        let self_w = T::one() + layer.eps;
        let mut dx_in: Vec<T> = da.iter().map(|&v| self_w * v).collect();
        for (v, nb) in tape.neighbors.iter().enumerate() {
            for &u in nb {
                for k in 0..d {
                    dx_in[u * d + k] += da[v * d + k];
                }
            }
        }
        dx = dx_in;
    }
    dx
}
