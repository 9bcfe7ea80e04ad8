//! Loss and exact gradients for a fixed batch of views.

use rayon::prelude::*;

use super::loss::{info_nce_with_grad, LossOutput};
use super::TrainError;
use crate::encoder::gin::{backward_to_inputs, forward};
use crate::encoder::{ModelParams, Weights};
use crate::formula_ir::OpgGraph;
use crate::scalar::Scalar;

/// Views per backward work unit. Partial gradients are summed in chunk
/// order, so the result does not depend on the thread count.
const CHUNK: usize = 16;

/// One chunk's dense gradients, plus per view its embedding rows and the
/// gradient with respect to those input rows.
type ChunkPartial<T> = (Weights<T>, Vec<(Vec<usize>, Vec<T>)>);

#[derive(Debug, Clone)]
pub struct BatchGradients<T> {
    pub loss: LossOutput<T>,
    pub grads: Weights<T>,
}

/// Projected embeddings `z` for each view, flattened row-major.
pub fn project_views<T: Scalar>(params: &ModelParams<T>, views: &[OpgGraph]) -> Vec<T> {
    let rows: Vec<Vec<T>> = views.par_iter().map(|g| forward(g, params, true).z).collect();
    rows.into_iter().flatten().collect()
}

/// Contrastive loss of `views` (partners adjacent: `2k`, `2k+1`).
pub fn batch_loss<T: Scalar>(params: &ModelParams<T>, views: &[OpgGraph], tau: T) -> Result<T, TrainError> {
    params.check_shapes()?;
    let z = project_views(params, views);
    Ok(info_nce_with_grad(&z, params.dim(), tau)?.loss)
}

/// Loss plus reverse-mode gradient for every parameter tensor.
pub fn batch_gradients<T: Scalar>(
    params: &ModelParams<T>,
    views: &[OpgGraph],
    tau: T,
) -> Result<BatchGradients<T>, TrainError> {
    params.check_shapes()?;
    let d = params.dim();
    let z = project_views(params, views);
    let loss = info_nce_with_grad(&z, d, tau)?;
    let partials: Vec<ChunkPartial<T>> = views
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut g = Weights::zeros(0, d, params.num_layers());
            let mut inputs = Vec::with_capacity(chunk.len());
            for (k, view) in chunk.iter().enumerate() {
                let i = c * CHUNK + k;
                // Recomputed here so tapes never outlive a chunk.
                let tape = forward(view, params, true);
                let dz = &loss.grad[i * d..(i + 1) * d];
                let dx0 = backward_to_inputs(&tape, params, &[], dz, &mut g);
                inputs.push((tape.rows().to_vec(), dx0));
            }
            (g, inputs)
        })
        .collect();
    let mut grads = params.weights.zeros_like();
    for (partial, inputs) in partials {
        for (l, pl) in grads.layers.iter_mut().zip(&partial.layers) {
            add(&mut l.w1.data, &pl.w1.data);
            add(&mut l.b1, &pl.b1);
            add(&mut l.w2.data, &pl.w2.data);
            add(&mut l.b2, &pl.b2);
            l.eps += pl.eps;
        }
        add(&mut grads.head.w.data, &partial.head.w.data);
        add(&mut grads.head.b, &partial.head.b);
        for (rows, dx0) in inputs {
            for (v, &r) in rows.iter().enumerate() {
                add(grads.embedding.row_mut(r), &dx0[v * d..(v + 1) * d]);
            }
        }
    }
    if !grads.all_finite() {
        let names = grads.tensor_names();
        let bad: Vec<&str> = grads
            .tensors()
            .iter()
            .zip(&names)
            .filter(|(t, _)| t.iter().any(|x| !x.is_finite()))
            .map(|(_, n)| n.as_str())
            .collect();
        return Err(TrainError::NonFinite(format!("gradient of {}", bad.join(", "))));
    }
    Ok(BatchGradients { loss, grads })
}

fn add<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (a, &b) in dst.iter_mut().zip(src) {
        *a += b;
    }
}
