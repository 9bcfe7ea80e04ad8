//! NT-Xent (InfoNCE with in-batch negatives).
//!
//! Rows `2k` and `2k+1` of `Z` are the two views of formula `k`. For anchor
//! `i` with partner `p(i)`:
//!
//! `ℓ_i = −log( exp(s_{i,p(i)}) / Σ_{j≠i} exp(s_ij) )`, `s_ij = z_i·z_j / τ`
//!
//! and the loss is the mean of `ℓ_i` over all `2N` anchors. Similarities are
//! plain dot products, i.e. cosines for unit rows.

use super::TrainError;
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput<T> {
    pub loss: T,
    /// dloss/dZ, same layout as the input rows.
    pub grad: Vec<T>,
    /// Mean similarity between partners.
    pub pos_cos: T,
    /// Mean similarity over all non-partner pairs.
    pub neg_cos: T,
}

fn check<T: Scalar>(z: &[T], dim: usize, tau: T) -> Result<usize, TrainError> {
    if !(tau > T::zero()) || !tau.is_finite() {
        return Err(TrainError::Config(format!("temperature must be positive, got {tau}")));
    }
    if dim == 0 || !z.len().is_multiple_of(dim) {
        return Err(TrainError::Shape(format!("{} values do not form rows of width {dim}", z.len())));
    }
    let rows = z.len() / dim;
    if !rows.is_multiple_of(2) {
        return Err(TrainError::Shape(format!("odd number of views ({rows})")));
    }
    if rows < 4 {
        return Err(TrainError::TooFewPairs(rows / 2));
    }
    if let Some(i) = z.iter().position(|x| !x.is_finite()) {
        return Err(TrainError::NonFinite(format!("embedding entry {i} (row {})", i / dim)));
    }
    Ok(rows)
}

/// Loss value only.
pub fn info_nce_loss<T: Scalar>(z: &[T], dim: usize, tau: T) -> Result<T, TrainError> {
    Ok(info_nce_with_grad(z, dim, tau)?.loss)
}

/// Loss, its gradient with respect to every row, and similarity summaries.
pub fn info_nce_with_grad<T: Scalar>(z: &[T], dim: usize, tau: T) -> Result<LossOutput<T>, TrainError> {
    let rows = check(z, dim, tau)?;
    let row = |i: usize| &z[i * dim..(i + 1) * dim];
    let mut sim = vec![T::zero(); rows * rows];
    for i in 0..rows {
        for j in i..rows {
            let c = dot(row(i), row(j));
            sim[i * rows + j] = c;
            sim[j * rows + i] = c;
        }
    }
    let inv_tau = T::one() / tau;
    let scale = T::one() / T::of(rows as f64);
    let mut loss = T::zero();
    let mut pos = T::zero();
    let mut neg = T::zero();
    // G_ij = dloss/ds_ij, with s_ij = sim_ij / τ.
    let mut g = vec![T::zero(); rows * rows];
    for i in 0..rows {
        let p = i ^ 1;
        let m = (0..rows)
            .filter(|&j| j != i)
            .map(|j| sim[i * rows + j] * inv_tau)
            .fold(T::neg_infinity(), T::max);
        let mut denom = T::zero();
        for j in (0..rows).filter(|&j| j != i) {
            denom += (sim[i * rows + j] * inv_tau - m).exp();
        }
        let lse = m + denom.ln();
        loss += lse - sim[i * rows + p] * inv_tau;
        pos += sim[i * rows + p];
        for j in (0..rows).filter(|&j| j != i) {
            let prob = (sim[i * rows + j] * inv_tau - lse).exp();
            let target = if j == p { T::one() } else { T::zero() };
            g[i * rows + j] = (prob - target) * scale;
            if j != p {
                neg += sim[i * rows + j];
            }
        }
    }
    let mut grad = vec![T::zero(); z.len()];
    for i in 0..rows {
        for j in (0..rows).filter(|&j| j != i) {
            let w = g[i * rows + j] * inv_tau;
            if w == T::zero() {
                continue;
            }
            for k in 0..dim {
                let zj = z[j * dim + k];
                let zi = z[i * dim + k];
                grad[i * dim + k] += w * zj;
                grad[j * dim + k] += w * zi;
            }
        }
    }
    let neg_pairs = rows * (rows - 2);
    Ok(LossOutput {
        loss: loss * scale,
        grad,
        pos_cos: pos * scale,
        neg_cos: neg / T::of(neg_pairs as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Scalar reference: direct transcription of the definition, no
    /// stabilisation, no shared sub-expressions.
    fn reference(z: &[Vec<f64>], tau: f64) -> f64 {
        let n = z.len();
        let cos = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut total = 0.0;
        for i in 0..n {
            let p = if i % 2 == 0 { i + 1 } else { i - 1 };
            let num = (cos(&z[i], &z[p]) / tau).exp();
            let den: f64 = (0..n).filter(|&j| j != i).map(|j| (cos(&z[i], &z[j]) / tau).exp()).sum();
            total += -(num / den).ln();
        }
        total / n as f64
    }

    fn flat(z: &[Vec<f64>]) -> Vec<f64> {
        z.iter().flatten().copied().collect()
    }

    fn random_unit_rows(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| {
                let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / n).collect()
            })
            .collect()
    }

    #[test]
    fn aligned_positives_orthogonal_negatives() {
        let z = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]];
        let e = std::f64::consts::E;
        let expect = -(e / (e + 2.0)).ln();
        assert!((expect - 0.5514).abs() < 1e-4);
        let got = info_nce_loss(&flat(&z), 2, 1.0).unwrap();
        assert!((got - expect).abs() < 1e-12);
        assert!((reference(&z, 1.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn identical_rows_give_log_two_n_minus_one() {
        for n in 2..6 {
            let z = vec![vec![0.6, 0.8]; 2 * n];
            let got = info_nce_loss(&flat(&z), 2, 0.2).unwrap();
            assert!((got - ((2 * n - 1) as f64).ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_reference_on_random_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let z = random_unit_rows(&mut rng, 8, 5);
            let tau = rng.random_range(0.1..2.0);
            let got = info_nce_loss(&flat(&z), 5, tau).unwrap();
            assert!((got - reference(&z, tau)).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = flat(&random_unit_rows(&mut rng, 6, 4));
        let out = info_nce_with_grad(&z, 4, 0.5).unwrap();
        let h = 1e-6;
        for k in 0..z.len() {
            let mut a = z.clone();
            let mut b = z.clone();
            a[k] += h;
            b[k] -= h;
            let fd = (info_nce_loss(&a, 4, 0.5).unwrap() - info_nce_loss(&b, 4, 0.5).unwrap()) / (2.0 * h);
            assert!((fd - out.grad[k]).abs() < 1e-7, "coord {k}: {fd} vs {}", out.grad[k]);
        }
    }

    #[test]
    fn lower_temperature_lowers_loss_when_positives_dominate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            // Partners are noisy copies, so every positive beats every negative.
            let base = random_unit_rows(&mut rng, 3, 16);
            let mut z = Vec::new();
            for b in &base {
                for _ in 0..2 {
                    let v: Vec<f64> = b.iter().map(|x| x + rng.random_range(-0.05..0.05)).collect();
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    z.push(v.into_iter().map(|x| x / n).collect::<Vec<_>>());
                }
            }
            let zf = flat(&z);
            let mut prev = f64::INFINITY;
            for tau in [2.0, 1.0, 0.5, 0.2, 0.1] {
                let l = info_nce_loss(&zf, 16, tau).unwrap();
                assert!(l < prev);
                prev = l;
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let z = vec![1.0, 0.0, 1.0, 0.0];
        assert!(matches!(info_nce_loss(&z, 2, 1.0), Err(TrainError::TooFewPairs(1))));
        let mut z4 = vec![1.0f64; 8];
        assert!(info_nce_loss(&z4, 2, 0.0).is_err());
        z4[3] = f64::NAN;
        assert!(matches!(info_nce_loss(&z4, 2, 1.0), Err(TrainError::NonFinite(_))));
    }

    #[test]
    fn loss_is_non_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let z = flat(&random_unit_rows(&mut rng, 10, 3));
            assert!(info_nce_loss(&z, 3, 0.2).unwrap() >= 0.0);
        }
    }
}
