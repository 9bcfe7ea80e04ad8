use crate::scalar::Scalar;

/// Row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Dense {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "dense shape mismatch");
        Dense { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn cast<U: Scalar>(&self) -> Dense<U> {
        Dense {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::of(x.to_f64_lossy())).collect(),
        }
    }
}

/// `out[i] = x[i] · W + b` for each of the `n` rows of `x` (width `w.rows`).
pub(crate) fn affine_rows<T: Scalar>(x: &[T], n: usize, w: &Dense<T>, b: &[T]) -> Vec<T> {
    let (din, dout) = (w.rows, w.cols);
    debug_assert_eq!(x.len(), n * din);
    let mut out = Vec::with_capacity(n * dout);
    for i in 0..n {
        out.extend_from_slice(b);
        let o = &mut out[i * dout..];
        for (k, &xik) in x[i * din..(i + 1) * din].iter().enumerate() {
            if xik == T::zero() {
                continue;
            }
            for (oj, &wkj) in o[..dout].iter_mut().zip(w.row(k)) {
                *oj += xik * wkj;
            }
        }
    }
    out
}

/// Backward of [`affine_rows`]: accumulates `dW += xᵀ dy`, `db += Σ dy`
/// and returns `dx = dy Wᵀ`.
pub(crate) fn affine_rows_backward<T: Scalar>(
    x: &[T],
    n: usize,
    w: &Dense<T>,
    dy: &[T],
    dw: &mut Dense<T>,
    db: &mut [T],
) -> Vec<T> {
    let (din, dout) = (w.rows, w.cols);
    let mut dx = vec![T::zero(); n * din];
    for i in 0..n {
        let dyi = &dy[i * dout..(i + 1) * dout];
        for (d, &g) in db.iter_mut().zip(dyi) {
            *d += g;
        }
        let xi = &x[i * din..(i + 1) * din];
        for k in 0..din {
            let xik = xi[k];
            let wk = w.row(k);
            let mut acc = T::zero();
            for (&g, &wkj) in dyi.iter().zip(wk) {
                acc += g * wkj;
            }
            dx[i * din + k] = acc;
            if xik != T::zero() {
                for (dwkj, &g) in dw.row_mut(k).iter_mut().zip(dyi) {
                    *dwkj += xik * g;
                }
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_matches_hand_computation() {
        let w = Dense::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = affine_rows(&[1.0, -1.0, 0.5, 2.0], 2, &w, &[0.1, 0.2, 0.3]);
        assert_eq!(y.len(), 6);
        let expect = [-2.9, -2.8, -2.7, 8.6, 11.2, 13.8];
        for (a, b) in y.iter().zip(expect) {
            let (a, b): (f64, f64) = (*a, b);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_is_transpose_product() {
        let w = Dense::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let mut dw = Dense::zeros(2, 2);
        let mut db = vec![0.0; 2];
        let dx = affine_rows_backward(&[1.0, 2.0], 1, &w, &[1.0, -1.0], &mut dw, &mut db);
        assert_eq!(dx, vec![-1.0, -1.0]);
        assert_eq!(dw.data, vec![1.0, -1.0, 2.0, -2.0]);
        assert_eq!(db, vec![1.0, -1.0]);
    }
}
