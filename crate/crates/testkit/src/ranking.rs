use std::cmp::Ordering;

use fsearch_core::retrieval::VectorIndex;
use rand::Rng;

/// Raw parts of an index: ids, post ids and unnormalised rows.
#[derive(Debug, Clone)]
pub struct IndexParts {
    pub ids: Vec<String>,
    pub post_ids: Vec<String>,
    pub dim: usize,
    pub rows: Vec<f32>,
}

impl IndexParts {
    pub fn build(&self) -> VectorIndex {
        VectorIndex::new(self.ids.clone(), self.post_ids.clone(), self.dim, self.rows.clone()).expect("valid index")
    }
}

/// Random index of `n` rows in `dim` dimensions; see [`random_parts`].
pub fn random_index<R: Rng>(rng: &mut R, n: usize, dim: usize) -> VectorIndex {
    random_parts(rng, n, dim).build()
}

/// About a fifth of the rows copy an earlier row, so exact score ties are
/// common. Ids are assigned in shuffled order so tie-breaking by id is not
/// insertion order.
pub fn random_parts<R: Rng>(rng: &mut R, n: usize, dim: usize) -> IndexParts {
    let mut rows: Vec<f32> = Vec::with_capacity(n * dim);
    for i in 0..n {
        if i > 0 && rng.random_bool(0.2) {
            let j = rng.random_range(0..i);
            let copy: Vec<f32> = rows[j * dim..(j + 1) * dim].to_vec();
            rows.extend(copy);
        } else {
            rows.extend((0..dim).map(|_| rng.random_range(-1.0f32..1.0)));
        }
    }
    let mut numbers: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        numbers.swap(i, rng.random_range(0..=i));
    }
    let ids = numbers.iter().map(|k| format!("f{k:05}")).collect();
    let post_ids = (0..n).map(|i| format!("p{i}")).collect();
    IndexParts { ids, post_ids, dim, rows }
}

pub fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn dot_in_order(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = 0.0f32;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Scores every row, sorts the whole list by score descending then id
/// bytes ascending, and keeps the first `k`.
pub fn full_sort_topk(q: &[f32], index: &VectorIndex, k: usize) -> Vec<(usize, f32)> {
    let mut all: Vec<(usize, f32)> = (0..index.len()).map(|i| (i, dot_in_order(q, index.row(i)))).collect();
    all.sort_by(|a, b| match b.1.partial_cmp(&a.1).unwrap() {
        Ordering::Equal => index.id(a.0).as_bytes().cmp(index.id(b.0).as_bytes()),
        o => o,
    });
    all.truncate(k);
    all
}

/// Ids ordered by `score` descending, ties by id ascending.
pub fn argsort_by_score(items: &[(String, f64)]) -> Vec<String> {
    let mut v = items.to_vec();
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    v.into_iter().map(|(id, _)| id).collect()
}
