#![allow(dead_code)]

use chaoskit::tensor::SymTensor;
use rand::Rng;

/// Row-major dense array of `f`, built from the coefficients alone: entry
/// `(i_1..i_n)` is `c_σ · Π k! / n!` with `σ` the sorted tuple.
pub fn dense(f: &SymTensor) -> Vec<f64> {
    let (n, d) = (f.order(), f.dim());
    let mut out = vec![0.0; d.pow(n as u32)];
    for (pos, slot) in out.iter_mut().enumerate() {
        let mut idx = tuple(pos, n, d);
        idx.sort_unstable();
        let sigma = chaoskit::tensor::MultiIndex::new(idx.iter().map(|&i| i as u32).collect());
        let c = f.coeff(&sigma);
        if c != 0.0 {
            *slot = c * perm_weight(&idx);
        }
    }
    out
}

/// Digits of `pos` in base `d`, most significant first.
pub fn tuple(mut pos: usize, n: usize, d: usize) -> Vec<usize> {
    let mut idx = vec![0; n];
    for slot in idx.iter_mut().rev() {
        *slot = pos % d;
        pos /= d;
    }
    idx
}

/// `1 / #(distinct permutations of idx)`.
pub fn perm_weight(sorted: &[usize]) -> f64 {
    let fact = |k: usize| (1..=k).product::<usize>() as f64;
    let mut w = 1.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        w *= fact(j - i);
        i = j;
    }
    w / fact(sorted.len())
}

pub fn random_tensor<R: Rng>(rng: &mut R, order: usize, dim: usize) -> SymTensor {
    let terms = rng.random_range(1..=4);
    let entries: Vec<(Vec<u32>, f64)> = (0..terms)
        .map(|_| {
            let idx = (0..order).map(|_| rng.random_range(0..dim as u32)).collect();
            (idx, rng.random_range(-1.0..1.0))
        })
        .collect();
    SymTensor::from_entries(order, dim, entries).unwrap()
}
