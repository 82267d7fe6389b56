//! Symmetric tensors over a finite-dimensional real inner-product space.
//!
//! A [`SymTensor`] of order `n` over `R^d` is stored as a map from sorted
//! multi-indices `σ = (i_1 <= ... <= i_n)` to coefficients `c_σ`, meaning
//!
//! ```text
//! f = Σ_σ c_σ ê(σ),    ê(σ) = (1/n!) Σ_π e_{i_π(1)} ⊗ ... ⊗ e_{i_π(n)}
//! ```
//!
//! With this convention the dense entry of `f` at any arrangement of `σ` is
//! `c_σ w_σ`, where `w_σ = (Π_l k_l!) / n!` and `k_l` are the multiplicities of
//! the distinct values in `σ`. The same weight gives `⟨ê(σ), ê(σ)⟩ = w_σ`.
//!
//! Basis indices are 0-based in code. The JSON form uses 1-based indices.

mod subspace;

pub use subspace::{orthonormal_range, residual_ratio, SubspaceBasis, DEFAULT_RANK_TOL};

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Sorted multi-index of basis vectors.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(mut entries: Vec<u32>) -> Self {
        entries.sort_unstable();
        MultiIndex(entries)
    }

    pub fn empty() -> Self {
        MultiIndex(Vec::new())
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    /// Distinct values with their multiplicities, in increasing order.
    pub fn multiplicities(&self) -> Vec<(u32, u32)> {
        let mut out: Vec<(u32, u32)> = Vec::new();
        for &i in &self.0 {
            match out.last_mut() {
                Some((j, k)) if *j == i => *k += 1,
                _ => out.push((i, 1)),
            }
        }
        out
    }

    pub fn count(&self, j: u32) -> usize {
        self.0.iter().filter(|&&i| i == j).count()
    }

    /// `w_σ = (Π k_l!) / n!`, the squared norm of `ê(σ)`.
    pub fn weight(&self) -> f64 {
        let num: f64 = self
            .multiplicities()
            .iter()
            .map(|&(_, k)| factorial(k as usize))
            .product();
        num / factorial(self.order())
    }

    /// Removes one copy of `j`, if present.
    pub fn without_one(&self, j: u32) -> Option<MultiIndex> {
        let pos = self.0.iter().position(|&i| i == j)?;
        let mut v = self.0.clone();
        v.remove(pos);
        Some(MultiIndex(v))
    }

    pub fn with(&self, j: u32) -> MultiIndex {
        let mut v = self.0.clone();
        let pos = v.partition_point(|&i| i <= j);
        v.insert(pos, j);
        MultiIndex(v)
    }

    pub fn max_index(&self) -> Option<u32> {
        self.0.last().copied()
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// All sorted multi-indices of order `n` over `dim` basis vectors, in
/// lexicographic order (the canonical coordinate order).
pub fn multi_indices(order: usize, dim: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    if dim == 0 && order > 0 {
        return out;
    }
    let mut cur = vec![0u32; order];
    loop {
        out.push(MultiIndex(cur.clone()));
        // advance to the next nondecreasing sequence
        let mut pos = order;
        while pos > 0 {
            pos -= 1;
            if (cur[pos] as usize) + 1 < dim {
                let v = cur[pos] + 1;
                for c in cur[pos..].iter_mut() {
                    *c = v;
                }
                break;
            }
            if pos == 0 {
                return out;
            }
        }
        if order == 0 {
            return out;
        }
    }
}

/// Symmetric element of the `order`-fold tensor power of `R^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensor {
    order: usize,
    dim: usize,
    coeffs: BTreeMap<MultiIndex, f64>,
}

impl SymTensor {
    pub fn zero(order: usize, dim: usize) -> Self {
        SymTensor {
            order,
            dim,
            coeffs: BTreeMap::new(),
        }
    }

    /// Builds `Σ c ê(σ)` from `(σ, c)` pairs. Repeated multi-indices are summed.
    pub fn from_entries<I>(order: usize, dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut t = SymTensor::zero(order, dim);
        for (idx, c) in entries {
            let sigma = MultiIndex::new(idx);
            t.check_index(&sigma)?;
            *t.coeffs.entry(sigma).or_insert(0.0) += c;
        }
        t.prune();
        Ok(t)
    }

    /// `ê(σ)` with unit coefficient.
    pub fn basis(dim: usize, sigma: &[u32]) -> Result<Self> {
        Self::from_entries(sigma.len(), dim, [(sigma.to_vec(), 1.0)])
    }

    /// Order-1 tensor with the given coordinates.
    pub fn vector(v: &[f64]) -> Self {
        let coeffs = v
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(i, &c)| (MultiIndex(vec![i as u32]), c))
            .collect();
        SymTensor {
            order: 1,
            dim: v.len(),
            coeffs,
        }
    }

    fn check_index(&self, sigma: &MultiIndex) -> Result<()> {
        if sigma.order() != self.order {
            return Err(Error::ShapeMismatch {
                expected_order: self.order,
                expected_dim: self.dim,
                order: sigma.order(),
                dim: self.dim,
            });
        }
        if let Some(m) = sigma.max_index() {
            if m as usize >= self.dim {
                return Err(Error::IndexOutOfRange {
                    index: m as usize,
                    dim: self.dim,
                });
            }
        }
        Ok(())
    }

    fn prune(&mut self) {
        self.coeffs.retain(|_, c| *c != 0.0);
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, sigma: &MultiIndex) -> f64 {
        self.coeffs.get(sigma).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, f64)> + '_ {
        self.coeffs.iter().map(|(k, &v)| (k, v))
    }

    pub fn same_shape(&self, other: &SymTensor) -> Result<()> {
        if self.order != other.order || self.dim != other.dim {
            return Err(Error::ShapeMismatch {
                expected_order: self.order,
                expected_dim: self.dim,
                order: other.order,
                dim: other.dim,
            });
        }
        Ok(())
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &SymTensor) -> Result<()> {
        self.same_shape(x)?;
        if a == 0.0 {
            return Ok(());
        }
        for (k, &v) in &x.coeffs {
            *self.coeffs.entry(k.clone()).or_insert(0.0) += a * v;
        }
        self.prune();
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> SymTensor {
        let mut out = self.clone();
        if a == 0.0 {
            out.coeffs.clear();
        } else {
            out.coeffs.values_mut().for_each(|c| *c *= a);
        }
        out
    }

    /// `self - other`.
    pub fn sub(&self, other: &SymTensor) -> Result<SymTensor> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn add(&self, other: &SymTensor) -> Result<SymTensor> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    /// Reads a dense row-major array of `dim^order` entries and symmetrizes it.
    ///
    /// `c_σ` is the sum of the dense entries over all arrangements of `σ`.
    pub fn symmetrize(order: usize, dim: usize, dense: &[f64]) -> Result<SymTensor> {
        let expected = dim.checked_pow(order as u32).ok_or_else(|| {
            Error::InvalidArgument(format!("dense array {dim}^{order} overflows"))
        })?;
        if dense.len() != expected {
            return Err(Error::DenseLength {
                expected,
                got: dense.len(),
            });
        }
        let mut t = SymTensor::zero(order, dim);
        let mut idx = vec![0u32; order];
        for &a in dense {
            if a != 0.0 {
                *t.coeffs.entry(MultiIndex::new(idx.clone())).or_insert(0.0) += a;
            }
            // row-major odometer, last slot fastest
            for slot in (0..order).rev() {
                idx[slot] += 1;
                if (idx[slot] as usize) < dim {
                    break;
                }
                idx[slot] = 0;
            }
        }
        t.prune();
        Ok(t)
    }

    /// `⟨f, g⟩ = Σ_σ c_σ d_σ w_σ`.
    pub fn inner(&self, other: &SymTensor) -> Result<f64> {
        self.same_shape(other)?;
        let (small, large) = if self.nnz() <= other.nnz() {
            (self, other)
        } else {
            (other, self)
        };
        Ok(small
            .coeffs
            .iter()
            .filter_map(|(k, &c)| large.coeffs.get(k).map(|&d| c * d * k.weight()))
            .sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|(k, &c)| c * c * k.weight()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Pairs one slot with `e_j`, giving an order `n-1` tensor.
    ///
    /// Each `σ` containing `j` contributes `(k_j(σ)/n) c_σ` to `σ` minus one
    /// copy of `j`.
    pub fn contract_last(&self, j: usize) -> Result<SymTensor> {
        if self.order == 0 {
            return Err(Error::InvalidArgument(
                "cannot contract an order-0 tensor".into(),
            ));
        }
        if j >= self.dim {
            return Err(Error::IndexOutOfRange {
                index: j,
                dim: self.dim,
            });
        }
        let n = self.order as f64;
        let mut out = SymTensor::zero(self.order - 1, self.dim);
        for (sigma, &c) in &self.coeffs {
            let k = sigma.count(j as u32);
            if k == 0 {
                continue;
            }
            let tau = sigma.without_one(j as u32).expect("j is present");
            *out.coeffs.entry(tau).or_insert(0.0) += k as f64 / n * c;
        }
        out.prune();
        Ok(out)
    }

    /// Coordinates `c_σ √w_σ` over the canonical enumeration of all order-`n`
    /// multi-indices. Their Euclidean dot product equals [`SymTensor::inner`].
    pub fn to_coords(&self) -> DVector<f64> {
        let all = multi_indices(self.order, self.dim);
        self.coords_on(&all)
    }

    /// Coordinates restricted to a sorted list of multi-indices.
    ///
    /// Entries of `self` outside `support` are dropped, so inner products are
    /// only preserved when every tensor involved is supported on `support`.
    pub fn coords_on(&self, support: &[MultiIndex]) -> DVector<f64> {
        let mut v = DVector::zeros(support.len());
        for (sigma, &c) in &self.coeffs {
            if let Ok(pos) = support.binary_search(sigma) {
                v[pos] = c * sigma.weight().sqrt();
            }
        }
        v
    }

    /// `dim × #(n-1)-multi-indices` matrix whose column for `τ` is the vector
    /// `(⟨f, e_i ⊗ e_τ⟩)_i`. Its column space is the span of all
    /// `(n-1)`-fold pairings of `f`.
    pub fn unfold(&self) -> DMatrix<f64> {
        if self.order == 0 {
            return DMatrix::zeros(self.dim, 0);
        }
        let columns = multi_indices(self.order - 1, self.dim);
        let mut m = DMatrix::zeros(self.dim, columns.len());
        for (sigma, &c) in &self.coeffs {
            let w = sigma.weight();
            for (j, _) in sigma.multiplicities() {
                let tau = sigma.without_one(j).expect("j is present");
                let col = columns.binary_search(&tau).expect("canonical enumeration");
                m[(j as usize, col)] += c * w;
            }
        }
        m
    }

    /// Dense coordinates of an order-1 tensor.
    pub fn as_vector(&self) -> Result<DVector<f64>> {
        if self.order != 1 {
            return Err(Error::InvalidArgument(format!(
                "order-{} tensor is not a vector",
                self.order
            )));
        }
        let mut v = DVector::zeros(self.dim);
        for (sigma, &c) in &self.coeffs {
            v[sigma.entries()[0] as usize] = c;
        }
        Ok(v)
    }

    /// Value of an order-0 tensor.
    pub fn scalar(&self) -> f64 {
        if self.order == 0 {
            self.coeff(&MultiIndex::empty())
        } else {
            0.0
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tensor serializes")
    }

    pub fn from_json(s: &str) -> Result<SymTensor> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    order: usize,
    dim: usize,
    entries: Vec<(Vec<u32>, f64)>,
}

impl Serialize for SymTensor {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TensorRepr {
            order: self.order,
            dim: self.dim,
            entries: self
                .coeffs
                .iter()
                .map(|(k, &c)| (k.entries().iter().map(|&i| i + 1).collect(), c))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymTensor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = TensorRepr::deserialize(d)?;
        let mut entries = Vec::with_capacity(repr.entries.len());
        for (idx, c) in repr.entries {
            if idx.contains(&0) {
                return Err(D::Error::custom("basis indices are 1-based"));
            }
            entries.push((idx.into_iter().map(|i| i - 1).collect(), c));
        }
        SymTensor::from_entries(repr.order, repr.dim, entries).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(dim: usize, sigma: &[u32]) -> SymTensor {
        SymTensor::basis(dim, sigma).unwrap()
    }

    #[test]
    fn symmetrize_examples() {
        // e1⊗e2
        let f = SymTensor::symmetrize(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(f, e(2, &[0, 1]));
        // e1⊗e1
        let f = SymTensor::symmetrize(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(f, e(2, &[0, 0]));
        // e1⊗e2 + e2⊗e1
        let f = SymTensor::symmetrize(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(f, e(2, &[0, 1]).scaled(2.0));
    }

    #[test]
    fn symmetrize_rejects_bad_length() {
        assert!(matches!(
            SymTensor::symmetrize(2, 3, &[0.0; 8]),
            Err(Error::DenseLength { expected: 9, got: 8 })
        ));
    }

    #[test]
    fn inner_examples() {
        assert_eq!(e(2, &[0, 0]).inner(&e(2, &[0, 0])).unwrap(), 1.0);
        assert_eq!(e(2, &[0, 1]).inner(&e(2, &[0, 1])).unwrap(), 0.5);
        assert_eq!(e(2, &[0, 1]).inner(&e(2, &[0, 0])).unwrap(), 0.0);
        assert!(e(2, &[0, 1]).inner(&e(3, &[0, 1])).is_err());
        assert!(e(2, &[0, 1]).inner(&e(2, &[0])).is_err());
    }

    #[test]
    fn contract_examples() {
        assert_eq!(
            e(2, &[0, 1]).contract_last(0).unwrap(),
            SymTensor::vector(&[0.0, 0.5])
        );
        assert_eq!(
            e(2, &[0, 0]).contract_last(0).unwrap(),
            SymTensor::vector(&[1.0, 0.0])
        );
        assert!(e(2, &[0, 0]).contract_last(1).unwrap().is_zero());
        assert!(e(2, &[0, 0]).contract_last(2).is_err());
    }

    #[test]
    fn coords_examples() {
        let c = e(2, &[0, 1]).to_coords();
        // canonical order: (0,0), (0,1), (1,1)
        assert_eq!(c.len(), 3);
        assert!((c[1] - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(c[0], 0.0);
        assert!(SymTensor::zero(2, 2).to_coords().iter().all(|&x| x == 0.0));
        let f = e(2, &[0, 0]).scaled(2.0);
        assert_eq!(f.to_coords()[0], 2.0);
    }

    #[test]
    fn unfold_examples() {
        let u = e(2, &[0, 1]).unfold();
        assert_eq!(u, DMatrix::from_column_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]));
        let u = e(2, &[0, 0]).unfold();
        assert_eq!(u, DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let v = SymTensor::vector(&[0.3, -1.0, 2.0]);
        assert_eq!(v.unfold(), DMatrix::from_column_slice(3, 1, &[0.3, -1.0, 2.0]));
    }

    #[test]
    fn enumeration_counts() {
        // C(d+n-1, n)
        assert_eq!(multi_indices(2, 4).len(), 10);
        assert_eq!(multi_indices(3, 4).len(), 20);
        assert_eq!(multi_indices(1, 5).len(), 5);
        assert_eq!(multi_indices(0, 5), vec![MultiIndex::empty()]);
        let all = multi_indices(3, 3);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn json_is_one_based() {
        let f = e(3, &[0, 2]).scaled(1.5);
        let s = f.to_json();
        assert_eq!(s, r#"{"order":2,"dim":3,"entries":[[[1,3],1.5]]}"#);
        assert_eq!(SymTensor::from_json(&s).unwrap(), f);
        assert!(SymTensor::from_json(r#"{"order":1,"dim":2,"entries":[[[0],1.0]]}"#).is_err());
        assert!(SymTensor::from_json(r#"{"order":1,"dim":2,"entries":[[[3],1.0]]}"#).is_err());
    }

    #[test]
    fn multi_index_helpers() {
        let s = MultiIndex::new(vec![2, 0, 2]);
        assert_eq!(s.entries(), &[0, 2, 2]);
        assert_eq!(s.multiplicities(), vec![(0, 1), (2, 2)]);
        assert!((s.weight() - 2.0 / 6.0).abs() < 1e-15);
        assert_eq!(s.without_one(2).unwrap().entries(), &[0, 2]);
        assert_eq!(s.with(1).entries(), &[0, 1, 2, 2]);
        assert!(s.without_one(1).is_none());
    }
}
