//! Isonormal Gaussian samples, Hermite polynomials, multiple Wiener integrals
//! and their Malliavin derivatives on a truncated orthonormal basis.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::stats::{par_map, stream_rng, Estimate};
use crate::tensor::{factorial, SymTensor};

/// Probabilists' Hermite polynomial `H_k(x)`.
pub fn hermite(k: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if k == 0 {
        return prev;
    }
    for j in 1..k {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `H_0(x), …, H_k(x)`.
pub fn hermite_table(k: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(k + 1);
    h.push(1.0);
    if k >= 1 {
        h.push(x);
    }
    for j in 1..k {
        h.push(x * h[j] - j as f64 * h[j - 1]);
    }
    h
}

/// One draw of `W(e_1), …, W(e_d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSample {
    pub z: DVector<f64>,
    pub seed: u64,
    pub index: u64,
}

impl GaussianSample {
    pub fn draw(dim: usize, seed: u64, index: u64) -> Self {
        let mut rng = stream_rng(seed, index);
        let z = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
        GaussianSample { z, seed, index }
    }

    pub fn from_values(z: &[f64]) -> Self {
        GaussianSample {
            z: DVector::from_column_slice(z),
            seed: 0,
            index: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }
}

/// `I_n(f)` for a symmetric kernel `f` of order `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosVariable {
    kernel: SymTensor,
    // (index, multiplicity) factors of each stored multi-index
    terms: Vec<(Vec<(usize, usize)>, f64)>,
}

impl ChaosVariable {
    pub fn new(kernel: SymTensor) -> Self {
        let terms = kernel
            .iter()
            .map(|(sigma, c)| {
                let f = sigma
                    .multiplicities()
                    .into_iter()
                    .map(|(j, k)| (j as usize, k as usize))
                    .collect();
                (f, c)
            })
            .collect();
        ChaosVariable { kernel, terms }
    }

    pub fn order(&self) -> usize {
        self.kernel.order()
    }

    pub fn kernel(&self) -> &SymTensor {
        &self.kernel
    }

    fn check_dim(&self, z: &GaussianSample) -> Result<()> {
        if z.dim() != self.kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.kernel.dim(),
                got: z.dim(),
            });
        }
        Ok(())
    }

    /// `Σ_σ c_σ Π_l H_{k_l}(Z_{j_l})`.
    pub fn evaluate(&self, z: &GaussianSample) -> Result<f64> {
        self.check_dim(z)?;
        let mut acc = 0.0;
        for (factors, c) in &self.terms {
            let mut p = *c;
            for &(j, k) in factors {
                p *= hermite(k, z.z[j]);
            }
            acc += p;
        }
        Ok(acc)
    }

    /// `D I_n(f)` as a coordinate vector in `H`.
    ///
    /// Differentiates each Hermite product directly using `H_k' = k H_{k−1}`,
    /// which agrees with `n I_{n−1}(f ⊗_1 e_j)` component by component.
    pub fn gradient(&self, z: &GaussianSample) -> Result<DVector<f64>> {
        self.check_dim(z)?;
        let mut g = DVector::zeros(self.kernel.dim());
        for (factors, c) in &self.terms {
            for (pos, &(j, k)) in factors.iter().enumerate() {
                let mut p = c * k as f64 * hermite(k - 1, z.z[j]);
                for (other, &(i, m)) in factors.iter().enumerate() {
                    if other != pos {
                        p *= hermite(m, z.z[i]);
                    }
                }
                g[j] += p;
            }
        }
        Ok(g)
    }

    /// Component `j` equals `n · I_{n−1}(contract_last(f, j))`.
    pub fn gradient_by_contraction(&self, z: &GaussianSample) -> Result<DVector<f64>> {
        self.check_dim(z)?;
        let n = self.order() as f64;
        let mut g = DVector::zeros(self.kernel.dim());
        for j in 0..self.kernel.dim() {
            let reduced = ChaosVariable::new(self.kernel.contract_last(j)?);
            g[j] = n * reduced.evaluate(z)?;
        }
        Ok(g)
    }

    /// `E[I_n(f) I_n(g)] = n! ⟨f, g⟩`.
    pub fn covariance(&self, other: &ChaosVariable) -> Result<f64> {
        Ok(factorial(self.order()) * self.kernel.inner(&other.kernel)?)
    }
}

/// Gram matrix `⟨DF_i, DF_j⟩` of gradients laid out as consecutive blocks,
/// one per independent driver. Blocks are orthogonal copies of `H`, so the
/// inner product on the concatenation is the Euclidean one.
pub fn malliavin_matrix(gradients: &[DVector<f64>], layout: &[usize]) -> Result<DMatrix<f64>> {
    let expected: usize = layout.iter().sum();
    for g in gradients {
        if g.len() != expected {
            return Err(Error::LayoutMismatch {
                expected,
                got: g.len(),
            });
        }
    }
    let k = gradients.len();
    let mut c = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = gradients[i].dot(&gradients[j]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

/// Monte Carlo mean and standard error of `expr` over `n` samples of dimension
/// `dim`. Sample `i` uses stream `i` of `seed`.
pub fn mc_expectation<F>(expr: F, dim: usize, n: usize, seed: u64) -> Result<Estimate>
where
    F: Fn(&GaussianSample) -> f64 + Sync + Send,
{
    if n < 2 {
        return Err(Error::TooFewSamples { got: n, needed: 2 });
    }
    let xs = par_map(n, |i| expr(&GaussianSample::draw(dim, seed, i as u64)));
    Ok(Estimate::from_samples(&xs))
}
