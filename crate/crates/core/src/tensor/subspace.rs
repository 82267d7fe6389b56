use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Orthonormal basis of a subspace, stored as the columns of a matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    basis: DMatrix<f64>,
    tol: f64,
}

impl SubspaceBasis {
    pub fn empty(ambient: usize) -> Self {
        SubspaceBasis {
            basis: DMatrix::zeros(ambient, 0),
            tol: DEFAULT_RANK_TOL,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        if self.rank() == 0 {
            return nalgebra::DVector::zeros(v.len());
        }
        &self.basis * (self.basis.transpose() * v)
    }

    /// Smallest subspace containing both.
    pub fn join(&self, other: &SubspaceBasis) -> SubspaceBasis {
        let mut cols = DMatrix::zeros(self.ambient_dim(), self.rank() + other.rank());
        cols.columns_mut(0, self.rank()).copy_from(&self.basis);
        cols.columns_mut(self.rank(), other.rank())
            .copy_from(&other.basis);
        orthonormal_range(&cols, self.tol.max(other.tol))
    }
}

/// Orthonormal basis of the column space of `columns`.
///
/// Left singular vectors whose singular value exceeds `tol * σ_max` are kept.
pub fn orthonormal_range(columns: &DMatrix<f64>, tol: f64) -> SubspaceBasis {
    let ambient = columns.nrows();
    if columns.ncols() == 0 || ambient == 0 {
        return SubspaceBasis {
            basis: DMatrix::zeros(ambient, 0),
            tol,
        };
    }
    // Thin SVD of the wide side is cheaper through the Gram matrix, but it
    // squares the condition number, so decompose the matrix itself.
    let svd = columns.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return SubspaceBasis {
            basis: DMatrix::zeros(ambient, 0),
            tol,
        };
    }
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol * smax)
        .map(|(i, _)| i)
        .collect();
    SubspaceBasis {
        basis: u.select_columns(keep.iter()),
        tol,
    }
}

/// `min over unit u ∈ U of ‖u − P_S u‖²`, which equals `1 − σ_max(B_Uᵀ B_S)²`.
///
/// It is evaluated as `σ_min((I − B_S B_Sᵀ) B_U)²` so that small residuals
/// keep their relative accuracy instead of cancelling against 1.
pub fn residual_ratio(u: &SubspaceBasis, s: &SubspaceBasis) -> Result<f64> {
    if u.ambient_dim() != s.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: u.ambient_dim(),
            got: s.ambient_dim(),
        });
    }
    if u.rank() == 0 {
        return Err(Error::EmptySubspace);
    }
    if s.rank() == 0 {
        return Ok(1.0);
    }
    let bu = &u.basis;
    let bs = &s.basis;
    let resid = bu - bs * (bs.transpose() * bu);
    let sv = resid.singular_values();
    let smin = if resid.nrows() < resid.ncols() {
        0.0
    } else {
        sv.min()
    };
    Ok((smin * smin).clamp(0.0, 1.0))
}
