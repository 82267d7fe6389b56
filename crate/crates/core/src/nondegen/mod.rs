//! Checks of the non-degeneracy results for `X_t = I_n(f_t)` and for Young
//! SDEs driven by independent copies of `X`.
//!
//! Every suite returns a [`Report`] with the claim being tested, both sides of
//! the inequality, the slack and a witness. Probability-zero statements are
//! tested through the empirical mass below a ladder of tolerances.

mod density;
mod integrand;
mod interpolation;
mod norris;
mod paths;
mod sde;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::kernels::KernelFamily;
use crate::tensor::factorial;

pub use density::{density_diagnostic, AtomLevel, DensityOptions, DensityReport, KdePeak};
pub use integrand::{holder_seminorm, holder_seminorm_vec, sup_abs, Integrand, Phi};
pub use interpolation::{
    check_covariance_floor, energy_identity_exact, fit_covariance_floor, verify_corollary_bounds,
    verify_energy_identity, verify_interpolation, CorollaryDetail, CorollaryOptions, EnergyDetail,
    EnergyOptions, FloorCheck, IdentityCheck, InterpolationDetail,
};
pub use norris::{norris_check, riemann_zeta, NorrisDetail, NorrisOptions, ScaleValue};
pub use paths::{
    alpha_at_grid, check_dx_in_f, truncated_residual, verify_dx_in_f, verify_nonvanishing, NonvanishingSummary,
    verify_uniform_bound, DxInF, DxInFDetail, IntegrandSummary, NonvanishingDetail, PathOptions,
    UniformDetail,
};
pub use sde::{sde_density_experiment, SdeDetail, SdeOptions};

/// `g ≢ 0` means `sup |g| > ZERO_FLOOR` on the grid.
pub const ZERO_FLOOR: f64 = 1e-12;

/// Tolerance ladder for empirical probability-zero checks.
pub const TOLERANCES: [f64; 3] = [1e-3, 1e-6, 1e-9];

fn tol_key(tol: f64) -> String {
    format!("{tol:e}")
}

/// `E[X_s X_t] = n! ⟨f_s, f_t⟩`.
pub fn covariance(fam: &KernelFamily, s: f64, t: f64) -> Result<f64> {
    Ok(factorial(fam.order()) * fam.at(s)?.inner(&fam.at(t)?)?)
}

/// Where an inequality is tightest or fails.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Witness {
    Interval { a: f64, b: f64 },
    Pair { s: f64, t: f64 },
    Sample { index: usize, integrand: Option<String>, t: Option<f64> },
}

/// Per-sample statistics, written out as CSV on request.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Table {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report<D: Serialize> {
    pub claim: &'static str,
    pub tag: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub case: Option<String>,
    pub n_samples: usize,
    pub fractions_below: BTreeMap<String, f64>,
    pub witness: Option<Witness>,
    pub pass: bool,
    pub detail: D,
    #[serde(skip)]
    pub table: Option<Table>,
}

impl<D: Serialize> Report<D> {
    fn new(claim: &'static str, tag: &'static str, detail: D) -> Self {
        Report {
            claim,
            tag,
            lhs: f64::NAN,
            rhs: f64::NAN,
            slack: f64::NAN,
            case: None,
            n_samples: 0,
            fractions_below: BTreeMap::new(),
            witness: None,
            pass: false,
            detail,
            table: None,
        }
    }
}

/// Fraction of `values` strictly below each tolerance in [`TOLERANCES`].
pub fn fractions_below(values: &[f64]) -> BTreeMap<String, f64> {
    TOLERANCES
        .iter()
        .map(|&tol| {
            let hits = values.iter().filter(|&&v| v < tol).count();
            let frac = if values.is_empty() {
                0.0
            } else {
                hits as f64 / values.len() as f64
            };
            (tol_key(tol), frac)
        })
        .collect()
}
