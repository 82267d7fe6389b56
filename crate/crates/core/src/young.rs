//! Young integrals, Young SDEs `dY = Σ V_i(Y) dX^i + V_0(Y) dt`, their
//! Jacobian flows and the Malliavin derivative of `Y_t` by variation of
//! constants.
//!
//! All paths live on a common uniform grid of `[0, 1]` given by their length.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OVERFLOW_GUARD: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct YoungIntegral {
    pub value: f64,
    /// `|value − value on the grid with every other point|`; NaN when the
    /// number of steps is odd.
    pub refinement_error: f64,
}

fn check_regime(tau: f64, rho: f64) -> Result<()> {
    if !(tau + rho > 1.0) {
        return Err(Error::OutsideYoungRegime(tau + rho));
    }
    Ok(())
}

fn left_sum(g: &[f64], x: &[f64], stride: usize) -> f64 {
    let mut acc = 0.0;
    let mut k = 0;
    while k + stride < x.len() {
        acc += g[k] * (x[k + stride] - x[k]);
        k += stride;
    }
    acc
}

/// Left-point Riemann–Stieltjes sum `Σ g_{t_k} (X_{t_{k+1}} − X_{t_k})` for a
/// `tau`-Hölder integrand against a `rho`-Hölder integrator.
pub fn young_integral(g: &[f64], x: &[f64], tau: f64, rho: f64) -> Result<YoungIntegral> {
    check_regime(tau, rho)?;
    if g.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: g.len(),
        });
    }
    let value = left_sum(g, x, 1);
    let steps = x.len().saturating_sub(1);
    let refinement_error = if steps >= 2 && steps % 2 == 0 {
        (value - left_sum(g, x, 2)).abs()
    } else {
        f64::NAN
    };
    Ok(YoungIntegral {
        value,
        refinement_error,
    })
}

/// Running integral `t_k ↦ Σ_{i<k} g_{t_i} (X_{t_{i+1}} − X_{t_i})` of a
/// vector-valued integrator.
pub fn running_integral(g: &[f64], x: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    if g.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: g.len(),
        });
    }
    let Some(first) = x.first() else {
        return Ok(Vec::new());
    };
    let mut acc = DVector::zeros(first.len());
    let mut out = Vec::with_capacity(x.len());
    out.push(acc.clone());
    for k in 0..x.len() - 1 {
        acc.axpy(g[k], &(&x[k + 1] - &x[k]), 1.0);
        out.push(acc.clone());
    }
    Ok(out)
}

/// `y ↦ M y + c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

impl AffineMap {
    fn matrix(&self, dim: usize) -> Result<DMatrix<f64>> {
        if self.matrix.len() != dim || self.matrix.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument(format!(
                "affine field matrix must be {dim}x{dim}"
            )));
        }
        if self.offset.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.offset.len(),
            });
        }
        Ok(DMatrix::from_fn(dim, dim, |i, j| self.matrix[i][j]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct AffineFile {
    dim: usize,
    drift: AffineMap,
    diffusion: Vec<AffineMap>,
}

#[derive(Clone, Debug, PartialEq)]
enum Fields {
    Affine {
        drift: (DMatrix<f64>, DVector<f64>),
        diffusion: Vec<(DMatrix<f64>, DVector<f64>)>,
    },
    /// `V_i(y) = e_i + eps · sin(y)` componentwise, no drift.
    EllipticSine { eps: f64 },
}

/// Drift `V_0` and diffusion fields `V_1..V_d` on `R^dim`, with Jacobians.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldSet {
    name: String,
    dim: usize,
    drivers: usize,
    fields: Fields,
}

impl VectorFieldSet {
    /// `V_0(y) = B y + b`, `V_i(y) = A_i y + a_i`.
    pub fn affine(
        drift: (DMatrix<f64>, DVector<f64>),
        diffusion: Vec<(DMatrix<f64>, DVector<f64>)>,
    ) -> Result<Self> {
        let dim = drift.1.len();
        let square = |m: &DMatrix<f64>, v: &DVector<f64>| {
            m.nrows() == dim && m.ncols() == dim && v.len() == dim
        };
        if !square(&drift.0, &drift.1) || diffusion.iter().any(|(m, v)| !square(m, v)) {
            return Err(Error::InvalidArgument(format!(
                "affine fields must all act on R^{dim}"
            )));
        }
        if diffusion.is_empty() {
            return Err(Error::InvalidArgument("need at least one diffusion field".into()));
        }
        Ok(VectorFieldSet {
            name: "affine".into(),
            dim,
            drivers: diffusion.len(),
            fields: Fields::Affine { drift, diffusion },
        })
    }

    /// `V_i(y) = A_i y`, no drift.
    pub fn linear(diffusion: Vec<DMatrix<f64>>) -> Result<Self> {
        let dim = diffusion.first().map_or(0, |m| m.nrows());
        let mut out = Self::affine(
            (DMatrix::zeros(dim, dim), DVector::zeros(dim)),
            diffusion
                .into_iter()
                .map(|m| (m, DVector::zeros(dim)))
                .collect(),
        )?;
        out.name = "linear".into();
        Ok(out)
    }

    /// `V_i ≡ e_i` on `R^dim` with `dim` drivers, no drift.
    pub fn additive(dim: usize) -> Result<Self> {
        let mut out = Self::affine(
            (DMatrix::zeros(dim, dim), DVector::zeros(dim)),
            (0..dim)
                .map(|i| (DMatrix::zeros(dim, dim), DVector::from_fn(dim, |k, _| (k == i) as u8 as f64)))
                .collect(),
        )?;
        out.name = "additive".into();
        Ok(out)
    }

    /// `V_i(y) = e_i + 0.1 · (sin y_1, …, sin y_dim)`, `V_0 = 0`.
    pub fn elliptic_sine(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        Ok(VectorFieldSet {
            name: "elliptic-sine".into(),
            dim,
            drivers: dim,
            fields: Fields::EllipticSine { eps: 0.1 },
        })
    }

    /// Reads `{"dim", "drift": {"matrix", "offset"}, "diffusion": [...]}`.
    pub fn affine_from_json(json: &str) -> Result<Self> {
        let f: AffineFile = serde_json::from_str(json)?;
        let drift = (f.drift.matrix(f.dim)?, DVector::from_vec(f.drift.offset.clone()));
        let diffusion = f
            .diffusion
            .iter()
            .map(|m| Ok((m.matrix(f.dim)?, DVector::from_vec(m.offset.clone()))))
            .collect::<Result<Vec<_>>>()?;
        Self::affine(drift, diffusion)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of driving paths.
    pub fn drivers(&self) -> usize {
        self.drivers
    }

    pub fn drift(&self, y: &DVector<f64>) -> DVector<f64> {
        match &self.fields {
            Fields::Affine { drift, .. } => &drift.0 * y + &drift.1,
            Fields::EllipticSine { .. } => DVector::zeros(self.dim),
        }
    }

    pub fn drift_jacobian(&self, _y: &DVector<f64>) -> DMatrix<f64> {
        match &self.fields {
            Fields::Affine { drift, .. } => drift.0.clone(),
            Fields::EllipticSine { .. } => DMatrix::zeros(self.dim, self.dim),
        }
    }

    /// `V_i(y)` for driver `i` in `0..drivers`.
    pub fn diffusion(&self, i: usize, y: &DVector<f64>) -> DVector<f64> {
        match &self.fields {
            Fields::Affine { diffusion, .. } => &diffusion[i].0 * y + &diffusion[i].1,
            Fields::EllipticSine { eps } => {
                let mut v = y.map(|x| eps * x.sin());
                v[i] += 1.0;
                v
            }
        }
    }

    pub fn diffusion_jacobian(&self, i: usize, y: &DVector<f64>) -> DMatrix<f64> {
        match &self.fields {
            Fields::Affine { diffusion, .. } => diffusion[i].0.clone(),
            Fields::EllipticSine { eps } => DMatrix::from_diagonal(&y.map(|x| eps * x.cos())),
        }
    }

    /// `dim × drivers` matrix with columns `V_i(y)`.
    pub fn diffusion_matrix(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.drivers);
        for i in 0..self.drivers {
            m.set_column(i, &self.diffusion(i, y));
        }
        m
    }

    /// Smallest singular value of the diffusion matrix at `y` (0 when there are
    /// fewer drivers than dimensions).
    pub fn ellipticity(&self, y: &DVector<f64>) -> f64 {
        if self.drivers < self.dim {
            return 0.0;
        }
        self.diffusion_matrix(y).singular_values().min()
    }
}

/// Euler solution on the grid and on the grid with every other point.
#[derive(Clone, Debug, PartialEq)]
pub struct SdePath {
    pub y: Vec<DVector<f64>>,
    pub y_half: Vec<DVector<f64>>,
}

fn check_drivers(v: &VectorFieldSet, drivers: &[&[f64]]) -> Result<usize> {
    if drivers.len() != v.drivers() {
        return Err(Error::DimensionMismatch {
            expected: v.drivers(),
            got: drivers.len(),
        });
    }
    let len = drivers[0].len();
    if len < 2 || drivers.iter().any(|d| d.len() != len) {
        return Err(Error::InvalidArgument(
            "driver paths must share a grid with at least one step".into(),
        ));
    }
    Ok(len)
}

fn euler(v: &VectorFieldSet, drivers: &[&[f64]], y0: &DVector<f64>, stride: usize) -> Result<Vec<DVector<f64>>> {
    let len = drivers[0].len();
    let steps = (len - 1) / stride;
    let dt = stride as f64 / (len - 1) as f64;
    let mut y = y0.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y.clone());
    for s in 0..steps {
        let k = s * stride;
        let mut next = &y + v.drift(&y) * dt;
        for (i, x) in drivers.iter().enumerate() {
            next.axpy(x[k + stride] - x[k], &v.diffusion(i, &y), 1.0);
        }
        let norm = next.norm();
        if !norm.is_finite() || norm > OVERFLOW_GUARD {
            return Err(Error::Divergence {
                time: (k + stride) as f64 / (len - 1) as f64,
                norm,
            });
        }
        y = next;
        out.push(y.clone());
    }
    Ok(out)
}

/// Left-point Euler scheme for `dY = Σ V_i(Y) dX^i + V_0(Y) dt`, `Y_0 = y0`.
pub fn solve_sde(v: &VectorFieldSet, drivers: &[&[f64]], y0: &DVector<f64>) -> Result<SdePath> {
    check_drivers(v, drivers)?;
    if y0.len() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim(),
            got: y0.len(),
        });
    }
    let y = euler(v, drivers, y0, 1)?;
    let y_half = if (drivers[0].len() - 1) % 2 == 0 {
        euler(v, drivers, y0, 2)?
    } else {
        Vec::new()
    };
    Ok(SdePath { y, y_half })
}

// Linear increment A_k = Σ DV_i(y) ΔX^i + DV_0(y) Δt.
fn generator(v: &VectorFieldSet, drivers: &[&[f64]], y: &DVector<f64>, k: usize, dt: f64) -> DMatrix<f64> {
    let mut a = v.drift_jacobian(y) * dt;
    for (i, x) in drivers.iter().enumerate() {
        a += v.diffusion_jacobian(i, y) * (x[k + 1] - x[k]);
    }
    a
}

/// `J_{t←0}` and its inverse along a solved path.
///
/// Both linear equations are stepped with the trapezoidal (Heun) rule, using
/// the field Jacobians at `Y_k` and `Y_{k+1}`. With plain Euler steps the
/// product `J K` drifts from the identity by `Σ A_k²`, about `1/m` for smooth
/// drivers; the trapezoidal pair keeps it at `O(1/m²)`.
pub fn solve_jacobians(
    v: &VectorFieldSet,
    drivers: &[&[f64]],
    y: &[DVector<f64>],
) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
    let len = check_drivers(v, drivers)?;
    if y.len() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            got: y.len(),
        });
    }
    let d = v.dim();
    let dt = 1.0 / (len - 1) as f64;
    let mut j = DMatrix::identity(d, d);
    let mut k = DMatrix::identity(d, d);
    let mut js = Vec::with_capacity(len);
    let mut ks = Vec::with_capacity(len);
    js.push(j.clone());
    ks.push(k.clone());
    for step in 0..len - 1 {
        let a = generator(v, drivers, &y[step], step, dt);
        let a_next = generator(v, drivers, &y[step + 1], step, dt);
        let aj = &a * &j;
        j = &j + (&aj + &a_next * (&j + &aj)) * 0.5;
        let ka = &k * &a;
        k = &k - (&ka + (&k - &ka) * &a_next) * 0.5;
        let norm = j.norm().max(k.norm());
        if !norm.is_finite() || norm > OVERFLOW_GUARD {
            return Err(Error::Divergence {
                time: (step + 1) as f64 * dt,
                norm,
            });
        }
        js.push(j.clone());
        ks.push(k.clone());
    }
    Ok((js, ks))
}

/// Malliavin derivative of `Y` at grid index `at`, one `dim × d_H` block per
/// driver, and the Malliavin matrix `C = Σ_j D^jY (D^jY)ᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct MalliavinAt {
    pub blocks: Vec<DMatrix<f64>>,
    pub matrix: DMatrix<f64>,
}

/// `D^jY_t = J_t Σ_{t_k < t} J⁻¹_{t_k} V_j(Y_{t_k}) (DX^j_{t_{k+1}} − DX^j_{t_k})ᵀ`.
///
/// `dx[j]` is the derivative path of driver `j`. Drivers are independent
/// copies, so `D^j` only sees driver `j`.
pub fn duhamel_malliavin(
    v: &VectorFieldSet,
    dx: &[&[DVector<f64>]],
    y: &[DVector<f64>],
    j: &[DMatrix<f64>],
    k_inv: &[DMatrix<f64>],
    at: usize,
) -> Result<MalliavinAt> {
    if dx.len() != v.drivers() {
        return Err(Error::MissingDerivative(dx.len().min(v.drivers())));
    }
    let len = y.len();
    if at >= len || j.len() != len || k_inv.len() != len {
        return Err(Error::InvalidArgument("path lengths disagree with the target index".into()));
    }
    let d = v.dim();
    let mut blocks = Vec::with_capacity(dx.len());
    for (i, path) in dx.iter().enumerate() {
        if path.len() != len {
            return Err(Error::MissingDerivative(i));
        }
        let dh = path[0].len();
        let mut acc = DMatrix::zeros(d, dh);
        for step in 0..at {
            let w = &k_inv[step] * v.diffusion(i, &y[step]);
            let inc = &path[step + 1] - &path[step];
            acc.ger(1.0, &w, &inc, 1.0);
        }
        blocks.push(&j[at] * acc);
    }
    let mut matrix = DMatrix::zeros(d, d);
    for b in &blocks {
        matrix += b * b.transpose();
    }
    Ok(MalliavinAt { blocks, matrix })
}

/// Largest entrywise deviation of `J_t J⁻¹_t` from the identity over the path.
pub fn inverse_defect(j: &[DMatrix<f64>], k_inv: &[DMatrix<f64>]) -> f64 {
    j.iter()
        .zip(k_inv)
        .map(|(a, b)| {
            let d = a.nrows();
            (a * b - DMatrix::identity(d, d)).amax()
        })
        .fold(0.0, f64::max)
}

/// Errors of the Euler scheme at `t = 1` over successive step halvings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub steps: Vec<usize>,
    pub errors: Vec<f64>,
    /// `log2(e_{2h} / e_h)` for consecutive grids.
    pub orders: Vec<f64>,
    /// Least-squares slope of `−log2 e` against `log2 m`.
    pub order: f64,
}

/// Euler scheme for `dY = a Y dX`, `Y_0 = y0`, against the exact Young solution
/// `y0 exp(a (X_t − X_0))`.
///
/// `x` lives on the finest grid; coarser grids take every `2^l`-th point for
/// `l < levels`.
pub fn exponential_benchmark(x: &[f64], a: f64, y0: f64, levels: usize) -> Result<ConvergenceStudy> {
    let m = x.len().saturating_sub(1);
    if levels < 2 || m == 0 || m % (1 << (levels - 1)) != 0 {
        return Err(Error::InvalidArgument(format!(
            "a path with {m} steps cannot be halved {} times",
            levels.saturating_sub(1)
        )));
    }
    let v = VectorFieldSet::linear(vec![DMatrix::from_element(1, 1, a)])?;
    let exact = y0 * (a * (x[m] - x[0])).exp();
    let mut steps = Vec::with_capacity(levels);
    let mut errors = Vec::with_capacity(levels);
    for l in (0..levels).rev() {
        let stride = 1 << l;
        let coarse: Vec<f64> = x.iter().step_by(stride).copied().collect();
        let y = euler(&v, &[&coarse], &DVector::from_element(1, y0), 1)?;
        steps.push(coarse.len() - 1);
        errors.push((y[y.len() - 1][0] - exact).abs());
    }
    let orders = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let lx: Vec<f64> = steps.iter().map(|&s| (s as f64).log2()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| -e.log2()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(ConvergenceStudy {
        steps,
        errors,
        orders,
        order: sxy / sxx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(m: usize) -> Vec<f64> {
        (0..=m).map(|k| k as f64 / m as f64).collect()
    }

    #[test]
    fn integral_examples() {
        let t = grid(1 << 10);
        let x: Vec<f64> = t.iter().map(|s| s * s).collect();
        let r = young_integral(&t, &x, 1.0, 1.0).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-3, "{r:?}");
        let ones = vec![1.0; t.len()];
        let x: Vec<f64> = t.iter().map(|s| (3.0 * s).sin()).collect();
        let r = young_integral(&ones, &x, 1.0, 0.6).unwrap();
        assert_eq!(r.value, x[x.len() - 1] - x[0]);
        let r = young_integral(&x, &x, 0.9, 0.9).unwrap();
        let exact = 0.5 * (x[x.len() - 1].powi(2) - x[0].powi(2));
        assert!((r.value - exact).abs() <= 2.0 * r.refinement_error, "{r:?}");
        assert!(matches!(
            young_integral(&x, &x, 0.5, 0.5),
            Err(Error::OutsideYoungRegime(_))
        ));
    }

    #[test]
    fn integral_is_additive() {
        let t = grid(64);
        let g: Vec<f64> = t.iter().map(|s| s.cos()).collect();
        let x: Vec<f64> = t.iter().map(|s| s.powf(0.8)).collect();
        let whole = young_integral(&g, &x, 1.0, 0.8).unwrap().value;
        let u = 24;
        let a = young_integral(&g[..=u], &x[..=u], 1.0, 0.8).unwrap().value;
        let b = young_integral(&g[u..], &x[u..], 1.0, 0.8).unwrap().value;
        assert!((whole - (a + b)).abs() < 1e-15);
    }

    #[test]
    fn sde_examples() {
        let t = grid(256);
        let x: Vec<f64> = t.iter().map(|s| (2.0 * s).sin()).collect();
        let y0 = DVector::from_element(1, 1.5);
        // additive noise is exact
        let v = VectorFieldSet::affine(
            (DMatrix::zeros(1, 1), DVector::zeros(1)),
            vec![(DMatrix::zeros(1, 1), DVector::from_element(1, 0.7))],
        )
        .unwrap();
        let p = solve_sde(&v, &[&x], &y0).unwrap();
        for (k, y) in p.y.iter().enumerate() {
            assert!((y[0] - (1.5 + 0.7 * (x[k] - x[0]))).abs() < 1e-12);
        }
        // constant drift only
        let v = VectorFieldSet::affine(
            (DMatrix::zeros(1, 1), DVector::from_element(1, -2.0)),
            vec![(DMatrix::zeros(1, 1), DVector::zeros(1))],
        )
        .unwrap();
        let p = solve_sde(&v, &[&x], &y0).unwrap();
        assert!((p.y[256][0] - (1.5 - 2.0)).abs() < 1e-12);
        assert_eq!(p.y_half.len(), 129);
    }

    #[test]
    fn divergence_is_reported() {
        let t = grid(64);
        let x: Vec<f64> = t.iter().map(|s| 1e3 * s).collect();
        let v = VectorFieldSet::linear(vec![DMatrix::from_element(1, 1, 1.0)]).unwrap();
        let err = solve_sde(&v, &[&x], &DVector::from_element(1, 1.0)).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err:?}");
    }

    #[test]
    fn jacobian_starts_at_identity_and_inverts() {
        let t = grid(1 << 12);
        let x1: Vec<f64> = t.iter().map(|s| (3.0 * s).sin()).collect();
        let x2: Vec<f64> = t.iter().map(|s| s * s - s).collect();
        let v = VectorFieldSet::elliptic_sine(2).unwrap();
        let y0 = DVector::from_vec(vec![0.3, -1.0]);
        let p = solve_sde(&v, &[&x1, &x2], &y0).unwrap();
        let (j, k) = solve_jacobians(&v, &[&x1, &x2], &p.y).unwrap();
        assert_eq!(j[0], DMatrix::identity(2, 2));
        assert!(inverse_defect(&j, &k) <= 1e-6, "{}", inverse_defect(&j, &k));
    }

    #[test]
    fn additive_noise_derivative_is_the_kernel() {
        let m = 32;
        let dx: Vec<DVector<f64>> = (0..=m)
            .map(|k| DVector::from_vec(vec![k as f64 / m as f64, (k as f64).sqrt()]))
            .collect();
        let x: Vec<f64> = (0..=m).map(|k| (k as f64 * 0.3).sin()).collect();
        let v = VectorFieldSet::additive(1).unwrap();
        let y0 = DVector::zeros(1);
        let p = solve_sde(&v, &[&x], &y0).unwrap();
        let (j, k) = solve_jacobians(&v, &[&x], &p.y).unwrap();
        let r = duhamel_malliavin(&v, &[&dx], &p.y, &j, &k, m).unwrap();
        assert_eq!(r.blocks[0].row(0).transpose(), dx[m]);
        assert!((r.matrix[(0, 0)] - dx[m].norm_squared()).abs() < 1e-12);
        let r0 = duhamel_malliavin(&v, &[&dx], &p.y, &j, &k, 0).unwrap();
        assert_eq!(r0.matrix[(0, 0)], 0.0);
        assert!(duhamel_malliavin(&v, &[], &p.y, &j, &k, m).is_err());
    }

    #[test]
    fn exponential_solution_converges() {
        let t = grid(1 << 12);
        let x: Vec<f64> = t.iter().map(|s| (3.0 * s).sin() + s.powf(0.75)).collect();
        let study = exponential_benchmark(&x, 0.8, 1.0, 6).unwrap();
        assert_eq!(study.steps, vec![128, 256, 512, 1024, 2048, 4096]);
        assert!(study.order > 0.5, "{study:?}");
        assert!(study.errors.windows(2).all(|w| w[1] < w[0]));
        // the Jacobian of a scalar linear equation is the solution over y0
        let v = VectorFieldSet::linear(vec![DMatrix::from_element(1, 1, 0.8)]).unwrap();
        let p = solve_sde(&v, &[&x], &DVector::from_element(1, 1.0)).unwrap();
        let (j, _) = solve_jacobians(&v, &[&x], &p.y).unwrap();
        let exact = (0.8 * (x[4096] - x[0])).exp();
        assert!((j[4096][(0, 0)] - exact).abs() < 1e-6, "{}", j[4096][(0, 0)] - exact);
    }

    #[test]
    fn affine_json() {
        let json = r#"{"dim": 2,
            "drift": {"matrix": [[0, 1], [-1, 0]], "offset": [0, 0]},
            "diffusion": [{"matrix": [[0, 0], [0, 0]], "offset": [1, 0]},
                          {"matrix": [[0, 0], [0, 0]], "offset": [0, 1]}]}"#;
        let v = VectorFieldSet::affine_from_json(json).unwrap();
        assert_eq!(v.drivers(), 2);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(v.drift(&y).as_slice(), &[2.0, -1.0]);
        assert!((v.ellipticity(&y) - 1.0).abs() < 1e-15);
        assert!(VectorFieldSet::affine_from_json(r#"{"dim": 2, "drift": {"matrix": [[0]], "offset": [0]}, "diffusion": []}"#).is_err());
    }
}
