//! Kernel families `t ↦ f_t` with `f_0 = 0`, and sampling of `X_t = I_n(f_t)`
//! together with its Malliavin derivative along a time grid.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chaos::{ChaosVariable, GaussianSample};
use crate::error::{Error, Result};
use crate::tensor::SymTensor;

/// User-asserted lower bound `E(X_t − X_s)² ≥ c |t−s|^eta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CovarianceFloor {
    pub c: f64,
    pub eta: f64,
}

#[derive(Clone, Debug)]
enum Kind {
    Blk2,
    /// Dyadic ramps of levels `0..=levels`. With `paired` set each ramp
    /// lives on its own `ê(2h, 2h+1)` in the second chaos.
    Ramps { levels: u32, theta: f64, paired: bool },
    /// Midpoint-rule cell kernels: `f_t = Σ_k w_k(t) A_k`.
    Rosen { cells: Vec<DMatrix<f64>>, prefix: Vec<DMatrix<f64>> },
    Custom { nodes: Vec<f64>, tensors: Vec<SymTensor> },
}

#[derive(Clone, Debug)]
pub struct KernelFamily {
    name: String,
    order: usize,
    dim: usize,
    theta: f64,
    rho: f64,
    cov_floor: Option<CovarianceFloor>,
    kind: Kind,
}

// Path exponent just below the θ/2 ceiling.
fn rho_for(theta: f64) -> f64 {
    theta / 2.0 - 0.05
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TimeOutOfRange(t));
    }
    Ok(())
}

/// `clamp(2^l t − k, 0, 1)`: rises linearly across `[k/2^l, (k+1)/2^l]`, the
/// integral of the normalized indicator of that cell.
fn ramp(level: u32, k: usize, t: f64) -> f64 {
    ((2f64).powi(level as i32) * t - k as f64).clamp(0.0, 1.0)
}

impl KernelFamily {
    /// `f_t = (min(t, ½), (t − ½)₊)` in the first chaos.
    pub fn blk2() -> Self {
        KernelFamily {
            name: "BLK2".into(),
            order: 1,
            dim: 2,
            theta: 2.0,
            rho: 0.95,
            cov_floor: None,
            kind: Kind::Blk2,
        }
    }

    /// First-chaos multiscale family with `2^{levels+1} − 1` directions, one per
    /// dyadic cell of levels `0..=levels`. Direction `(l, k)` carries the ramp
    /// of cell `[k/2^l, (k+1)/2^l]` scaled by `2^{−lθ/2}`, so every cell adds a
    /// fresh direction and `‖f_t − f_s‖² ≍ |t−s|^θ` down to the finest level.
    pub fn fd(levels: u32, theta: f64) -> Result<Self> {
        Self::ramps(levels, theta, false)
    }

    /// Second-chaos analogue of [`KernelFamily::fd`]: direction `h` becomes
    /// `√2 ê(2h, 2h+1)`, which keeps the norms of the first-chaos family.
    pub fn herm2(levels: u32, theta: f64) -> Result<Self> {
        Self::ramps(levels, theta, true)
    }

    fn ramps(levels: u32, theta: f64, paired: bool) -> Result<Self> {
        if !(theta > 1.0 && theta < 2.0) {
            return Err(Error::InvalidArgument(format!(
                "ramp families need theta in (1, 2), got {theta}"
            )));
        }
        if levels == 0 || levels > 16 {
            return Err(Error::InvalidArgument(format!(
                "ramp families need 1 <= levels <= 16, got {levels}"
            )));
        }
        let base = (1usize << (levels + 1)) - 1;
        let (name, order, dim) = if paired {
            (format!("HERM2({levels},{theta})"), 2, 2 * base)
        } else {
            (format!("FD({levels},{theta})"), 1, base)
        };
        Ok(KernelFamily {
            name,
            order,
            dim,
            theta,
            rho: rho_for(theta),
            cov_floor: None,
            kind: Kind::Ramps {
                levels,
                theta,
                paired,
            },
        })
    }

    /// Discretized Hermite-process kernel of the second chaos on `cells`
    /// midpoints, `f_t(x,y) ∝ ∫_0^t (s−x)₊^γ (s−y)₊^γ ds` with `γ = hurst − 3/2`.
    /// The singularity is clipped at half a cell and `‖f_1‖ = 1`.
    /// Squared increments scale like `|t−s|^{4·hurst − 2}`.
    pub fn rosen(hurst: f64, cells: usize) -> Result<Self> {
        if !(hurst > 0.75 && hurst < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "ROSEN needs hurst in (3/4, 1) for a square-integrable kernel with theta > 1, got {hurst}"
            )));
        }
        if cells < 2 {
            return Err(Error::InvalidArgument("ROSEN needs at least 2 cells".into()));
        }
        let m = cells as f64;
        let gamma = hurst - 1.5;
        let phi = |u: f64| if u < 0.0 { 0.0 } else { u.max(0.5 / m).powf(gamma) };
        // basis e_i = √m 1_{cell i}, so a kernel value maps to value / m
        let mut a: Vec<DMatrix<f64>> = (0..cells)
            .map(|k| {
                let v = DVector::from_fn(cells, |i, _| phi((k as f64 - i as f64) / m));
                &v * v.transpose() / (m * m * m)
            })
            .collect();
        let total: DMatrix<f64> = a.iter().fold(DMatrix::zeros(cells, cells), |acc, x| acc + x);
        let scale = 1.0 / dense_to_sym(&total).norm();
        for x in a.iter_mut() {
            *x *= scale;
        }
        let mut prefix = Vec::with_capacity(cells + 1);
        prefix.push(DMatrix::zeros(cells, cells));
        for k in 0..cells {
            let next = &prefix[k] + &a[k];
            prefix.push(next);
        }
        let theta = 4.0 * hurst - 2.0;
        Ok(KernelFamily {
            name: format!("ROSEN({hurst},{cells})"),
            order: 2,
            dim: cells,
            theta,
            rho: rho_for(theta),
            cov_floor: None,
            kind: Kind::Rosen { cells: a, prefix },
        })
    }

    /// Piecewise-linear interpolation between `(t, f_t)` nodes. Nodes must start
    /// at `t = 0` with the zero tensor, increase strictly and end at `t = 1`.
    pub fn custom(name: &str, nodes: Vec<(f64, SymTensor)>, theta: f64) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidArgument("custom family needs at least two nodes".into()));
        }
        let (order, dim) = (nodes[0].1.order(), nodes[0].1.dim());
        if order == 0 || dim == 0 {
            return Err(Error::InvalidArgument("custom kernels need order >= 1 and dim >= 1".into()));
        }
        if nodes[0].0 != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "first node must be t = 0, got {}",
                nodes[0].0
            )));
        }
        if !nodes[0].1.is_zero() {
            return Err(Error::InvalidArgument("kernel at t = 0 must be zero".into()));
        }
        if nodes.last().map(|n| n.0) != Some(1.0) {
            return Err(Error::InvalidArgument("last node must be t = 1".into()));
        }
        for w in nodes.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidArgument(format!(
                    "node times must increase strictly ({} then {})",
                    w[0].0, w[1].0
                )));
            }
            w[0].1.same_shape(&w[1].1)?;
        }
        if !(theta > 0.0) {
            return Err(Error::InvalidArgument(format!("theta must be positive, got {theta}")));
        }
        let (ts, tensors) = nodes.into_iter().unzip();
        Ok(KernelFamily {
            name: name.to_string(),
            order,
            dim,
            theta,
            rho: rho_for(theta),
            cov_floor: None,
            kind: Kind::Custom { nodes: ts, tensors },
        })
    }

    /// Reads `[{"t": .., "tensor": {..}}, ..]`.
    pub fn custom_from_json(name: &str, json: &str, theta: f64) -> Result<Self> {
        #[derive(Deserialize)]
        struct Node {
            t: f64,
            tensor: SymTensor,
        }
        let nodes: Vec<Node> = serde_json::from_str(json)?;
        Self::custom(name, nodes.into_iter().map(|n| (n.t, n.tensor)).collect(), theta)
    }

    /// Samples `f` at `nodes + 1` equispaced times and interpolates linearly.
    pub fn from_fn<F>(name: &str, order: usize, dim: usize, nodes: usize, theta: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<SymTensor>,
    {
        let mut out = Vec::with_capacity(nodes + 1);
        for k in 0..=nodes {
            let t = k as f64 / nodes as f64;
            let ft = if k == 0 { SymTensor::zero(order, dim) } else { f(t)? };
            out.push((t, ft));
        }
        Self::custom(name, out, theta)
    }

    pub fn with_covariance_floor(mut self, c: f64, eta: f64) -> Self {
        self.cov_floor = Some(CovarianceFloor { c, eta });
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self.rho = rho_for(theta);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Claimed regularity exponent of `‖f_t − f_s‖² ≲ |t−s|^θ`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Hölder exponent used for sample paths, below `θ/2`.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn covariance_floor(&self) -> Option<CovarianceFloor> {
        self.cov_floor
    }

    /// Finest dyadic depth the family resolves: below it increments over
    /// neighbouring cells become collinear.
    pub fn resolution_depth(&self) -> Option<u32> {
        match &self.kind {
            Kind::Ramps { levels, .. } => Some(*levels),
            Kind::Rosen { cells, .. } if cells.len().is_power_of_two() => {
                Some(cells.len().trailing_zeros())
            }
            _ => None,
        }
    }

    pub fn at(&self, t: f64) -> Result<SymTensor> {
        check_time(t)?;
        match &self.kind {
            Kind::Blk2 => Ok(SymTensor::vector(&[t.min(0.5), (t - 0.5).max(0.0)])),
            Kind::Ramps {
                levels,
                theta,
                paired,
            } => Ok(self.ramps_at(*levels, *theta, *paired, t)),
            Kind::Rosen { cells, prefix } => {
                let m = cells.len();
                let x = t * m as f64;
                let k = (x.floor() as usize).min(m - 1);
                let frac = x - k as f64;
                Ok(dense_to_sym(&(&prefix[k] + &cells[k] * frac)))
            }
            Kind::Custom { nodes, tensors } => {
                let k = nodes.partition_point(|&s| s <= t).clamp(1, nodes.len() - 1);
                let (t0, t1) = (nodes[k - 1], nodes[k]);
                let w = (t - t0) / (t1 - t0);
                let mut out = tensors[k - 1].scaled(1.0 - w);
                out.axpy(w, &tensors[k])?;
                Ok(out)
            }
        }
    }

    fn ramps_at(&self, levels: u32, theta: f64, paired: bool, t: f64) -> SymTensor {
        let mut coords: Vec<(usize, f64)> = Vec::new();
        for l in 0..=levels {
            let n = 1usize << l;
            let w = (2f64).powf(-(l as f64) * theta / 2.0);
            for k in 0..n {
                let v = ramp(l, k, t);
                if v == 0.0 {
                    break;
                }
                coords.push((n - 1 + k, v * w));
            }
        }
        if paired {
            let entries = coords.into_iter().map(|(h, v)| {
                (vec![2 * h as u32, 2 * h as u32 + 1], v * std::f64::consts::SQRT_2)
            });
            SymTensor::from_entries(2, self.dim, entries).expect("indices in range")
        } else {
            let mut v = vec![0.0; self.dim];
            for (h, c) in coords {
                v[h] = c;
            }
            SymTensor::vector(&v)
        }
    }

    /// `f_t − f_s`.
    pub fn increment(&self, s: f64, t: f64) -> Result<SymTensor> {
        self.at(t)?.sub(&self.at(s)?)
    }
}

/// Symmetric `d × d` matrix as an order-2 tensor with the same dense entries.
pub fn dense_to_sym(m: &DMatrix<f64>) -> SymTensor {
    let d = m.nrows();
    let mut entries = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        entries.push((vec![i as u32, i as u32], m[(i, i)]));
        for j in i + 1..d {
            entries.push((vec![i as u32, j as u32], m[(i, j)] + m[(j, i)]));
        }
    }
    SymTensor::from_entries(2, d, entries).expect("square matrix")
}

/// `m + 1` equispaced points on `[0, 1]`.
pub fn uniform_grid(m: usize) -> Vec<f64> {
    (0..=m).map(|k| k as f64 / m as f64).collect()
}

/// `X` and `DX` along a grid for one Gaussian sample.
#[derive(Clone, Debug)]
pub struct PathSample {
    pub grid: Vec<f64>,
    pub x: Vec<f64>,
    pub dx: Vec<DVector<f64>>,
    pub z: GaussianSample,
}

/// Kernels of one family compiled on a fixed grid, ready for repeated sampling.
#[derive(Clone, Debug)]
pub struct PathSampler {
    grid: Vec<f64>,
    vars: Vec<ChaosVariable>,
    dim: usize,
    // first-chaos derivatives do not depend on the sample
    fixed_dx: Option<Vec<DVector<f64>>>,
}

impl PathSampler {
    pub fn new(fam: &KernelFamily, grid: &[f64]) -> Result<Self> {
        if grid.first() != Some(&0.0) {
            return Err(Error::InvalidArgument("grid must start at 0".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("grid must increase strictly".into()));
        }
        let vars = grid
            .iter()
            .map(|&t| fam.at(t).map(ChaosVariable::new))
            .collect::<Result<Vec<_>>>()?;
        let fixed_dx = if fam.order() == 1 {
            Some(
                vars.iter()
                    .map(|v| v.kernel().as_vector())
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        Ok(PathSampler {
            grid: grid.to_vec(),
            vars,
            dim: fam.dim(),
            fixed_dx,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kernels(&self) -> impl Iterator<Item = &SymTensor> {
        self.vars.iter().map(|v| v.kernel())
    }

    pub fn sample(&self, z: &GaussianSample) -> Result<PathSample> {
        let x = self
            .vars
            .iter()
            .map(|v| v.evaluate(z))
            .collect::<Result<Vec<_>>>()?;
        let dx = match &self.fixed_dx {
            Some(d) => d.clone(),
            None => self
                .vars
                .iter()
                .map(|v| v.gradient(z))
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(PathSample {
            grid: self.grid.clone(),
            x,
            dx,
            z: z.clone(),
        })
    }

    /// Values of `X` only.
    pub fn sample_values(&self, z: &GaussianSample) -> Result<Vec<f64>> {
        self.vars.iter().map(|v| v.evaluate(z)).collect()
    }
}

/// Convenience: sample a path of `fam` on `grid` at `z`.
pub fn sample_path(fam: &KernelFamily, grid: &[f64], z: &GaussianSample) -> Result<PathSample> {
    PathSampler::new(fam, grid)?.sample(z)
}
