use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::density::{density_diagnostic, DensityOptions, DensityReport, MIN_SAMPLES};
use super::{fractions_below, Report, Table, Witness, TOLERANCES};
use crate::chaos::GaussianSample;
use crate::error::{Error, Result};
use crate::kernels::{uniform_grid, KernelFamily, PathSampler};
use crate::stats::{derive_seed, par_map, stream_rng};
use crate::young::{duhamel_malliavin, inverse_defect, solve_jacobians, solve_sde, VectorFieldSet};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SdeOptions {
    pub t: f64,
    pub grid: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub ellipticity_floor: f64,
    /// Points `y0 + 3 Z` at which ellipticity is checked before sampling.
    pub spot_checks: usize,
    pub density: DensityOptions,
}

impl Default for SdeOptions {
    fn default() -> Self {
        SdeOptions {
            t: 1.0,
            grid: 1024,
            n_samples: 1000,
            seed: 0,
            ellipticity_floor: 1e-3,
            spot_checks: 256,
            density: DensityOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SdeDetail {
    pub fields: String,
    pub dim: usize,
    pub t: f64,
    pub grid: usize,
    pub min_ellipticity: f64,
    pub min_eigenvalue: f64,
    pub max_asymmetry: f64,
    pub max_inverse_defect: f64,
    pub psd: bool,
    /// One per coordinate of `Y_t`; empty below the sample size the density
    /// check needs.
    pub density: Vec<DensityReport>,
    pub note: Option<String>,
}

struct SampleStats {
    y: DVector<f64>,
    min_eig: f64,
    asym: f64,
    defect: f64,
}

const SPOT_TAG: u64 = 0xe111;

fn spot_check(v: &VectorFieldSet, y0: &DVector<f64>, opts: &SdeOptions) -> Result<f64> {
    let mut rng = stream_rng(derive_seed(opts.seed, SPOT_TAG), 0);
    let mut min = f64::INFINITY;
    for k in 0..=opts.spot_checks {
        let y = if k == 0 {
            y0.clone()
        } else {
            y0 + DVector::from_fn(y0.len(), |_, _| 3.0 * rng.sample::<f64, _>(StandardNormal))
        };
        let e = v.ellipticity(&y);
        if e < opts.ellipticity_floor {
            return Err(Error::NotElliptic {
                value: e,
                floor: opts.ellipticity_floor,
                at: y.iter().copied().collect(),
            });
        }
        min = min.min(e);
    }
    Ok(min)
}

/// Malliavin matrix of `Y_t` for `dY = Σ V_i(Y) dX^i + V_0(Y) dt` driven by
/// independent copies of `X`, over `n_samples` trajectories.
///
/// Driver `j` of sample `i` uses Gaussian stream `i·d + j`. Reports the
/// smallest eigenvalue of `C_t` over samples, the mass below each tolerance,
/// and a density diagnostic per coordinate of `Y_t`.
pub fn sde_density_experiment(
    fam: &KernelFamily,
    v: &VectorFieldSet,
    y0: &DVector<f64>,
    opts: &SdeOptions,
) -> Result<Report<SdeDetail>> {
    if !(opts.t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {}", opts.t)));
    }
    if opts.t > 1.0 {
        return Err(Error::TimeOutOfRange(opts.t));
    }
    if y0.len() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim(),
            got: y0.len(),
        });
    }
    if opts.n_samples == 0 {
        return Err(Error::TooFewSamples { got: 0, needed: 1 });
    }
    let m = opts.grid;
    let at = (opts.t * m as f64).round() as usize;
    if m < 2 || (at as f64 / m as f64 - opts.t).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("t = {} is not a point of the grid with {m} steps", opts.t)));
    }
    let min_ellipticity = spot_check(v, y0, opts)?;

    let sampler = PathSampler::new(fam, &uniform_grid(m))?;
    let drivers = v.drivers();
    let dh = fam.dim();
    let stats = par_map(opts.n_samples, |i| -> Result<SampleStats> {
        let paths = (0..drivers)
            .map(|j| sampler.sample(&GaussianSample::draw(dh, opts.seed, (i * drivers + j) as u64)))
            .collect::<Result<Vec<_>>>()?;
        let x: Vec<&[f64]> = paths.iter().map(|p| p.x.as_slice()).collect();
        let dx: Vec<&[DVector<f64>]> = paths.iter().map(|p| p.dx.as_slice()).collect();
        let sol = solve_sde(v, &x, y0)?;
        let (j, k) = solve_jacobians(v, &x, &sol.y)?;
        let mal = duhamel_malliavin(v, &dx, &sol.y, &j, &k, at)?;
        let c = &mal.matrix;
        let asym = (c - c.transpose()).amax();
        let min_eig = c.clone().symmetric_eigenvalues().min();
        Ok(SampleStats {
            y: sol.y[at].clone(),
            min_eig,
            asym,
            defect: inverse_defect(&j[..=at], &k[..=at]),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let d = v.dim();
    let mut columns: Vec<String> = vec!["sample".into(), "lambda_min".into()];
    columns.extend((1..=d).map(|c| format!("Y_{c}")));
    let mut table = Table {
        columns,
        rows: Vec::with_capacity(stats.len()),
    };
    let mut worst = (f64::INFINITY, 0);
    let mut max_asym: f64 = 0.0;
    let mut max_defect: f64 = 0.0;
    for (i, s) in stats.iter().enumerate() {
        let mut row = vec![i as f64, s.min_eig];
        row.extend(s.y.iter());
        table.rows.push(row);
        if s.min_eig < worst.0 {
            worst = (s.min_eig, i);
        }
        max_asym = max_asym.max(s.asym);
        max_defect = max_defect.max(s.defect);
    }
    let eigs: Vec<f64> = stats.iter().map(|s| s.min_eig).collect();
    let psd = max_asym <= 1e-10 && worst.0 >= -1e-10;

    let (density, note) = if stats.len() >= MIN_SAMPLES {
        let reports = (0..d)
            .map(|c| {
                let coord: Vec<f64> = stats.iter().map(|s| s.y[c]).collect();
                density_diagnostic(&coord, &opts.density)
            })
            .collect::<Result<Vec<_>>>()?;
        (reports, None)
    } else {
        (
            Vec::new(),
            Some(format!("density diagnostics need at least {MIN_SAMPLES} samples")),
        )
    };
    let smallest = *TOLERANCES.last().expect("nonempty ladder");
    let fractions = fractions_below(&eigs);
    let density_ok = density.iter().all(|r| r.pass);
    let mut r = Report::new(
        "lambda_min(C_t) > 0 almost surely, so Y_t has a density",
        "sde-density",
        SdeDetail {
            fields: v.name().to_string(),
            dim: d,
            t: opts.t,
            grid: m,
            min_ellipticity,
            min_eigenvalue: worst.0,
            max_asymmetry: max_asym,
            max_inverse_defect: max_defect,
            psd,
            density,
            note,
        },
    );
    r.lhs = worst.0;
    r.rhs = smallest;
    r.slack = worst.0 - smallest;
    r.n_samples = opts.n_samples;
    r.pass = fractions[&super::tol_key(smallest)] == 0.0 && psd && density_ok;
    r.fractions_below = fractions;
    r.witness = Some(Witness::Sample {
        index: worst.1,
        integrand: None,
        t: Some(opts.t),
    });
    r.table = Some(table);
    Ok(r)
}
