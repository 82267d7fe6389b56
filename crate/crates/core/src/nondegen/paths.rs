use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use super::integrand::{sup_abs, Integrand};
use super::{fractions_below, Report, Table, Witness, TOLERANCES, ZERO_FLOOR};
use crate::assumptions::{chaos_subspace, dyadic_configs, estimate_alpha, NonDeterminism, POSITIVE_FLOOR};
use crate::chaos::{ChaosVariable, GaussianSample};
use crate::error::{Error, Result};
use crate::kernels::{uniform_grid, KernelFamily, PathSample, PathSampler};
use crate::stats::{derive_seed, par_map, stream_rng, Proportion};
use crate::tensor::{orthonormal_range, DEFAULT_RANK_TOL};

/// Grid, sample count and seed shared by the path suites.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathOptions {
    pub grid: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            grid: 64,
            n_samples: 1000,
            seed: 0,
        }
    }
}

fn log2_exact(m: usize) -> Result<u32> {
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("grid size must be a power of two, got {m}")));
    }
    Ok(m.trailing_zeros())
}

/// α̂ over every dyadic config of the grid with `m` steps, the scale at which
/// the path suites work.
pub fn alpha_at_grid(fam: &KernelFamily, m: usize, tol: f64) -> Result<NonDeterminism> {
    let depth = log2_exact(m)?;
    let configs: Vec<_> = dyadic_configs(depth).into_iter().map(|c| (Some(depth), c)).collect();
    estimate_alpha(fam, &configs, tol)
}

fn check_integrands(fam: &KernelFamily, integrands: &[Integrand]) -> Result<()> {
    if integrands.is_empty() {
        return Err(Error::InvalidArgument("no integrands given".into()));
    }
    for g in integrands {
        let s = g.tau(fam.rho()) + fam.rho();
        if !(s > 1.0) {
            return Err(Error::OutsideYoungRegime(s));
        }
    }
    Ok(())
}

fn sample_paths<T, F>(fam: &KernelFamily, opts: &PathOptions, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &PathSample) -> Result<T> + Sync + Send,
{
    log2_exact(opts.grid)?;
    if opts.n_samples == 0 {
        return Err(Error::TooFewSamples { got: 0, needed: 1 });
    }
    let sampler = PathSampler::new(fam, &uniform_grid(opts.grid))?;
    let d = fam.dim();
    par_map(opts.n_samples, |i| {
        let path = sampler.sample(&GaussianSample::draw(d, opts.seed, i as u64))?;
        f(i, &path)
    })
    .into_iter()
    .collect()
}

/// Running integral `∫_0^{t_k} g dDX` for each grid point.
fn running(g: &[f64], dx: &[DVector<f64>]) -> Vec<DVector<f64>> {
    crate::young::running_integral(g, dx).expect("lengths agree")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegrandSummary {
    pub integrand: String,
    pub min: f64,
    pub min_interval: f64,
    pub degenerate: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniformDetail {
    pub alpha: f64,
    pub threshold: f64,
    pub informative: bool,
    /// `min ‖∫_0^1‖ / sup_{[s,t]} ‖∫_s^t‖` over samples and integrands.
    pub min_interval_ratio: f64,
    pub per_integrand: Vec<IntegrandSummary>,
    pub grid: usize,
}

/// `‖∫_0^1 g dDX‖ ≥ √α sup_t ‖∫_0^t g dDX‖` per sample path, together with
/// the variant over all subintervals `[s,t]`.
///
/// `alpha` should come from configs at the scale of the grid (see
/// [`alpha_at_grid`]); then the inequality holds on every path up to rounding.
/// Samples where `∫ g dDX` vanishes along the whole grid are counted as
/// degenerate and skipped.
pub fn verify_uniform_bound(
    fam: &KernelFamily,
    integrands: &[Integrand],
    alpha: f64,
    opts: &PathOptions,
) -> Result<Report<UniformDetail>> {
    check_integrands(fam, integrands)?;
    let per_sample = sample_paths(fam, opts, |_, path| {
        integrands
            .iter()
            .map(|g| {
                let gv = g.values(&path.grid, Some(&path.x))?;
                let run = running(&gv, &path.dx);
                let total = run.last().expect("nonempty grid").norm();
                let sup = run.iter().map(|v| v.norm()).fold(0.0, f64::max);
                let mut sup_interval: f64 = 0.0;
                for a in 0..run.len() {
                    for b in a + 1..run.len() {
                        sup_interval = sup_interval.max((&run[b] - &run[a]).norm());
                    }
                }
                Ok(if sup > 0.0 {
                    Some((total / sup, total / sup_interval))
                } else {
                    None
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let threshold = alpha.max(0.0).sqrt() - 1e-6;
    let mut table = Table::new(&["sample", "integrand", "ratio", "interval_ratio"]);
    let mut summaries: Vec<IntegrandSummary> = integrands
        .iter()
        .map(|g| IntegrandSummary {
            integrand: g.label(),
            min: f64::INFINITY,
            min_interval: f64::INFINITY,
            degenerate: 0,
        })
        .collect();
    let mut worst = (f64::INFINITY, 0, 0);
    let mut worst_interval = f64::INFINITY;
    for (i, row) in per_sample.iter().enumerate() {
        for (k, entry) in row.iter().enumerate() {
            match entry {
                Some((r, ri)) => {
                    table.rows.push(vec![i as f64, k as f64, *r, *ri]);
                    let s = &mut summaries[k];
                    s.min = s.min.min(*r);
                    s.min_interval = s.min_interval.min(*ri);
                    if *r < worst.0 {
                        worst = (*r, i, k);
                    }
                    worst_interval = worst_interval.min(*ri);
                }
                None => summaries[k].degenerate += 1,
            }
        }
    }
    let mut r = Report::new(
        "|int_0^1 g dDX| >= sqrt(alpha) sup_t |int_0^t g dDX|, and the same with sup over [s,t]",
        "uniform-bound",
        UniformDetail {
            alpha,
            threshold,
            informative: alpha > POSITIVE_FLOOR,
            min_interval_ratio: worst_interval,
            per_integrand: summaries,
            grid: opts.grid,
        },
    );
    r.lhs = worst.0;
    r.rhs = alpha.max(0.0).sqrt();
    r.slack = worst.0.min(worst_interval) - r.rhs;
    r.n_samples = opts.n_samples;
    r.witness = Some(Witness::Sample {
        index: worst.1,
        integrand: Some(integrands[worst.2].label()),
        t: None,
    });
    r.pass = worst.0 >= threshold && worst_interval >= threshold;
    r.table = Some(table);
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonvanishingSummary {
    pub integrand: String,
    pub deterministic: bool,
    /// Samples with `sup|g| > ZERO_FLOOR` on the grid.
    pub nonzero_g: usize,
    pub min: f64,
    pub fractions_below: std::collections::BTreeMap<String, f64>,
    pub below_smallest: Proportion,
    /// For deterministic `g`: `all`, `none` or `mixed`, according to how many
    /// samples give an integral that is exactly zero.
    pub zero_one: Option<&'static str>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonvanishingDetail {
    pub per_integrand: Vec<NonvanishingSummary>,
    pub grid: usize,
}

/// Empirical law of `‖∫_0^1 g dDX‖` on samples where `g ≢ 0`: the mass below
/// each tolerance must vanish at the smallest one. An integrand that vanishes
/// on every sample must give an integral that is exactly zero on every sample.
pub fn verify_nonvanishing(
    fam: &KernelFamily,
    integrands: &[Integrand],
    opts: &PathOptions,
) -> Result<Report<NonvanishingDetail>> {
    check_integrands(fam, integrands)?;
    let per_sample = sample_paths(fam, opts, |_, path| {
        integrands
            .iter()
            .map(|g| {
                let gv = g.values(&path.grid, Some(&path.x))?;
                let run = running(&gv, &path.dx);
                Ok((sup_abs(&gv) > ZERO_FLOOR, run.last().expect("nonempty grid").norm()))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let smallest = *TOLERANCES.last().expect("nonempty ladder");
    let mut table = Table::new(&["sample", "integrand", "g_nonzero", "norm"]);
    for (i, row) in per_sample.iter().enumerate() {
        for (k, &(nz, v)) in row.iter().enumerate() {
            table.rows.push(vec![i as f64, k as f64, nz as u8 as f64, v]);
        }
    }
    let mut pooled = Vec::new();
    let mut worst = (f64::INFINITY, 0, 0);
    let mut summaries = Vec::with_capacity(integrands.len());
    for (k, g) in integrands.iter().enumerate() {
        let values: Vec<f64> = per_sample.iter().filter(|r| r[k].0).map(|r| r[k].1).collect();
        for (i, row) in per_sample.iter().enumerate() {
            if row[k].0 && row[k].1 < worst.0 {
                worst = (row[k].1, i, k);
            }
        }
        let exact_zeros = per_sample.iter().filter(|r| r[k].1 == 0.0).count();
        let zero_one = g.is_deterministic().then_some(match exact_zeros {
            0 => "none",
            z if z == per_sample.len() => "all",
            _ => "mixed",
        });
        let hits = values.iter().filter(|&&v| v < smallest).count();
        let pass = if values.is_empty() {
            exact_zeros == per_sample.len()
        } else {
            hits == 0 && zero_one != Some("mixed")
        };
        pooled.extend_from_slice(&values);
        summaries.push(NonvanishingSummary {
            integrand: g.label(),
            deterministic: g.is_deterministic(),
            nonzero_g: values.len(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            fractions_below: fractions_below(&values),
            below_smallest: Proportion::new(hits, values.len()),
            zero_one,
            pass,
        });
    }
    let pass = summaries.iter().all(|s| s.pass);
    let mut r = Report::new(
        "P(int_0^1 g dDX = 0, g != 0) = 0; for deterministic g, P(int_0^1 g dDX = 0) is 0 or 1",
        "non-vanishing",
        NonvanishingDetail {
            per_integrand: summaries,
            grid: opts.grid,
        },
    );
    r.lhs = worst.0;
    r.rhs = smallest;
    r.slack = worst.0 - smallest;
    r.n_samples = opts.n_samples;
    r.fractions_below = fractions_below(&pooled);
    if worst.0.is_finite() {
        r.witness = Some(Witness::Sample {
            index: worst.1,
            integrand: Some(integrands[worst.2].label()),
            t: None,
        });
    }
    r.pass = pass;
    r.table = Some(table);
    Ok(r)
}

/// Relative distance of `DX_t` from `F_t`; `None` when `DX_t = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DxInF {
    pub t: f64,
    pub residual: Option<f64>,
}

fn relative_residual(v: &DVector<f64>, basis: &DMatrix<f64>) -> f64 {
    let proj = basis * (basis.transpose() * v);
    (v - proj).norm() / v.norm()
}

/// `‖DX_t − P_{F_t} DX_t‖ / ‖DX_t‖` with `F_t` the span of the pairings of
/// `f_t`.
pub fn check_dx_in_f(fam: &KernelFamily, t: f64, z: &GaussianSample) -> Result<DxInF> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("need t > 0, got {t}")));
    }
    let dx = ChaosVariable::new(fam.at(t)?).gradient(z)?;
    if dx.norm() == 0.0 {
        return Ok(DxInF { t, residual: None });
    }
    let f = chaos_subspace(fam, 0.0, t, DEFAULT_RANK_TOL)?;
    Ok(DxInF {
        t,
        residual: Some(relative_residual(&dx, f.matrix())),
    })
}

/// Negative control: the largest residual of `DX_t` against the span of the
/// pairings of `f_t` with one column of the unfolding removed.
pub fn truncated_residual(fam: &KernelFamily, t: f64, z: &GaussianSample) -> Result<f64> {
    let f = fam.at(t)?;
    let dx = ChaosVariable::new(f.clone()).gradient(z)?;
    if dx.norm() == 0.0 {
        return Ok(0.0);
    }
    let unfolded = f.unfold();
    let mut worst: f64 = 0.0;
    for c in 0..unfolded.ncols() {
        if unfolded.column(c).norm() == 0.0 {
            continue;
        }
        let kept = unfolded.clone().remove_column(c);
        let basis = orthonormal_range(&kept, DEFAULT_RANK_TOL);
        worst = worst.max(relative_residual(&dx, basis.matrix()));
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DxInFDetail {
    pub tolerance: f64,
    pub degenerate: usize,
    pub max_residual: f64,
    pub controls: usize,
    /// Smallest residual after dropping one unfolding column.
    pub control_min: f64,
    pub control_detected: bool,
}

const DX_TIME_TAG: u64 = 0xd1f;

/// [`check_dx_in_f`] on `n_samples` random `(t, Z)` with `t` uniform on
/// `(0, 1]`, plus the truncated-basis control on the first `controls` of them.
pub fn verify_dx_in_f(fam: &KernelFamily, opts: &PathOptions, controls: usize) -> Result<Report<DxInFDetail>> {
    const TOL: f64 = 1e-8;
    if opts.n_samples == 0 {
        return Err(Error::TooFewSamples { got: 0, needed: 1 });
    }
    let time_seed = derive_seed(opts.seed, DX_TIME_TAG);
    let d = fam.dim();
    let controls = controls.min(opts.n_samples);
    let rows = par_map(opts.n_samples, |i| -> Result<(DxInF, Option<f64>)> {
        let t = 1.0 - stream_rng(time_seed, i as u64).random::<f64>();
        let z = GaussianSample::draw(d, opts.seed, i as u64);
        let r = check_dx_in_f(fam, t, &z)?;
        let control = if i < controls {
            Some(truncated_residual(fam, t, &z)?)
        } else {
            None
        };
        Ok((r, control))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(&["sample", "t", "residual", "truncated_residual"]);
    let mut worst = (0.0f64, 0usize, 0.0f64);
    let mut degenerate = 0;
    let mut control_min = f64::INFINITY;
    for (i, (r, c)) in rows.iter().enumerate() {
        let res = r.residual.unwrap_or(f64::NAN);
        table.rows.push(vec![i as f64, r.t, res, c.unwrap_or(f64::NAN)]);
        match r.residual {
            Some(v) if v > worst.0 => worst = (v, i, r.t),
            Some(_) => {}
            None => degenerate += 1,
        }
        if let Some(c) = c {
            control_min = control_min.min(*c);
        }
    }
    let control_detected = controls > 0 && control_min > TOL;
    let mut r = Report::new(
        "DX_t lies in F_t, the span of the pairings of f_t",
        "derivative-in-subspace",
        DxInFDetail {
            tolerance: TOL,
            degenerate,
            max_residual: worst.0,
            controls,
            control_min,
            control_detected,
        },
    );
    r.lhs = worst.0;
    r.rhs = TOL;
    r.slack = TOL - worst.0;
    r.n_samples = opts.n_samples;
    r.witness = Some(Witness::Sample {
        index: worst.1,
        integrand: None,
        t: Some(worst.2),
    });
    r.pass = worst.0 <= TOL && (controls == 0 || control_detected);
    r.table = Some(table);
    Ok(r)
}
