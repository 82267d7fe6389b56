use nalgebra::DVector;
use serde::Serialize;

use super::integrand::{holder_seminorm, holder_seminorm_vec, sup_abs};
use super::{Report, Witness};
use crate::error::{Error, Result};
use crate::stats::par_map;
use crate::young::running_integral;

/// `ζ(s) = Σ k^{-s}` for `s > 1`, by a partial sum with an Euler–Maclaurin
/// tail.
pub fn riemann_zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta needs s > 1");
    const K: usize = 1000;
    let head: f64 = (1..K).map(|k| (k as f64).powf(-s)).sum();
    let k = K as f64;
    head + k.powf(1.0 - s) / (s - 1.0) + 0.5 * k.powf(-s) + s * k.powf(-s - 1.0) / 12.0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NorrisOptions {
    pub nu: f64,
    /// Window sizes, decreasing.
    pub epsilons: Vec<f64>,
    /// Hölder exponent of the integrand.
    pub tau: f64,
    /// Hölder exponent of the derivative path.
    pub rho: f64,
}

impl NorrisOptions {
    /// `ε = 2^{-1}, …, 2^{-8}`.
    pub fn new(nu: f64, tau: f64, rho: f64) -> Self {
        NorrisOptions {
            nu,
            epsilons: (1..=8).map(|k| 2f64.powi(-k)).collect(),
            tau,
            rho,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleValue {
    pub epsilon: f64,
    /// `min_s max_{0<|t−s|<ε} ‖DX_t − DX_s‖ / ε^ν`.
    pub roughness: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NorrisDetail {
    pub nu: f64,
    pub roughness: f64,
    pub roughness_detected: bool,
    pub per_scale: Vec<ScaleValue>,
    pub sup_integral: f64,
    pub holder_g: f64,
    pub holder_dx: f64,
    pub young_constant: f64,
    pub heuristic: &'static str,
    pub note: Option<&'static str>,
}

/// Bounds `sup|g|` through the size of `∫ g dDX` and the roughness of `DX`.
///
/// For each `ε` and each grid point `s` there is `t` with `|t−s| < ε` and
/// `‖DX_t − DX_s‖ ≥ L(ε) ε^ν`. Writing `∫_s^t g dDX = g_s (DX_t − DX_s) + R`
/// with the discrete Young remainder `|R| ≤ C ‖g‖_τ ‖DX‖_ρ |t−s|^{τ+ρ}`,
/// `C = 2^{τ+ρ} ζ(τ+ρ)`, and allowing one more such term when `t < s`, gives
/// `sup|g| ≤ (2 sup_t‖∫_0^t‖ ε^{-ν} + (C+1) ‖g‖_τ ‖DX‖_ρ ε^{τ+ρ−ν}) / L(ε)`.
/// The report takes the smallest bound over the `ε` given.
pub fn norris_check(
    dx: &[DVector<f64>],
    grid: &[f64],
    g: &[f64],
    opts: &NorrisOptions,
) -> Result<Report<NorrisDetail>> {
    if !(opts.nu > 0.0 && opts.nu < 1.0) {
        return Err(Error::InvalidArgument(format!("nu must lie in (0, 1), got {}", opts.nu)));
    }
    if opts.epsilons.is_empty()
        || opts.epsilons.iter().any(|&e| !(e > 0.0))
        || opts.epsilons.windows(2).any(|w| !(w[1] < w[0]))
    {
        return Err(Error::InvalidArgument("epsilons must be positive and decreasing".into()));
    }
    if dx.len() != grid.len() || g.len() != grid.len() || grid.len() < 2 {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: dx.len().min(g.len()),
        });
    }
    let theta = opts.tau + opts.rho;
    if !(theta > 1.0) {
        return Err(Error::OutsideYoungRegime(theta));
    }
    let young_constant = 2f64.powf(theta) * riemann_zeta(theta);
    let run = running_integral(g, dx)?;
    let sup_integral = run.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let holder_g = holder_seminorm(g, grid, opts.tau);
    let holder_dx = holder_seminorm_vec(dx, grid, opts.rho);
    let sup_g = sup_abs(g);

    let len = grid.len();
    let per_scale: Vec<ScaleValue> = opts
        .epsilons
        .iter()
        .map(|&eps| {
            let window_max = par_map(len, |s| {
                let mut best: f64 = 0.0;
                let lo = grid.partition_point(|&t| t <= grid[s] - eps);
                for t in lo..len {
                    if grid[t] - grid[s] >= eps {
                        break;
                    }
                    if t != s {
                        best = best.max((&dx[t] - &dx[s]).norm());
                    }
                }
                best
            });
            let roughness = window_max.into_iter().fold(f64::INFINITY, f64::min) / eps.powf(opts.nu);
            let bound = if roughness > 0.0 {
                (2.0 * sup_integral * eps.powf(-opts.nu)
                    + (young_constant + 1.0) * holder_g * holder_dx * eps.powf(theta - opts.nu))
                    / roughness
            } else {
                f64::INFINITY
            };
            ScaleValue {
                epsilon: eps,
                roughness,
                bound,
            }
        })
        .collect();

    let roughness = per_scale.iter().map(|v| v.roughness).fold(f64::INFINITY, f64::min);
    let best = per_scale
        .iter()
        .fold(&per_scale[0], |b, v| if v.bound < b.bound { v } else { b });
    let detected = roughness > 0.0;
    let rhs = best.bound;
    let mut r = Report::new(
        "sup|g| <= (2 sup_t |int_0^t g dDX| eps^-nu + (C+1) |g|_tau |DX|_rho eps^(tau+rho-nu)) / L_nu(eps)",
        "norris-bound",
        NorrisDetail {
            nu: opts.nu,
            roughness,
            roughness_detected: detected,
            per_scale: per_scale.clone(),
            sup_integral,
            holder_g,
            holder_dx,
            young_constant,
            heuristic: "grid estimate of a pathwise roughness constant",
            note: (!detected).then_some("no roughness detected at this resolution"),
        },
    );
    r.lhs = sup_g;
    r.rhs = rhs;
    r.slack = rhs - sup_g;
    r.n_samples = 1;
    r.witness = Some(Witness::Pair {
        s: 0.0,
        t: best.epsilon,
    });
    r.pass = sup_g <= rhs;
    Ok(r)
}
