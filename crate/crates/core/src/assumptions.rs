//! Numerical checks of the kernel conditions: Hölder regularity of `t ↦ f_t`,
//! the subspace non-determinism constant α, its kernel-level analogue β, and
//! non-negativity of nested increment inner products.
//!
//! α and β are infima over all partitions of `[0,1]`; here they are minima
//! over a finite sample of partitions, which only bounds them from above.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{uniform_grid, KernelFamily};
use crate::stats::{par_map, stream_rng};
use crate::tensor::{orthonormal_range, residual_ratio, MultiIndex, SubspaceBasis, SymTensor, DEFAULT_RANK_TOL};

/// Strict inequalities in the assumptions are tested as `≥ floor`.
pub const POSITIVE_FLOOR: f64 = 1e-12;
pub const ROW_SUM_FLOOR: f64 = -1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityFit {
    pub theta: f64,
    pub c: f64,
    pub min_norm: f64,
    /// Pair `(s, t)` attaining `min_norm`.
    pub witness: (f64, f64),
    pub pairs: usize,
    pub max_lag: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Least-squares fit of `log‖f_t − f_s‖ = log C + (θ/2) log|t−s|` over grid
/// pairs with `|t−s| ≤ max_lag`. Hölder exponents are a small-scale property,
/// and long lags straddling a kink pull the slope down.
///
/// `min_norm` is taken over all pairs. Pairs with a vanishing increment are
/// left out of the fit and make the check fail.
pub fn check_regularity(
    fam: &KernelFamily,
    grid: &[f64],
    max_lag: f64,
    margin: f64,
) -> Result<RegularityFit> {
    if grid.len() < 9 {
        return Err(Error::InvalidArgument(format!(
            "regularity grid needs at least 9 points, got {}",
            grid.len()
        )));
    }
    let kernels = grid.iter().map(|&t| fam.at(t)).collect::<Result<Vec<_>>>()?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut min_norm = f64::INFINITY;
    let mut witness = (grid[0], grid[1]);
    for i in 0..grid.len() {
        for j in i + 1..grid.len() {
            let norm = kernels[j].sub(&kernels[i])?.norm();
            if norm < min_norm {
                min_norm = norm;
                witness = (grid[i], grid[j]);
            }
            if norm > 0.0 && grid[j] - grid[i] <= max_lag * (1.0 + 1e-12) {
                xs.push((grid[j] - grid[i]).ln());
                ys.push(norm.ln());
            }
        }
    }
    let (slope, intercept) = least_squares(&xs, &ys);
    let theta = 2.0 * slope;
    Ok(RegularityFit {
        theta,
        c: intercept.exp(),
        min_norm,
        witness,
        pairs: xs.len(),
        max_lag,
        margin,
        pass: theta > 1.0 + margin && min_norm > 0.0,
    })
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// `F_{s,t}`: span of all `(n−1)`-fold pairings of `f_t − f_s`.
pub fn chaos_subspace(fam: &KernelFamily, s: f64, t: f64, tol: f64) -> Result<SubspaceBasis> {
    if !(s < t) {
        return Err(Error::InvalidArgument(format!("need s < t, got [{s}, {t}]")));
    }
    Ok(orthonormal_range(&fam.increment(s, t)?.unfold(), tol))
}

/// Inner points `t_1 < … < t_m` with conditioning points to their left and
/// right.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionConfig {
    pub left: Vec<f64>,
    pub inner: Vec<f64>,
    pub right: Vec<f64>,
}

impl PartitionConfig {
    pub fn new(left: Vec<f64>, inner: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        let ok = inner.len() >= 2
            && [&left, &inner, &right].iter().all(|v| v.windows(2).all(|w| w[0] < w[1]))
            && left.last().map_or(true, |&s| s < inner[0])
            && right.first().map_or(true, |&r| r > inner[inner.len() - 1])
            && left.first().map_or(true, |&s| s >= 0.0)
            && right.last().map_or(true, |&r| r <= 1.0)
            && inner[0] >= 0.0
            && inner[inner.len() - 1] <= 1.0;
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "invalid partition config: left {left:?}, inner {inner:?}, right {right:?}"
            )));
        }
        Ok(PartitionConfig { left, inner, right })
    }

    pub fn inner_intervals(&self) -> Vec<(f64, f64)> {
        self.inner.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// `[0,s_1], …, [s_k,t_1]` and `[t_m,r_1], …, [r_{l−1},r_l]`, without
    /// zero-length intervals.
    pub fn conditioning_intervals(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        if !self.left.is_empty() {
            let mut pts = vec![0.0];
            pts.extend(&self.left);
            pts.push(self.inner[0]);
            out.extend(pts.windows(2).map(|w| (w[0], w[1])));
        }
        if !self.right.is_empty() {
            let mut pts = vec![self.inner[self.inner.len() - 1]];
            pts.extend(&self.right);
            out.extend(pts.windows(2).map(|w| (w[0], w[1])));
        }
        out.retain(|(a, b)| b > a);
        out
    }
}

/// Every config whose points lie on the grid `k/2^depth`: inner points are all
/// grid points of some `[a, b]`, left and right points are all grid points
/// outside it.
pub fn dyadic_configs(depth: u32) -> Vec<PartitionConfig> {
    let grid = uniform_grid(1 << depth);
    let mut out = Vec::new();
    for a in 0..grid.len() {
        for b in a + 1..grid.len() {
            out.push(PartitionConfig {
                left: grid[..a].to_vec(),
                inner: grid[a..=b].to_vec(),
                right: grid[b + 1..].to_vec(),
            });
        }
    }
    out
}

/// `count` configs with `2..=5` inner points and up to 3 points on each side,
/// drawn without replacement from the grid `k/2^depth`.
pub fn random_configs(count: usize, depth: u32, seed: u64) -> Vec<PartitionConfig> {
    let grid = uniform_grid(1 << depth);
    (0..count)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let m = rng.random_range(2..=5usize);
            let k = rng.random_range(0..=3usize);
            let l = rng.random_range(0..=3usize);
            let total = (m + k + l).min(grid.len());
            let m = m.min(total);
            let mut idx = sample_indices(&mut rng, grid.len(), total).into_vec();
            idx.sort_unstable();
            let pts: Vec<f64> = idx.iter().map(|&j| grid[j]).collect();
            let k = k.min(total - m);
            PartitionConfig {
                left: pts[..k].to_vec(),
                inner: pts[k..k + m].to_vec(),
                right: pts[k + m..].to_vec(),
            }
        })
        .collect()
}

/// Options for sampling configs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigSampler {
    /// Exhaustive dyadic configs at depths `1..=depth`.
    pub depth: u32,
    pub random: usize,
    /// Depth of the grid random configs are drawn from.
    pub random_depth: u32,
    pub seed: u64,
}

impl ConfigSampler {
    /// Random configs live two levels below the exhaustive ones, but never
    /// below the resolution of the family.
    pub fn for_family(fam: &KernelFamily, depth: u32, random: usize, seed: u64) -> Self {
        let fine = depth + 2;
        let random_depth = fam.resolution_depth().map_or(fine, |r| fine.min(r.max(depth)));
        ConfigSampler {
            depth,
            random,
            random_depth,
            seed,
        }
    }

    /// Configs tagged with their dyadic depth (`None` for random ones).
    pub fn configs(&self) -> Vec<(Option<u32>, PartitionConfig)> {
        let mut out: Vec<(Option<u32>, PartitionConfig)> = Vec::new();
        for j in 1..=self.depth {
            out.extend(dyadic_configs(j).into_iter().map(|c| (Some(j), c)));
        }
        out.extend(
            random_configs(self.random, self.random_depth, self.seed)
                .into_iter()
                .map(|c| (None, c)),
        );
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DepthValue {
    pub depth: u32,
    pub value: f64,
}

/// Minimum residual over a config sample, with the config attaining it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonDeterminism {
    pub value: f64,
    pub witness: Option<PartitionConfig>,
    pub per_depth: Vec<DepthValue>,
    pub configs: usize,
    pub skipped: usize,
    pub pass: bool,
}

fn key(s: f64, t: f64) -> (u64, u64) {
    (s.to_bits(), t.to_bits())
}

fn unique_intervals<'a, I>(configs: I) -> Vec<(f64, f64)>
where
    I: IntoIterator<Item = &'a PartitionConfig>,
{
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for c in configs {
        for iv in c.inner_intervals().into_iter().chain(c.conditioning_intervals()) {
            if iv.1 > iv.0 && seen.insert(key(iv.0, iv.1), ()).is_none() {
                out.push(iv);
            }
        }
    }
    out
}

fn join_columns(ambient: usize, blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let total = blocks.iter().map(|b| b.ncols()).sum();
    let mut m = DMatrix::zeros(ambient, total);
    let mut at = 0;
    for b in blocks {
        m.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    m
}

// Ordered reduction: the first config attaining the minimum wins.
fn reduce(
    tagged: &[(Option<u32>, PartitionConfig)],
    values: Vec<Option<f64>>,
    depth: u32,
) -> NonDeterminism {
    let mut best: Option<(f64, usize)> = None;
    let mut per_depth: Vec<DepthValue> = (1..=depth)
        .map(|d| DepthValue {
            depth: d,
            value: 1.0,
        })
        .collect();
    let mut skipped = 0;
    for (i, v) in values.iter().enumerate() {
        let Some(v) = *v else {
            skipped += 1;
            continue;
        };
        if best.map_or(true, |(b, _)| v < b) {
            best = Some((v, i));
        }
        if let Some(d) = tagged[i].0 {
            let slot = &mut per_depth[d as usize - 1];
            slot.value = slot.value.min(v);
        }
    }
    let (value, witness) = match best {
        Some((v, i)) => (v, Some(tagged[i].1.clone())),
        None => (1.0, None),
    };
    NonDeterminism {
        value,
        witness,
        per_depth,
        configs: values.len(),
        skipped,
        pass: value >= POSITIVE_FLOOR,
    }
}

fn alpha_from(
    fam: &KernelFamily,
    config: &PartitionConfig,
    spaces: &HashMap<(u64, u64), SubspaceBasis>,
    tol: f64,
) -> Result<Option<f64>> {
    let pick = |ivs: Vec<(f64, f64)>| -> Vec<&DMatrix<f64>> {
        ivs.into_iter()
            .filter_map(|(s, t)| spaces.get(&key(s, t)))
            .map(|b| b.matrix())
            .collect()
    };
    let u = orthonormal_range(&join_columns(fam.dim(), &pick(config.inner_intervals())), tol);
    if u.rank() == 0 {
        return Ok(None);
    }
    let s = orthonormal_range(
        &join_columns(fam.dim(), &pick(config.conditioning_intervals())),
        tol,
    );
    residual_ratio(&u, &s).map(Some)
}

/// α for a single config, `None` if the inner increments vanish.
pub fn alpha_for_config(fam: &KernelFamily, config: &PartitionConfig, tol: f64) -> Result<Option<f64>> {
    let spaces = interval_subspaces(fam, &unique_intervals([config]), tol)?;
    alpha_from(fam, config, &spaces, tol)
}

fn interval_subspaces(
    fam: &KernelFamily,
    intervals: &[(f64, f64)],
    tol: f64,
) -> Result<HashMap<(u64, u64), SubspaceBasis>> {
    let bases = par_map(intervals.len(), |i| {
        chaos_subspace(fam, intervals[i].0, intervals[i].1, tol)
    });
    intervals
        .iter()
        .zip(bases)
        .map(|(&(s, t), b)| Ok((key(s, t), b?)))
        .collect()
}

/// `min over configs of residual_ratio(Σ F_{t_i,t_{i+1}}, Σ conditioning F)`.
pub fn estimate_alpha(
    fam: &KernelFamily,
    configs: &[(Option<u32>, PartitionConfig)],
    tol: f64,
) -> Result<NonDeterminism> {
    let spaces = interval_subspaces(fam, &unique_intervals(configs.iter().map(|c| &c.1)), tol)?;
    let values = par_map(configs.len(), |i| alpha_from(fam, &configs[i].1, &spaces, tol));
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(reduce(configs, values, max_depth(configs)))
}

fn max_depth(configs: &[(Option<u32>, PartitionConfig)]) -> u32 {
    configs.iter().filter_map(|c| c.0).max().unwrap_or(0)
}

fn beta_from(
    config: &PartitionConfig,
    increments: &HashMap<(u64, u64), SymTensor>,
    tol: f64,
) -> Result<Option<f64>> {
    let pick = |ivs: Vec<(f64, f64)>| -> Vec<&SymTensor> {
        ivs.into_iter()
            .filter_map(|(s, t)| increments.get(&key(s, t)))
            .collect()
    };
    let inner = pick(config.inner_intervals());
    let cond = pick(config.conditioning_intervals());
    // Coordinates on the joint support preserve all inner products involved.
    let mut support: Vec<MultiIndex> = inner
        .iter()
        .chain(&cond)
        .flat_map(|f| f.iter().map(|(k, _)| k.clone()))
        .collect();
    support.sort();
    support.dedup();
    let columns = |fs: &[&SymTensor]| {
        let mut m = DMatrix::zeros(support.len(), fs.len());
        for (j, f) in fs.iter().enumerate() {
            let v = f.coords_on(&support);
            let n = v.norm();
            if n > 0.0 {
                m.set_column(j, &(v / n));
            }
        }
        m
    };
    let u = orthonormal_range(&columns(&inner), tol);
    if u.rank() == 0 {
        return Ok(None);
    }
    let s = orthonormal_range(&columns(&cond), tol);
    residual_ratio(&u, &s).map(Some)
}

fn interval_increments(
    fam: &KernelFamily,
    intervals: &[(f64, f64)],
) -> Result<HashMap<(u64, u64), SymTensor>> {
    let incs = par_map(intervals.len(), |i| fam.increment(intervals[i].0, intervals[i].1));
    intervals
        .iter()
        .zip(incs)
        .map(|(&(s, t), f)| Ok((key(s, t), f?)))
        .collect()
}

/// β for a single config, `None` if the inner increments vanish.
pub fn beta_for_config(fam: &KernelFamily, config: &PartitionConfig, tol: f64) -> Result<Option<f64>> {
    let incs = interval_increments(fam, &unique_intervals([config]))?;
    beta_from(config, &incs, tol)
}

/// Same as [`estimate_alpha`] with kernel increments in `H^⊗n` in place of the
/// subspaces `F_{s,t}`.
pub fn estimate_beta(
    fam: &KernelFamily,
    configs: &[(Option<u32>, PartitionConfig)],
    tol: f64,
) -> Result<NonDeterminism> {
    let incs = interval_increments(fam, &unique_intervals(configs.iter().map(|c| &c.1)))?;
    let values = par_map(configs.len(), |i| beta_from(&configs[i].1, &incs, tol));
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(reduce(configs, values, max_depth(configs)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowSums {
    pub min: f64,
    /// `(u, v, s, t)` with `[u,v] ⊂ [s,t]`.
    pub witness: (f64, f64, f64, f64),
    pub pass: bool,
}

/// `min ⟨f_v − f_u, f_t − f_s⟩` over grid points `s ≤ u < v ≤ t`.
pub fn check_row_sums(fam: &KernelFamily, grid: &[f64]) -> Result<RowSums> {
    if grid.len() < 3 {
        return Err(Error::InvalidArgument("row-sum grid needs at least 3 points".into()));
    }
    let kernels = grid.iter().map(|&t| fam.at(t)).collect::<Result<Vec<_>>>()?;
    let g = grid.len();
    let mut gram = DMatrix::zeros(g, g);
    for i in 0..g {
        for j in i..g {
            let v = kernels[i].inner(&kernels[j])?;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let mut min = f64::INFINITY;
    let mut witness = (grid[0], grid[1], grid[0], grid[1]);
    for s in 0..g {
        for t in s + 1..g {
            for u in s..t {
                for v in u + 1..=t {
                    let x = gram[(v, t)] - gram[(v, s)] - gram[(u, t)] + gram[(u, s)];
                    if x < min {
                        min = x;
                        witness = (grid[u], grid[v], grid[s], grid[t]);
                    }
                }
            }
        }
    }
    Ok(RowSums {
        min,
        witness,
        pass: min >= ROW_SUM_FLOOR,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOptions {
    pub regularity_points: usize,
    pub max_lag: f64,
    pub row_sum_points: usize,
    pub margin: f64,
    pub rank_tol: f64,
    pub sampler: ConfigSampler,
}

impl CheckOptions {
    pub fn for_family(fam: &KernelFamily, seed: u64) -> Self {
        CheckOptions {
            regularity_points: 33,
            max_lag: 0.25,
            row_sum_points: 33,
            margin: 0.05,
            rank_tol: DEFAULT_RANK_TOL,
            sampler: ConfigSampler::for_family(fam, 4, 200, seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Section<T: Serialize> {
    pub claim: &'static str,
    pub tag: &'static str,
    #[serde(flatten)]
    pub result: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub family: String,
    pub order: usize,
    pub dim: usize,
    pub claimed_theta: f64,
    pub regularity: Section<RegularityFit>,
    pub alpha: Section<NonDeterminism>,
    pub beta: Section<NonDeterminism>,
    pub row_sums: Section<RowSums>,
    pub options: CheckOptions,
    pub note: &'static str,
    pub pass: bool,
}

pub fn check_all(fam: &KernelFamily, opts: &CheckOptions) -> Result<AssumptionReport> {
    let regularity = check_regularity(
        fam,
        &uniform_grid(opts.regularity_points - 1),
        opts.max_lag,
        opts.margin,
    )?;
    let configs = opts.sampler.configs();
    let alpha = estimate_alpha(fam, &configs, opts.rank_tol)?;
    let beta = estimate_beta(fam, &configs, opts.rank_tol)?;
    let row_sums = check_row_sums(fam, &uniform_grid(opts.row_sum_points - 1))?;
    let pass = regularity.pass && alpha.pass && beta.pass && row_sums.pass;
    Ok(AssumptionReport {
        family: fam.name().to_string(),
        order: fam.order(),
        dim: fam.dim(),
        claimed_theta: fam.theta(),
        regularity: Section {
            claim: "0 < |f_t - f_s| <= C |t-s|^(theta/2) with theta > 1",
            tag: "regularity",
            result: regularity,
        },
        alpha: Section {
            claim: "inner increment subspaces keep a fraction alpha > 0 outside the conditioning span",
            tag: "subspace-non-determinism",
            result: alpha,
        },
        beta: Section {
            claim: "inner kernel increments keep a fraction beta > 0 outside the conditioning span",
            tag: "kernel-non-determinism",
            result: beta,
        },
        row_sums: Section {
            claim: "<f_v - f_u, f_t - f_s> >= 0 for nested intervals",
            tag: "non-negative-row-sums",
            result: row_sums,
        },
        options: opts.clone(),
        note: "alpha and beta are minima over a finite sample of partitions: upper bounds on the true constants, not certificates",
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_intervals() {
        let c = PartitionConfig::new(vec![0.1, 0.2], vec![0.3, 0.5, 0.6], vec![0.9]).unwrap();
        assert_eq!(c.inner_intervals(), vec![(0.3, 0.5), (0.5, 0.6)]);
        assert_eq!(
            c.conditioning_intervals(),
            vec![(0.0, 0.1), (0.1, 0.2), (0.2, 0.3), (0.6, 0.9)]
        );
        assert!(PartitionConfig::new(vec![], vec![0.3], vec![]).is_err());
        assert!(PartitionConfig::new(vec![0.4], vec![0.3, 0.5], vec![]).is_err());
    }

    #[test]
    fn dyadic_config_counts() {
        assert_eq!(dyadic_configs(1).len(), 3);
        assert_eq!(dyadic_configs(2).len(), 10);
        let c = &dyadic_configs(2)[1];
        assert_eq!(c.inner, vec![0.0, 0.25, 0.5]);
        assert_eq!(c.right, vec![0.75, 1.0]);
    }

    #[test]
    fn random_configs_are_valid_and_reproducible() {
        let a = random_configs(50, 5, 9);
        assert_eq!(a, random_configs(50, 5, 9));
        for c in &a {
            PartitionConfig::new(c.left.clone(), c.inner.clone(), c.right.clone()).unwrap();
            assert!(c.left.len() <= 3 && c.right.len() <= 3 && (2..=5).contains(&c.inner.len()));
        }
    }

    #[test]
    fn blk2_subspace_and_alpha() {
        let f = KernelFamily::blk2();
        let b = chaos_subspace(&f, 0.1, 0.4, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(b.rank(), 1);
        assert!((b.matrix()[(0, 0)].abs() - 1.0).abs() < 1e-15);
        let c = PartitionConfig::new(vec![0.1], vec![0.2, 0.3, 0.4], vec![]).unwrap();
        assert_eq!(alpha_for_config(&f, &c, DEFAULT_RANK_TOL).unwrap(), Some(0.0));
        let free = PartitionConfig::new(vec![], vec![0.2, 0.3], vec![]).unwrap();
        assert_eq!(alpha_for_config(&f, &free, DEFAULT_RANK_TOL).unwrap(), Some(1.0));
    }

    #[test]
    fn blk2_fits() {
        let f = KernelFamily::blk2();
        let fit = check_regularity(&f, &uniform_grid(32), 0.25, 0.05).unwrap();
        assert!((fit.theta - 2.0).abs() < 0.1, "{fit:?}");
        // nested increments of BLK2 share a nonnegative component, so the
        // minimum is the smallest squared increment, (1/8)²
        let rows = check_row_sums(&f, &uniform_grid(8)).unwrap();
        assert!((rows.min - 1.0 / 64.0).abs() < 1e-15 && rows.pass, "{rows:?}");
    }

    #[test]
    fn least_squares_line() {
        let (a, b) = least_squares(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((a - 2.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
    }
}
