use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::par_map;

pub const MIN_SAMPLES: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityOptions {
    /// Extra KDE bandwidths evaluated next to Silverman's.
    pub bandwidths: Vec<f64>,
    /// Atom-test half-widths, decreasing; derived from the sample when empty.
    pub deltas: Vec<f64>,
    /// Largest allowed growth of the concentration between consecutive levels.
    pub factor: f64,
    /// Points of the KDE evaluation grid.
    pub kde_points: usize,
}

impl Default for DensityOptions {
    fn default() -> Self {
        DensityOptions {
            bandwidths: Vec::new(),
            deltas: Vec::new(),
            factor: 4.0,
            kde_points: 512,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KdePeak {
    pub bandwidth: f64,
    pub peak: f64,
    pub at: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtomLevel {
    pub delta: f64,
    /// `max_c #{|x − c| ≤ δ} / (2Nδ)`.
    pub concentration: f64,
    /// Against the previous level, or against the KDE peak for the first one.
    pub ratio: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityReport {
    pub n_samples: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub silverman_bandwidth: f64,
    pub kde: Vec<KdePeak>,
    pub atoms: Vec<AtomLevel>,
    pub ties: usize,
    pub factor: f64,
    pub pass: bool,
    /// Silverman KDE on its evaluation grid, for plotting.
    #[serde(skip)]
    pub curve: Vec<(f64, f64)>,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn kde(sorted: &[f64], h: f64, points: usize) -> Vec<(f64, f64)> {
    let lo = sorted[0] - 3.0 * h;
    let hi = sorted[sorted.len() - 1] + 3.0 * h;
    let n = sorted.len() as f64;
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    let step = (hi - lo) / (points - 1) as f64;
    par_map(points, |k| {
        let x = lo + k as f64 * step;
        let from = sorted.partition_point(|&v| v < x - 8.0 * h);
        let to = sorted.partition_point(|&v| v <= x + 8.0 * h);
        let s: f64 = sorted[from..to]
            .iter()
            .map(|&v| {
                let u = (x - v) / h;
                (-0.5 * u * u).exp()
            })
            .sum();
        (x, s * norm)
    })
}

fn peak(curve: &[(f64, f64)], h: f64) -> KdePeak {
    let (at, peak) = curve
        .iter()
        .copied()
        .fold((f64::NAN, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    KdePeak { bandwidth: h, peak, at }
}

/// `max_c #{|x − c| ≤ δ}` by a sliding window over sorted samples.
fn max_window(sorted: &[f64], delta: f64) -> usize {
    let mut best = 0;
    let mut j = 0;
    for i in 0..sorted.len() {
        if j < i {
            j = i;
        }
        while j < sorted.len() && sorted[j] <= sorted[i] + 2.0 * delta {
            j += 1;
        }
        best = best.max(j - i);
    }
    best
}

/// `δ_k = 0.1 σ 10^{-k}`, kept while about `0.08 N 10^{-k} ≥ 8` samples are
/// expected per window near the mode, with at least two levels.
fn default_deltas(n: usize, scale: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0;
    while out.len() < 2 || 0.08 * n as f64 * 10f64.powi(-k) >= 8.0 {
        out.push(0.1 * scale * 10f64.powi(-k));
        k += 1;
    }
    out
}

/// Kernel density estimate and an atom test on scalar samples.
///
/// The atom test tracks the largest sample concentration in windows of
/// half-width `δ` as `δ` shrinks. A law with a bounded density keeps it near
/// the density's peak; an atom makes it grow like `1/δ`. The test passes when
/// each level exceeds the previous one (the KDE peak for the first) by at most
/// `factor` and no two samples coincide exactly.
pub fn density_diagnostic(samples: &[f64], opts: &DensityOptions) -> Result<DensityReport> {
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: n,
            needed: MIN_SAMPLES,
        });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("samples must be finite".into()));
    }
    if opts.bandwidths.iter().any(|&h| !(h > 0.0)) || opts.deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidArgument("bandwidths and deltas must be positive".into()));
    }
    if opts.deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("deltas must decrease".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mean = sorted.iter().sum::<f64>() / nf;
    let std_dev = (sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0)).sqrt();
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { std_dev.min(iqr / 1.34) } else { std_dev };
    let silverman = 0.9 * spread * nf.powf(-0.2);
    let ties = sorted.windows(2).filter(|w| w[0] == w[1]).count();

    let points = opts.kde_points.max(2);
    let (curve, first_peak) = if silverman > 0.0 {
        let c = kde(&sorted, silverman, points);
        let p = peak(&c, silverman);
        (c, p)
    } else {
        (
            Vec::new(),
            KdePeak {
                bandwidth: 0.0,
                peak: f64::INFINITY,
                at: sorted[0],
            },
        )
    };
    let mut peaks = vec![first_peak.clone()];
    for &h in &opts.bandwidths {
        peaks.push(peak(&kde(&sorted, h, points), h));
    }

    let deltas = if opts.deltas.is_empty() {
        default_deltas(n, if std_dev > 0.0 { std_dev } else { 1.0 })
    } else {
        opts.deltas.clone()
    };
    let mut atoms = Vec::with_capacity(deltas.len());
    // zero spread: there is no density to compare the first level with
    let mut prev = if silverman > 0.0 { first_peak.peak } else { 0.0 };
    for &delta in &deltas {
        let concentration = max_window(&sorted, delta) as f64 / (2.0 * nf * delta);
        let ratio = concentration / prev;
        atoms.push(AtomLevel {
            delta,
            concentration,
            ratio,
            pass: ratio <= opts.factor,
        });
        prev = concentration;
    }
    let pass = ties == 0 && atoms.iter().all(|a| a.pass);
    Ok(DensityReport {
        n_samples: n,
        mean,
        std_dev,
        silverman_bandwidth: silverman,
        kde: peaks,
        atoms,
        ties,
        factor: opts.factor,
        pass,
        curve,
    })
}
