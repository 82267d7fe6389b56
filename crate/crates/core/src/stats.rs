//! Deterministic seeding and reductions for parallel Monte Carlo.
//!
//! Every sample draws from its own ChaCha stream addressed by
//! `(seed, stream index)`, and results are summed with a fixed pairwise tree,
//! so the numbers do not depend on how rayon schedules the work.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Random number generator for sample `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives an independent seed for a named sub-experiment (splitmix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sum with a fixed binary tree shape determined only by the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Runs `f(0..n)` in parallel and returns results in index order.
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Estimate {
        let n = xs.len();
        let mean = pairwise_sum(xs) / n as f64;
        if n < 2 {
            return Estimate {
                mean,
                stderr: f64::NAN,
                n,
            };
        }
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&dev) / (n - 1) as f64;
        Estimate {
            mean,
            stderr: (var / n as f64).sqrt(),
            n,
        }
    }

    /// `|mean − target| ≤ k·stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Empirical fraction with a 95% Wilson score half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Proportion {
    pub hits: usize,
    pub n: usize,
    pub fraction: f64,
    pub radius: f64,
}

impl Proportion {
    pub fn new(hits: usize, n: usize) -> Proportion {
        let z = 1.959_963_984_540_054;
        let nf = n.max(1) as f64;
        let p = hits as f64 / nf;
        let denom = 1.0 + z * z / nf;
        let radius = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
        Proportion {
            hits,
            n,
            fraction: if n == 0 { 0.0 } else { p },
            radius,
        }
    }
}
