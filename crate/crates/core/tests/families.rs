mod common;

use chaoskit::assumptions::{
    alpha_for_config, chaos_subspace, check_regularity, check_row_sums, dyadic_configs, estimate_alpha,
    estimate_beta, PartitionConfig,
};
use chaoskit::chaos::GaussianSample;
use chaoskit::kernels::{sample_path, uniform_grid, KernelFamily};
use chaoskit::tensor::{SymTensor, DEFAULT_RANK_TOL};
use common::dense;
use nalgebra::{DMatrix, DVector};

fn tagged(configs: Vec<PartitionConfig>) -> Vec<(Option<u32>, PartitionConfig)> {
    configs.into_iter().map(|c| (None, c)).collect()
}

fn vector(v: &[f64]) -> SymTensor {
    SymTensor::vector(v)
}

/// `f_t = Σ_{k<4} clamp(4t − k, 0, 1) e_k`: each quarter moves along its own axis.
fn staircase() -> KernelFamily {
    let nodes = (0..=4)
        .map(|k| {
            let v: Vec<f64> = (0..4).map(|j| if j < k { 1.0 } else { 0.0 }).collect();
            (k as f64 / 4.0, vector(&v))
        })
        .collect();
    KernelFamily::custom("staircase", nodes, 2.0).unwrap()
}

#[test]
fn every_built_in_vanishes_at_zero() {
    let fams = [
        KernelFamily::blk2(),
        KernelFamily::fd(6, 1.5).unwrap(),
        KernelFamily::herm2(4, 1.5).unwrap(),
        KernelFamily::rosen(0.875, 16).unwrap(),
    ];
    for fam in &fams {
        assert!(fam.at(0.0).unwrap().is_zero(), "{}", fam.name());
        let path = sample_path(fam, &uniform_grid(8), &GaussianSample::draw(fam.dim(), 3, 0)).unwrap();
        assert_eq!(path.x[0], 0.0);
        assert_eq!(path.dx[0].norm(), 0.0);
    }
}

#[test]
fn blk2_values() {
    let fam = KernelFamily::blk2();
    assert_eq!(fam.at(0.75).unwrap().as_vector().unwrap().as_slice(), &[0.5, 0.25]);
    assert_eq!(fam.increment(0.25, 0.75).unwrap().as_vector().unwrap().as_slice(), &[0.25, 0.25]);
    assert!(fam.at(1.5).is_err());
}

#[test]
fn hoelder_fit_recovers_claimed_exponents() {
    let fams = [
        KernelFamily::blk2(),
        KernelFamily::fd(6, 1.5).unwrap(),
        KernelFamily::herm2(5, 1.5).unwrap(),
        KernelFamily::rosen(0.875, 64).unwrap(),
    ];
    for fam in &fams {
        let fit = check_regularity(fam, &uniform_grid(32), 0.25, 0.05).unwrap();
        assert!(
            (fit.theta - fam.theta()).abs() <= 0.1,
            "{}: fitted {} claimed {}",
            fam.name(),
            fit.theta,
            fam.theta()
        );
        assert!(fit.pass);
    }
}

#[test]
fn flat_stretch_fails_regularity() {
    let nodes = vec![
        (0.0, vector(&[0.0, 0.0])),
        (0.5, vector(&[1.0, 0.0])),
        (0.75, vector(&[1.0, 0.0])),
        (1.0, vector(&[1.0, 1.0])),
    ];
    let fam = KernelFamily::custom("flat", nodes, 2.0).unwrap();
    let fit = check_regularity(&fam, &uniform_grid(16), 0.25, 0.05).unwrap();
    assert_eq!(fit.min_norm, 0.0);
    assert!(!fit.pass);
    assert!(fit.witness.0 >= 0.5 && fit.witness.1 <= 0.75);
}

#[test]
fn fd_finest_increments_are_orthogonal() {
    // coarse ramps move on every cell; the finest level holds directions 63..127
    let fam = KernelFamily::fd(6, 1.5).unwrap();
    let finest: Vec<DVector<f64>> = (0..64)
        .map(|k| {
            let inc = fam.increment(k as f64 / 64.0, (k + 1) as f64 / 64.0).unwrap();
            inc.as_vector().unwrap().rows(63, 64).into_owned()
        })
        .collect();
    for i in 0..64 {
        assert!(finest[i].norm() > 0.0);
        for j in i + 1..64 {
            assert_eq!(finest[i].dot(&finest[j]), 0.0, "cells {i} and {j}");
        }
    }
    let half = |a: f64, b: f64| fam.increment(a, b).unwrap().as_vector().unwrap().rows(63, 64).into_owned();
    assert_eq!(half(0.0, 0.5).dot(&half(0.5, 1.0)), 0.0);
}

#[test]
fn second_chaos_paths_match_dense_oracle() {
    for fam in [KernelFamily::herm2(1, 1.5).unwrap(), KernelFamily::rosen(0.875, 8).unwrap()] {
        assert!(fam.dim() <= 8);
        let grid = uniform_grid(16);
        let z = GaussianSample::draw(fam.dim(), 5, 1);
        let path = sample_path(&fam, &grid, &z).unwrap();
        let d = fam.dim();
        for (k, &t) in grid.iter().enumerate() {
            let f = DMatrix::from_row_slice(d, d, &dense(&fam.at(t).unwrap()));
            let x = (z.z.transpose() * &f * &z.z)[(0, 0)] - f.trace();
            assert!((path.x[k] - x).abs() < 1e-10, "{} t={t}", fam.name());
            assert!((&path.dx[k] - 2.0 * &f * &z.z).norm() < 1e-10);
        }
    }
}

#[test]
fn first_chaos_path_is_the_pairing() {
    let fam = KernelFamily::fd(3, 1.5).unwrap();
    let z = GaussianSample::draw(fam.dim(), 8, 0);
    let grid = uniform_grid(32);
    let path = sample_path(&fam, &grid, &z).unwrap();
    for (k, &t) in grid.iter().enumerate() {
        let f = fam.at(t).unwrap().as_vector().unwrap();
        assert!((path.x[k] - f.dot(&z.z)).abs() < 1e-12);
        assert!((&path.dx[k] - f).norm() < 1e-12);
    }
}

#[test]
fn subspace_examples() {
    let blk = KernelFamily::blk2();
    let b = chaos_subspace(&blk, 0.1, 0.4, DEFAULT_RANK_TOL).unwrap();
    assert_eq!(b.rank(), 1);
    assert!((b.matrix()[(0, 0)].abs() - 1.0).abs() < 1e-15);

    let pair = SymTensor::basis(3, &[0, 1]).unwrap();
    let fam = KernelFamily::custom("pair", vec![(0.0, SymTensor::zero(2, 3)), (1.0, pair)], 2.0).unwrap();
    let b = chaos_subspace(&fam, 0.2, 0.6, DEFAULT_RANK_TOL).unwrap();
    assert_eq!(b.rank(), 2);
    let p = b.matrix() * b.matrix().transpose();
    let want = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0]));
    assert!((p - want).amax() < 1e-12);
}

#[test]
fn blk2_alpha_vanishes_with_reproducible_witness() {
    let fam = KernelFamily::blk2();
    let config = PartitionConfig::new(vec![0.1], vec![0.2, 0.4], vec![]).unwrap();
    assert_eq!(alpha_for_config(&fam, &config, DEFAULT_RANK_TOL).unwrap(), Some(0.0));

    let all: Vec<_> = (1..=3)
        .flat_map(|d| dyadic_configs(d).into_iter().map(move |c| (Some(d), c)))
        .collect();
    let est = estimate_alpha(&fam, &all, DEFAULT_RANK_TOL).unwrap();
    assert!(est.value < 1e-12);
    assert!(!est.pass);
    let w = est.witness.clone().unwrap();
    assert_eq!(alpha_for_config(&fam, &w, DEFAULT_RANK_TOL).unwrap(), Some(est.value));
    assert_eq!(estimate_alpha(&fam, &all, DEFAULT_RANK_TOL).unwrap(), est);
}

#[test]
fn empty_conditioning_gives_one() {
    let fam = KernelFamily::fd(4, 1.5).unwrap();
    let config = PartitionConfig::new(vec![], vec![0.25, 0.5, 0.75], vec![]).unwrap();
    assert_eq!(alpha_for_config(&fam, &config, DEFAULT_RANK_TOL).unwrap(), Some(1.0));
}

#[test]
fn orthogonal_increments_give_alpha_one() {
    let fam = staircase();
    let configs: Vec<_> = (1..=2).flat_map(dyadic_configs).collect();
    let a = estimate_alpha(&fam, &tagged(configs.clone()), DEFAULT_RANK_TOL).unwrap();
    let b = estimate_beta(&fam, &tagged(configs), DEFAULT_RANK_TOL).unwrap();
    assert!((a.value - 1.0).abs() < 1e-12, "{}", a.value);
    assert!((b.value - 1.0).abs() < 1e-12, "{}", b.value);
}

#[test]
fn nested_conditioning_kills_beta() {
    // conditioning span contains the inner increment
    let fam = staircase();
    let config = PartitionConfig::new(vec![0.25], vec![0.3, 0.4], vec![]).unwrap();
    let b = estimate_beta(&fam, &tagged(vec![config]), DEFAULT_RANK_TOL).unwrap();
    assert!(b.value.abs() < 1e-12);
}

#[test]
fn row_sum_examples() {
    let line = KernelFamily::custom(
        "line",
        vec![(0.0, vector(&[0.0])), (1.0, vector(&[1.0]))],
        2.0,
    )
    .unwrap();
    assert!(check_row_sums(&line, &uniform_grid(8)).unwrap().min >= 0.0);

    let blk = check_row_sums(&KernelFamily::blk2(), &uniform_grid(16)).unwrap();
    // nested intervals always share a half, so every value is positive
    assert!(blk.pass && blk.min >= 0.0);

    let wobble = KernelFamily::from_fn("wobble", 1, 2, 64, 2.0, |t| {
        Ok(vector(&[(2.0 * std::f64::consts::PI * t).sin(), t]))
    })
    .unwrap();
    let r = check_row_sums(&wobble, &uniform_grid(16)).unwrap();
    assert!(!r.pass && r.min < -0.1, "{r:?}");
    let (u, v, s, t) = r.witness;
    assert!(s <= u && v <= t);
    let again = wobble.increment(u, v).unwrap().inner(&wobble.increment(s, t).unwrap()).unwrap();
    assert!((again - r.min).abs() < 1e-12);
}

#[test]
fn custom_family_from_json_file() {
    let json = r#"[
        {"t": 0.0, "tensor": {"order": 2, "dim": 2, "entries": []}},
        {"t": 0.5, "tensor": {"order": 2, "dim": 2, "entries": [[[1, 1], 1.0]]}},
        {"t": 1.0, "tensor": {"order": 2, "dim": 2, "entries": [[[1, 1], 1.0], [[1, 2], 2.0]]}}
    ]"#;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kernel.json");
    std::fs::write(&path, json).unwrap();
    let fam = KernelFamily::custom_from_json("file", &std::fs::read_to_string(&path).unwrap(), 1.5).unwrap();
    assert_eq!((fam.order(), fam.dim()), (2, 2));
    let mid = fam.at(0.75).unwrap();
    let want = SymTensor::from_entries(2, 2, vec![(vec![0, 0], 1.0), (vec![0, 1], 1.0)]).unwrap();
    assert!(mid.sub(&want).unwrap().norm() < 1e-15);

    let nonzero_start = r#"[{"t": 0.0, "tensor": {"order": 1, "dim": 1, "entries": [[[1], 1.0]]}},
                            {"t": 1.0, "tensor": {"order": 1, "dim": 1, "entries": []}}]"#;
    assert!(KernelFamily::custom_from_json("bad", nonzero_start, 1.5).is_err());
    assert!(KernelFamily::custom_from_json("bad", "[{\"t\": 0.0}]", 1.5).is_err());
}
