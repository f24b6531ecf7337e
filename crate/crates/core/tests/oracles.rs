//! Library routines checked against independent reference computations.

use std::collections::BTreeSet;

use asud_core::blackbox::{EvalResult, Indicator, Problem};
use asud_core::driver::{rejection_sample, SamplingMode};
use asud_core::grid::{stream_rng, Grid};
use asud_core::lsq::{solve, LsSystem};
use asud_core::measures::DiscreteSampler;
use asud_core::polyspace::{hyperbolic_cross, qr_factor};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn gaussian_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    // Sum of six centred uniforms: roughly Gaussian entries.
    DMatrix::from_fn(m, n, |_, _| (0..6).map(|_| rng.gen::<f64>() - 0.5).sum::<f64>())
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
fn mgs(b: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = b.shape();
    let mut q = b.clone();
    let mut r = DMatrix::zeros(n, n);
    for j in 0..n {
        for _pass in 0..2 {
            for i in 0..j {
                let c = q.column(i).dot(&q.column(j));
                r[(i, j)] += c;
                let qi = q.column(i).clone_owned();
                q.column_mut(j).axpy(-c, &qi, 1.0);
            }
        }
        let nrm = q.column(j).norm();
        r[(j, j)] = nrm;
        q.column_mut(j).scale_mut(1.0 / nrm);
    }
    assert_eq!(q.nrows(), m);
    (q, r)
}

#[test]
fn householder_matches_gram_schmidt() {
    let mut rng = stream_rng(101, 0);
    for _ in 0..30 {
        let m = rng.gen_range(20..120);
        let n = rng.gen_range(1..15);
        let b = gaussian_matrix(&mut rng, m, n);
        let f = qr_factor(b.clone()).unwrap();
        let (q, r) = mgs(&b);
        assert!((&f.q - &q).abs().max() < 1e-10);
        assert!((&f.r - &r).abs().max() < 1e-10);
    }
}

fn normal_equations(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let g = a.transpose() * a;
    let rhs = a.transpose() * b;
    g.cholesky().expect("full column rank").solve(&rhs)
}

fn gram_sigma_min(a: &DMatrix<f64>) -> f64 {
    let g = a.transpose() * a;
    g.symmetric_eigen().eigenvalues.min().max(0.0).sqrt()
}

#[test]
fn solver_agrees_with_normal_equations_and_gram_eigenvalues() {
    let mut rng = stream_rng(202, 0);
    for _ in 0..100 {
        let n = rng.gen_range(1..=12);
        let m = rng.gen_range(n..=60);
        let a = gaussian_matrix(&mut rng, m, n);
        let b = DVector::from_fn(m, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let sys = LsSystem {
            a: a.clone(),
            b: b.clone(),
            sample_indices: (0..m).collect(),
            weights: vec![1.0; m],
        };
        let fit = solve(&sys).unwrap();
        let x = normal_equations(&a, &b);
        assert!((&fit.coeffs - &x).norm() <= 1e-8 * x.norm().max(1e-300));
        let s = gram_sigma_min(&a);
        assert!((fit.sigma_min - s).abs() <= 1e-8 * s.max(1.0));
    }
}

fn brute_force_hc(d: usize, n: usize) -> BTreeSet<Vec<u32>> {
    let mut out = BTreeSet::new();
    let total = (n + 1).pow(d as u32);
    for code in 0..total {
        let mut c = code;
        let nu: Vec<u32> = (0..d)
            .map(|_| {
                let v = (c % (n + 1)) as u32;
                c /= n + 1;
                v
            })
            .collect();
        if nu.iter().map(|&v| v as usize + 1).product::<usize>() <= n + 1 {
            out.insert(nu);
        }
    }
    out
}

#[test]
fn hyperbolic_cross_matches_brute_force() {
    for d in 1..=4 {
        let mut prev: Option<Vec<Vec<u32>>> = None;
        for n in 0..=10 {
            let set = hyperbolic_cross(d, n).unwrap();
            let got: BTreeSet<Vec<u32>> = set.indices().iter().cloned().collect();
            assert_eq!(got.len(), set.len(), "duplicates for d={d} n={n}");
            assert_eq!(got, brute_force_hc(d, n), "d={d} n={n}");
            if let Some(p) = prev {
                assert_eq!(&set.indices()[..p.len()], &p[..], "not nested at d={d} n={n}");
            }
            prev = Some(set.indices().to_vec());
        }
    }
}

#[test]
fn discrete_sampler_passes_chi_square() {
    let probs = [0.05, 0.1, 0.2, 0.0, 0.15, 0.3, 0.08, 0.12];
    let sampler = DiscreteSampler::new(probs.iter().copied()).unwrap();
    let mut rng = stream_rng(303, 0);
    let draws = 40_000;
    let mut counts = [0usize; 8];
    for _ in 0..draws {
        counts[sampler.sample(&mut rng)] += 1;
    }
    assert_eq!(counts[3], 0);
    let stat: f64 = probs
        .iter()
        .zip(&counts)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, &c)| {
            let e = p * draws as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dof = probs.iter().filter(|p| **p > 0.0).count() - 1;
    let p_value = 1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat);
    assert!(p_value > 1e-3, "chi-square {stat}, p = {p_value}");
}

#[test]
fn rejection_count_follows_geometric_law() {
    // Half of the support lies inside the domain.
    let k = 1000;
    let coords: Vec<f64> = (0..k).map(|i| (i as f64 + 0.5) / k as f64 * 2.0 - 1.0).collect();
    let grid = Grid::from_points(1, coords, 0).unwrap();
    let oracle = |y: &[f64]| EvalResult::Finite(y[0]);
    let mut problem = Problem::new(&oracle, Indicator::half_open(0.0, f64::INFINITY).unwrap());
    let sampler = DiscreteSampler::new(grid.weights().iter().copied()).unwrap();
    let support: Vec<usize> = (0..k).collect();
    let mut rng = stream_rng(404, 1);
    let slots = 10_000;
    let mut evaluations = 0;
    for _ in 0..slots {
        let out = rejection_sample(&sampler, &support, &grid, &mut problem, SamplingMode::Standard, &mut rng, 1000)
            .unwrap();
        assert_eq!(out.rejected.len() as u64, out.evaluations - 1);
        evaluations += out.evaluations;
    }
    let mean = evaluations as f64 / slots as f64;
    assert!((mean - 2.0).abs() < 0.1, "mean evaluations per slot {mean}");
}
