use super::*;
use crate::behavior_dim::{embodied_dimension, restricted_dimension, EXACT_RANK_TOL};
use crate::behavior_dim::SupportSet;
use crate::kernels::{behavior_map, random_simplex_point};
use crate::rng;
use proptest::prelude::*;

fn random_system(seed: u64, n_w: usize, n_s: usize, n_a: usize) -> SmlSystem {
    let mut r = rng::stream(seed, 77);
    let beta = StochasticKernel::random(n_w, n_s, &mut r).unwrap();
    let alpha = StochasticKernel::random(n_w * n_a, n_w, &mut r).unwrap();
    let init = random_simplex_point(n_w, &mut r);
    SmlSystem::new(beta, alpha, init).unwrap()
}

fn random_policy(seed: u64, n_s: usize, n_a: usize) -> StochasticKernel {
    StochasticKernel::random(n_s, n_a, &mut rng::stream(seed, 78)).unwrap()
}

/// Three sensors, two actions, identity sensor; the action has no effect in
/// the last world, so the behavior dimension is 2.
fn cube_system() -> SmlSystem {
    let beta = StochasticKernel::deterministic(&[0, 1, 2], 3).unwrap();
    let alpha = StochasticKernel::from_rows(&[
        vec![0.7, 0.2, 0.1],
        vec![0.1, 0.3, 0.6],
        vec![0.2, 0.5, 0.3],
        vec![0.6, 0.1, 0.3],
        vec![0.3, 0.3, 0.4],
        vec![0.3, 0.3, 0.4],
    ])
    .unwrap();
    SmlSystem::new(beta, alpha, vec![1.0, 0.0, 0.0]).unwrap()
}

fn action_independent() -> SmlSystem {
    let beta = StochasticKernel::uniform(2, 3).unwrap();
    let alpha = StochasticKernel::from_rows(&[
        vec![0.5, 0.5],
        vec![0.5, 0.5],
        vec![0.1, 0.9],
        vec![0.1, 0.9],
    ])
    .unwrap();
    SmlSystem::new(beta, alpha, vec![0.5, 0.5]).unwrap()
}

fn frobenius_gap(sys: &SmlSystem, a: &StochasticKernel, b: &StochasticKernel) -> f64 {
    let ka = behavior_map(sys, a).unwrap();
    let kb = behavior_map(sys, b).unwrap();
    ka.probs().iter().zip(kb.probs()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn cube_matrix_shape() {
    let sys = cube_system();
    let e = embodiment_matrix(&sys, EXACT_RANK_TOL).unwrap();
    assert_eq!(e.dim(), 2);
    assert_eq!(e.e.ncols(), 6);
    assert_eq!(linalg::numerical_rank(&e.e, 1e-9), 2);
}

#[test]
fn zero_dimensional_family_is_uniform() {
    let sys = action_independent();
    let e = embodiment_matrix(&sys, EXACT_RANK_TOL).unwrap();
    assert_eq!(e.dim(), 0);
    let pi = expfam_policy(&e, &[]).unwrap();
    assert_eq!(pi, StochasticKernel::uniform(3, 2).unwrap());
}

#[test]
fn zero_parameter_is_uniform() {
    let sys = random_system(3, 4, 3, 3);
    let e = embodiment_matrix(&sys, EXACT_RANK_TOL).unwrap();
    let pi = expfam_policy(&e, &vec![0.0; e.dim()]).unwrap();
    for row in pi.rows() {
        for &p in row {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }
    assert!(expfam_policy(&e, &vec![0.0; e.dim() + 1]).is_err());
}

#[test]
fn large_parameters_stay_normalized() {
    let sys = cube_system();
    let e = embodiment_matrix(&sys, EXACT_RANK_TOL).unwrap();
    let pi = expfam_policy(&e, &[1e4, -3e4]).unwrap();
    for row in pi.rows() {
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn scaling_a_direction_approaches_a_face() {
    let sys = cube_system();
    let e = embodiment_matrix(&sys, EXACT_RANK_TOL).unwrap();
    let v = [0.6, -0.8];
    let mins: Vec<f64> = [1.0, 10.0, 100.0]
        .iter()
        .map(|t| {
            let th: Vec<f64> = v.iter().map(|x| x * t).collect();
            let pi = expfam_policy(&e, &th).unwrap();
            pi.probs().iter().copied().fold(1.0, f64::min)
        })
        .collect();
    assert!(mins[0] > mins[1] && mins[1] > mins[2], "{mins:?}");
    assert!(mins[2] < 1e-6);
    assert!(mins[2] > 0.0);
}

#[test]
fn uniform_target_fits_at_origin() {
    let sys = random_system(5, 4, 3, 3);
    let e = embodiment_matrix(&sys, EXACT_RANK_TOL).unwrap();
    let target = StochasticKernel::uniform(3, 3).unwrap();
    let fit = fit_expfam(&sys, &e, &target, 1e-12, 50).unwrap();
    assert!(fit.converged);
    assert!(fit.residual <= 1e-10);
    assert!(fit.theta.iter().all(|t| t.abs() <= 1e-10));
}

#[test]
fn recovers_known_member() {
    let sys = random_system(11, 5, 3, 3);
    let e = embodiment_matrix(&sys, EXACT_RANK_TOL).unwrap();
    let mut r = rng::stream(1, 1);
    use rand::Rng;
    let theta_star: Vec<f64> = (0..e.dim()).map(|_| r.random_range(-2.0..2.0)).collect();
    let target = expfam_policy(&e, &theta_star).unwrap();
    let fit = fit_expfam(&sys, &e, &target, 1e-12, 100).unwrap();
    assert!(fit.converged);
    assert!(fit.behavior_gap <= 1e-8, "{}", fit.behavior_gap);
}

#[test]
fn interior_targets_in_the_cube_setting() {
    let sys = cube_system();
    let e = embodiment_matrix(&sys, EXACT_RANK_TOL).unwrap();
    for seed in 0..50 {
        let target = random_policy(seed, 3, 2);
        let fit = fit_expfam(&sys, &e, &target, 1e-10, 200).unwrap();
        assert!(fit.behavior_gap <= 1e-6, "seed {seed}: {}", fit.behavior_gap);
    }
}

#[test]
fn boundary_target_reports_best_effort() {
    let sys = cube_system();
    let e = embodiment_matrix(&sys, EXACT_RANK_TOL).unwrap();
    let target = StochasticKernel::deterministic(&[0, 1, 0], 2).unwrap();
    let loose = fit_expfam(&sys, &e, &target, 1e-14, 5).unwrap();
    let tight = fit_expfam(&sys, &e, &target, 1e-14, 40).unwrap();
    assert!(!loose.converged);
    assert!(tight.residual <= loose.residual);
}

#[test]
fn faces_of_the_cube() {
    let faces: Vec<_> = enumerate_faces(3, 2, 2).unwrap().collect();
    assert_eq!(faces.len(), 6);
    for f in &faces {
        assert_eq!(f.dim(), 2);
        assert_eq!(f.vertices().count(), 4);
    }
}

#[test]
fn vertex_and_whole_polytope_faces() {
    assert_eq!(enumerate_faces(3, 4, 0).unwrap().count(), 64);
    let whole: Vec<_> = enumerate_faces(3, 4, 9).unwrap().collect();
    assert_eq!(whole.len(), 1);
    assert!(whole[0].allowed.iter().all(|a| a == &vec![0, 1, 2, 3]));
    assert!(enumerate_faces(3, 4, 10).is_err());
    assert_eq!(enumerate_faces(0, 2, 0).unwrap().count(), 1);
}

fn brute_force_faces(n_s: usize, n_a: usize, dim: usize) -> Vec<Vec<Vec<usize>>> {
    let subsets: Vec<Vec<usize>> = (1u32..(1 << n_a))
        .map(|m| (0..n_a).filter(|i| m >> i & 1 == 1).collect())
        .collect();
    let mut out = vec![vec![]];
    for _ in 0..n_s {
        let mut next = Vec::new();
        for prefix in &out {
            for sub in &subsets {
                let mut p: Vec<Vec<usize>> = prefix.clone();
                p.push(sub.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out.retain(|p| p.iter().map(|a| a.len() - 1).sum::<usize>() == dim);
    out.sort();
    out
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn compositions_count(n_s: usize, n_a: usize, dim: usize) -> usize {
    fn go(parts: usize, left: usize, n_a: usize) -> usize {
        if parts == 0 {
            return usize::from(left == 0);
        }
        (0..=left.min(n_a - 1)).map(|k| binom(n_a, k + 1) * go(parts - 1, left - k, n_a)).sum()
    }
    go(n_s, dim, n_a)
}

fn affine_rank(points: &[Vec<f64>]) -> usize {
    if points.len() < 2 {
        return 0;
    }
    let cols = points[0].len();
    let m = nalgebra::DMatrix::from_fn(points.len() - 1, cols, |i, j| points[i + 1][j] - points[0][j]);
    linalg::numerical_rank(&m, 1e-9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn face_enumeration_matches_brute_force(n_s in 0usize..4, n_a in 1usize..4, frac in 0.0f64..=1.0) {
        let max = n_s * (n_a - 1);
        let dim = (frac * max as f64).round() as usize;
        let got: Vec<Vec<Vec<usize>>> = enumerate_faces(n_s, n_a, dim).unwrap().map(|f| f.allowed).collect();
        let want = brute_force_faces(n_s, n_a, dim);
        prop_assert_eq!(got.len(), compositions_count(n_s, n_a, dim));
        prop_assert_eq!(got, want);
    }

    #[test]
    fn embodiment_coordinates_are_isometric(seed in any::<u64>(), n_w in 1usize..5, n_s in 1usize..5, n_a in 1usize..5) {
        let sys = random_system(seed, n_w, n_s, n_a);
        let e = embodiment_matrix(&sys, EXACT_RANK_TOL).unwrap();
        prop_assert_eq!(e.dim(), embodied_dimension(&sys, EXACT_RANK_TOL).unwrap().d);
        let p = random_policy(seed, n_s, n_a);
        let q = random_policy(seed.wrapping_add(1), n_s, n_a);
        let lhs = euclid(&e.moments(&p), &e.moments(&q));
        prop_assert!((lhs - frobenius_gap(&sys, &p, &q)).abs() <= 1e-10);
    }

    #[test]
    fn fitted_moments_are_determined_by_behavior(seed in any::<u64>(), n_w in 2usize..5, n_s in 1usize..4, n_a in 2usize..4) {
        let sys = random_system(seed, n_w, n_s, n_a);
        let e = embodiment_matrix(&sys, EXACT_RANK_TOL).unwrap();
        let target = random_policy(seed, n_s, n_a);
        let twin = sparse_representative(&sys, &target, &SupportSet::full(n_s), 1e-9).unwrap();
        let f1 = fit_expfam(&sys, &e, &target, 1e-11, 200).unwrap();
        let f2 = fit_expfam(&sys, &e, &twin, 1e-11, 200).unwrap();
        let p1 = expfam_policy(&e, &f1.theta).unwrap();
        let p2 = expfam_policy(&e, &f2.theta).unwrap();
        if crate::policy_models::expfam::behavior_gap(&sys, &p1, &p2).unwrap() <= 1e-10 {
            prop_assert!(linalg::max_abs_diff(&e.moments(&p1), &e.moments(&p2)) <= 1e-8);
        }
    }

    #[test]
    fn faces_span_the_behavior_set(seed in any::<u64>(), n_w in 1usize..4, n_s in 1usize..4, n_a in 2usize..4) {
        let sys = random_system(seed, n_w, n_s, n_a);
        let d = embodied_dimension(&sys, EXACT_RANK_TOL).unwrap().d;
        let image = |pi: &StochasticKernel| behavior_map(&sys, pi).unwrap().probs().to_vec();
        let all: Vec<Vec<f64>> = enumerate_faces(n_s, n_a, n_s * (n_a - 1)).unwrap()
            .flat_map(|f| f.vertices().collect::<Vec<_>>()).map(|v| image(&v)).collect();
        let union: Vec<Vec<f64>> = enumerate_faces(n_s, n_a, d.min(n_s * (n_a - 1))).unwrap()
            .flat_map(|f| f.vertices().collect::<Vec<_>>()).map(|v| image(&v)).collect();
        prop_assert_eq!(affine_rank(&all), d);
        prop_assert_eq!(affine_rank(&union), d);
    }

    #[test]
    fn sparse_representative_meets_the_budget(seed in any::<u64>(), n_w in 1usize..6, n_s in 1usize..6, n_a in 1usize..6, mask in any::<u32>()) {
        let sys = random_system(seed, n_w, n_s, n_a);
        let target = random_policy(seed, n_s, n_a);
        let kept: Vec<usize> = (0..n_s).filter(|s| mask >> s & 1 == 1).collect();
        let support = SupportSet { sensor_indices: kept.clone(), kept_mass: 1.0 };
        let pi = sparse_representative(&sys, &target, &support, 1e-9).unwrap();
        let worlds = support_worlds(&sys, &support);
        let d_s = if worlds.is_empty() { 0 } else { restricted_dimension(&sys, &worlds, EXACT_RANK_TOL).unwrap().1 };
        prop_assert!(pi.nonzeros_in(&kept) <= kept.len() + d_s);
        let (kb, kt) = (behavior_map(&sys, &pi).unwrap(), behavior_map(&sys, &target).unwrap());
        for &w in &worlds {
            prop_assert!(linalg::max_abs_diff(kb.row(w), kt.row(w)) <= 1e-9);
        }
        for s in (0..n_s).filter(|s| !kept.contains(s)) {
            prop_assert_eq!(pi.row(s), target.row(s));
        }
    }
}

#[test]
fn hundred_random_targets_full_support() {
    for seed in 0..100u64 {
        let n = 2 + (seed % 4) as usize;
        let sys = random_system(seed, n, 5 - (seed % 3) as usize, 2 + (seed % 3) as usize);
        let (n_s, n_a) = (sys.n_sensor(), sys.n_actuator());
        let target = random_policy(seed + 1000, n_s, n_a);
        let support = SupportSet::full(n_s);
        let pi = sparse_representative(&sys, &target, &support, 1e-9).unwrap();
        let d = embodied_dimension(&sys, EXACT_RANK_TOL).unwrap().d;
        let all: Vec<usize> = (0..n_s).collect();
        assert!(pi.nonzeros_in(&all) <= n_s + d);
        let gap = linalg::max_abs_diff(
            behavior_map(&sys, &pi).unwrap().probs(),
            behavior_map(&sys, &target).unwrap().probs(),
        );
        assert!(gap <= 1e-9, "seed {seed}: {gap:e}");
    }
}

#[test]
fn deterministic_target_is_its_own_representative() {
    let sys = random_system(8, 4, 3, 3);
    let target = StochasticKernel::deterministic(&[2, 0, 1], 3).unwrap();
    let pi = sparse_representative(&sys, &target, &SupportSet::full(3), 1e-9).unwrap();
    assert_eq!(pi, target);
}

#[test]
fn zero_dimensional_world_gives_deterministic_rows() {
    let sys = action_independent();
    let target = random_policy(4, 3, 2);
    let pi = sparse_representative(&sys, &target, &SupportSet::full(3), 1e-9).unwrap();
    assert_eq!(pi.nonzeros_in(&[0, 1, 2]), 3);
}
